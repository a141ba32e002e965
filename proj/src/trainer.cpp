#include "hycomp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "hycomp/errors.hpp"
#include "hycomp/eval.hpp"

namespace hycomp {

namespace {

using json = nlohmann::ordered_json;

LossValues extract_values(ad::Tape& t, const ad::LossVars& lv) {
  LossValues v;
  v.da = t.val(lv.da)(0, 0);
  v.te = t.val(lv.te)(0, 0);
  v.ls = t.val(lv.ls)(0, 0);
  v.lo = t.val(lv.lo)(0, 0);
  v.total = t.val(lv.total)(0, 0);
  return v;
}

void check_finite(const LossValues& v) {
  auto bad = [](double x) { return !std::isfinite(x); };
  if (bad(v.da)) throw NumericalError("loss: non-finite L_DA");
  if (bad(v.te)) throw NumericalError("loss: non-finite L_TE");
  if (bad(v.ls)) throw NumericalError("loss: non-finite L_s");
  if (bad(v.lo)) throw NumericalError("loss: non-finite L_o");
}

}  // namespace

std::map<std::string, Mat> compute_gradients(
    const ModelParams& params, const FeatureBatch& batch,
    const Taxonomy& taxonomy,
    const std::vector<std::pair<int, int>>& candidates,
    const HardNegativeIndex& hard_index, const LossWeights& weights,
    LossValues* values_out) {
  ad::Tape tape;
  BoundModel model(tape, params);
  ForwardResult fwd = model.forward(batch, taxonomy, candidates);
  ad::LossVars lv = ad::compute_losses(tape, model.geom(), fwd, batch.labels,
                                       hard_index, weights,
                                       params.config.min_parent_norm);
  const LossValues values = extract_values(tape, lv);
  check_finite(values);
  if (values_out) *values_out = values;

  tape.backward(lv.total);

  std::map<std::string, Mat> grads;
  for (const auto& [name, var] : model.vars()) {
    Mat g = tape.grad(var);
    if (!g.allFinite())
      throw NumericalError("gradients: non-finite gradient for '" + name + "'");
    grads[name] = std::move(g);
  }
  return grads;
}

AdamState AdamState::init_like(const ModelParams& params) {
  AdamState s;
  for (const auto& [name, value] : params.tensors) {
    s.m[name] = Mat::Zero(value.rows(), value.cols());
    s.v[name] = Mat::Zero(value.rows(), value.cols());
  }
  return s;
}

void adam_step(ModelParams& params, AdamState& state,
               const std::map<std::string, Mat>& grads, double lr,
               const AdamConfig& cfg, double grad_clip) {
  double scale = 1.0;
  if (grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > grad_clip) scale = grad_clip / norm;
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (auto& [name, value] : params.tensors) {
    const Mat g = scale * grads.at(name);
    Mat& m = state.m.at(name);
    Mat& v = state.v.at(name);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    value.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
    if (!value.allFinite())
      throw NumericalError("adam: non-finite parameter '" + name + "'");
  }
}

TrainResult train(const FeatureBatch& data, const Taxonomy& taxonomy,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const LossWeights& weights, const CheckpointSink& sink) {
  if (config.batch_size <= 0) throw ConfigError("train: batch_size must be > 0");
  if (config.epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (config.learning_rate <= 0.0)
    throw ConfigError("train: learning_rate must be > 0");

  Rng rng(config.seed);
  TrainResult r;
  r.params = ModelParams::init(model_config, taxonomy, rng);
  r.opt = AdamState::init_like(r.params);

  std::vector<std::pair<int, int>> candidates =
      taxonomy.splits.train_seen.empty()
          ? taxonomy.compositions
          : taxonomy.split_pairs(taxonomy.splits.train_seen);
  const HardNegativeIndex hni = build_hard_negative_index(candidates);

  std::vector<int> order(data.count());
  std::iota(order.begin(), order.end(), 0);

  const int total_steps_per_epoch = static_cast<int>(
      (data.count() + config.batch_size - 1) / config.batch_size);
  const long long planned =
      static_cast<long long>(total_steps_per_epoch) * config.epochs;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    EpochMetrics em;
    em.epoch = epoch;
    double weight_sum = 0.0;
    for (int start = 0; start < static_cast<int>(order.size());
         start += config.batch_size) {
      const int n = std::min<int>(config.batch_size,
                                  static_cast<int>(order.size()) - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + n);
      FeatureBatch batch = data.subset(idx);

      LossValues values;
      auto grads = compute_gradients(r.params, batch, taxonomy, candidates,
                                     hni, weights, &values);
      double lr = config.learning_rate;
      if (config.cosine_decay && planned > 0)
        lr *= 0.5 * (1.0 + std::cos(3.14159265358979323846 *
                                    static_cast<double>(r.steps) /
                                    static_cast<double>(planned)));
      adam_step(r.params, r.opt, grads, lr, config.adam, config.grad_clip);
      r.steps += 1;

      em.total += values.total * n;
      em.da += values.da * n;
      em.te += values.te * n;
      em.ls += values.ls * n;
      em.lo += values.lo * n;
      weight_sum += n;
    }
    if (weight_sum > 0.0) {
      em.total /= weight_sum;
      em.da /= weight_sum;
      em.te /= weight_sum;
      em.ls /= weight_sum;
      em.lo /= weight_sum;
    }
    if (model_config.geometry == GeometryMode::kHyperbolic) {
      const TextTables tables = text_tables(r.params, taxonomy);
      ConeConfig cc;
      cc.gamma = weights.gamma;
      cc.min_parent_norm = model_config.min_parent_norm;
      em.cone_violation_rate =
          hierarchy_report(tables, taxonomy, r.params.kappa(), cc)
              .cone_violation_rate;
    }
    r.log.push_back(em);
    if (sink && config.checkpoint_every > 0 &&
        epoch % config.checkpoint_every == 0 && epoch != config.epochs)
      sink(r.params, r.opt, r.steps, epoch);
  }
  if (sink) sink(r.params, r.opt, r.steps, config.epochs);
  return r;
}

// ---- checkpoint container ----

namespace {

constexpr char kMagic[4] = {'H', 'Y', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_raw(std::ofstream& out, const void* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_mat(std::ofstream& out, const Mat& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      write_raw(out, &v, sizeof(double));
    }
}

Mat read_mat(std::ifstream& in, Index rows, Index cols, const std::string& path) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      if (!in) throw DataError("checkpoint: truncated payload in '" + path + "'");
      m(i, j) = v;
    }
  return m;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["heads"] = c.heads;
  j["ctx_len"] = c.ctx_len;
  j["power_p"] = c.power_p;
  j["attn_epsilon"] = c.attn_epsilon;
  j["lambda_init"] = c.lambda_init;
  j["tau_init"] = c.tau_init;
  j["t_init"] = c.t_init;
  j["kappa_init"] = c.kappa_init;
  j["min_parent_norm"] = c.min_parent_norm;
  j["geometry"] =
      c.geometry == GeometryMode::kHyperbolic ? "hyperbolic" : "euclidean";
  return j;
}

ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  c.dim = j.value("dim", c.dim);
  c.heads = j.value("heads", c.heads);
  c.ctx_len = j.value("ctx_len", c.ctx_len);
  c.power_p = j.value("power_p", c.power_p);
  c.attn_epsilon = j.value("attn_epsilon", c.attn_epsilon);
  c.lambda_init = j.value("lambda_init", c.lambda_init);
  c.tau_init = j.value("tau_init", c.tau_init);
  c.t_init = j.value("t_init", c.t_init);
  c.kappa_init = j.value("kappa_init", c.kappa_init);
  c.min_parent_norm = j.value("min_parent_norm", c.min_parent_norm);
  const std::string g = j.value("geometry", std::string("hyperbolic"));
  if (g == "hyperbolic")
    c.geometry = GeometryMode::kHyperbolic;
  else if (g == "euclidean")
    c.geometry = GeometryMode::kEuclidean;
  else
    throw ConfigError("model: unknown geometry '" + g + "'");
  return c;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const AdamState& opt, long long step,
                     const nlohmann::ordered_json& config_echo) {
  json header;
  header["version"] = kVersion;
  header["step"] = step;
  json config = config_echo;
  config["model"] = model_config_to_json(params.config);
  header["config"] = config;
  header["config_hash"] = fnv1a(config.dump());
  json tensors = json::array();
  auto add = [&](const std::string& name, const Mat& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  };
  for (const auto& [name, m] : params.tensors) add(name, m);
  for (const auto& [name, m] : opt.m) add("opt.m." + name, m);
  for (const auto& [name, m] : opt.v) add("opt.v." + name, m);
  header["tensors"] = tensors;
  header["opt_t"] = opt.t;

  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write '" + path + "'");
  write_raw(out, kMagic, 4);
  write_raw(out, &kVersion, sizeof(kVersion));
  const std::uint64_t head_len = head.size();
  write_raw(out, &head_len, sizeof(head_len));
  write_raw(out, head.data(), head.size());
  for (const auto& [name, m] : params.tensors) write_mat(out, m);
  for (const auto& [name, m] : opt.m) write_mat(out, m);
  for (const auto& [name, m] : opt.v) write_mat(out, m);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic in '" + path + "'");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));
  std::uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw DataError("checkpoint: truncated header in '" + path + "'");
  json header;
  try {
    header = json::parse(head);
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint: header parse error: ") + e.what());
  }

  Checkpoint ck;
  ck.step = header["step"].get<long long>();
  ck.config = header["config"];
  ck.params.config = model_config_from_json(header["config"]["model"]);
  ck.opt.t = header["opt_t"].get<long long>();
  for (const auto& t : header["tensors"]) {
    const std::string name = t["name"].get<std::string>();
    const Index rows = t["rows"].get<Index>();
    const Index cols = t["cols"].get<Index>();
    Mat m = read_mat(in, rows, cols, path);
    if (name.rfind("opt.m.", 0) == 0)
      ck.opt.m[name.substr(6)] = std::move(m);
    else if (name.rfind("opt.v.", 0) == 0)
      ck.opt.v[name.substr(6)] = std::move(m);
    else
      ck.params.tensors[name] = std::move(m);
  }
  return ck;
}

// ---- finite-difference verification ----

namespace {

// |S| = |O| = 3 under two parents each; 5 of the 9 compositions.
Taxonomy gradcheck_taxonomy() {
  Taxonomy t;
  t.states = {"sa", "sb", "sc"};
  t.objects = {"oa", "ob", "oc"};
  t.state_parent_vocab = {"sp0", "sp1"};
  t.object_parent_vocab = {"op0", "op1"};
  t.state_parent = {0, 0, 1};
  t.object_parent = {0, 1, 1};
  t.compositions = {{0, 0}, {0, 1}, {1, 1}, {2, 0}, {2, 2}};
  t.splits.train_seen = {0, 1, 2, 3, 4};
  return t;
}

double loss_value(const ModelParams& params, const FeatureBatch& batch,
                  const Taxonomy& taxonomy,
                  const std::vector<std::pair<int, int>>& candidates,
                  const HardNegativeIndex& hni, const LossWeights& weights) {
  ad::Tape tape;
  BoundModel model(tape, params);
  ForwardResult fwd = model.forward(batch, taxonomy, candidates);
  ad::LossVars lv = ad::compute_losses(tape, model.geom(), fwd, batch.labels,
                                       hni, weights,
                                       params.config.min_parent_norm);
  return tape.val(lv.total)(0, 0);
}

}  // namespace

GradcheckReport gradcheck(const GradcheckSpec& spec, std::uint64_t seed,
                          LossSelector selector, bool flip_te_sign) {
  Taxonomy taxonomy = gradcheck_taxonomy();
  Rng rng(seed);

  ModelConfig mc;
  mc.dim = spec.dim;
  mc.heads = spec.heads;
  mc.ctx_len = spec.ctx_len;
  ModelParams params = ModelParams::init(mc, taxonomy, rng);
  // Generic random weights keep pre-activations far from ReLU kinks at the
  // finite-difference step scale; the training init parks biases exactly at
  // zero where central differences straddle the kinks.
  for (auto& [name, tensor] : params.tensors)
    tensor = rng.uniform_mat(tensor.rows(), tensor.cols(), -0.5, 0.5);
  params.at("curvature.log_kappa")(0, 0) = rng.uniform(-0.3, 0.3);
  params.at("temperature.log_tau")(0, 0) = rng.uniform(-1.2, -0.2);
  params.at("attention.log_t")(0, 0) = rng.uniform(-0.3, 0.3);
  params.at("fusion.lambda")(0, 0) = rng.uniform(0.05, 0.3);

  LossWeights weights;
  switch (selector) {
    case LossSelector::kTotal:
      break;
    case LossSelector::kAlignment:
      weights.beta2 = 0.0;
      weights.beta3 = 0.0;
      break;
    case LossSelector::kEntailment:
      weights.beta1 = 0.0;
      weights.beta3 = 0.0;
      break;
    case LossSelector::kPrimitive:
      weights.beta1 = 0.0;
      weights.beta2 = 0.0;
      break;
  }

  const auto candidates = taxonomy.split_pairs(taxonomy.splits.train_seen);
  const HardNegativeIndex hni = build_hard_negative_index(candidates);

  FeatureBatch batch;
  batch.patch_count = 2;
  batch.global = rng.normal_mat(spec.batch, spec.dim,
                                1.0 / std::sqrt(static_cast<double>(spec.dim)));
  batch.patches =
      rng.normal_mat(spec.batch * 2, spec.dim,
                     1.0 / std::sqrt(static_cast<double>(spec.dim)));
  for (int i = 0; i < spec.batch; ++i)
    batch.labels.push_back(
        candidates[rng.below(candidates.size())]);

  auto grads = compute_gradients(params, batch, taxonomy, candidates, hni,
                                 weights);
  if (flip_te_sign && selector == LossSelector::kEntailment)
    for (auto& [name, g] : grads) g = -g;

  GradcheckReport report;
  const double h = spec.fd_step;
  for (auto& [name, tensor] : params.tensors) {
    double worst = 0.0;
    for (Index i = 0; i < tensor.rows(); ++i) {
      for (Index j = 0; j < tensor.cols(); ++j) {
        const double orig = tensor(i, j);
        tensor(i, j) = orig + h;
        const double up =
            loss_value(params, batch, taxonomy, candidates, hni, weights);
        tensor(i, j) = orig - h;
        const double dn =
            loss_value(params, batch, taxonomy, candidates, hni, weights);
        tensor(i, j) = orig;
        const double fd = (up - dn) / (2.0 * h);
        const double an = grads.at(name)(i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
    report.max_rel_err[name] = worst;
    if (worst > report.worst_err) {
      report.worst_err = worst;
      report.worst_name = name;
    }
  }
  return report;
}

}  // namespace hycomp
