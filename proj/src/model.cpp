#include "hycomp/model.hpp"

#include <cmath>

#include "hycomp/errors.hpp"

namespace hycomp {

using ad::Tape;
using ad::Var;

Mat& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw ConfigError("model: unknown parameter '" + name + "'");
  return it->second;
}

const Mat& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw ConfigError("model: unknown parameter '" + name + "'");
  return it->second;
}

double ModelParams::kappa() const {
  return std::exp(at("curvature.log_kappa")(0, 0));
}

double ModelParams::tau() const {
  return std::exp(at("temperature.log_tau")(0, 0));
}

namespace {

Mat scalar_mat(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

Mat fan_in_uniform(Index rows, Index cols, Rng& rng) {
  const double lim = 1.0 / std::sqrt(static_cast<double>(cols));
  return rng.uniform_mat(rows, cols, -lim, lim);
}

void init_hfc(ModelParams& p, const std::string& prefix, int d_out, int d_in,
              Rng& rng) {
  p.tensors[prefix + ".w"] = fan_in_uniform(d_out, d_in, rng);
  p.tensors[prefix + ".b"] = Mat::Zero(1, d_out);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config,
                              const Taxonomy& taxonomy, Rng& rng) {
  const int d = config.dim;
  if (config.heads <= 0 || d % config.heads != 0)
    throw ConfigError("model: heads must divide dim (dim=" +
                      std::to_string(d) + ", heads=" +
                      std::to_string(config.heads) + ")");
  ModelParams p;
  p.config = config;

  const int l = config.ctx_len;
  p.tensors["prompt.ctx.state"] = rng.normal_mat(l, d, 0.02);
  p.tensors["prompt.ctx.object"] = rng.normal_mat(l, d, 0.02);
  p.tensors["prompt.ctx.comp"] = rng.normal_mat(l, d, 0.02);
  p.tensors["prompt.tok.state_parent"] =
      rng.normal_mat(static_cast<Index>(taxonomy.state_parent_vocab.size()), d,
                     0.02);
  p.tensors["prompt.tok.object_parent"] =
      rng.normal_mat(static_cast<Index>(taxonomy.object_parent_vocab.size()), d,
                     0.02);
  p.tensors["prompt.tok.state"] =
      rng.normal_mat(static_cast<Index>(taxonomy.states.size()), d, 0.02);
  p.tensors["prompt.tok.object"] =
      rng.normal_mat(static_cast<Index>(taxonomy.objects.size()), d, 0.02);

  p.tensors["text_head.w1"] = fan_in_uniform(d, d, rng);
  p.tensors["text_head.b1"] = Mat::Zero(1, d);
  p.tensors["text_head.w2"] = fan_in_uniform(d, d, rng);
  p.tensors["text_head.b2"] = Mat::Zero(1, d);

  // Identity-plus-noise so the disentangled paths start near the input.
  for (const char* br : {"state", "object"}) {
    const std::string prefix = std::string("disentangler.") + br;
    p.tensors[prefix + ".w1"] = Mat::Identity(d, d) + rng.normal_mat(d, d, 0.02);
    p.tensors[prefix + ".b1"] = Mat::Zero(1, d);
    p.tensors[prefix + ".w2"] = Mat::Identity(d, d) + rng.normal_mat(d, d, 0.02);
    p.tensors[prefix + ".b2"] = Mat::Zero(1, d);
  }

  for (const char* br : {"state", "object", "comp"}) {
    const std::string prefix = std::string("hca.") + br;
    init_hfc(p, prefix + ".q", d, d, rng);
    init_hfc(p, prefix + ".k", d, d, rng);
    init_hfc(p, prefix + ".v", d, d, rng);
    init_hfc(p, prefix + ".out", d, d, rng);
    init_hfc(p, prefix + ".ffn1", d, d, rng);
    init_hfc(p, prefix + ".ffn2", d, d, rng);
  }

  p.tensors["fusion.lambda"] = scalar_mat(config.lambda_init);
  p.tensors["curvature.log_kappa"] = scalar_mat(std::log(config.kappa_init));
  p.tensors["temperature.log_tau"] = scalar_mat(std::log(config.tau_init));
  p.tensors["attention.log_t"] = scalar_mat(std::log(config.t_init));
  return p;
}

BoundModel::BoundModel(Tape& tape, const ModelParams& params)
    : tape_(&tape), params_(&params) {
  for (const auto& [name, value] : params.tensors)
    vars_[name] = tape.leaf(value);
  geom_ = ad::make_geom_ctx(
      tape, vars_.at("curvature.log_kappa"),
      params.config.geometry == GeometryMode::kHyperbolic
          ? ad::Geometry::kHyperbolic
          : ad::Geometry::kEuclidean);
  attn_.heads = params.config.heads;
  attn_.power_p = params.config.power_p;
  attn_.epsilon = params.config.attn_epsilon;
  attn_.scale_t = tape.exp(vars_.at("attention.log_t"));
  tau_ = tape.exp(vars_.at("temperature.log_tau"));
  inv_tau_ = tape.recip(tau_);
  lambda_ = vars_.at("fusion.lambda");
}

Var BoundModel::var(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end())
    throw ConfigError("model: unknown parameter '" + name + "'");
  return it->second;
}

Var BoundModel::mlp2(Var x, const std::string& prefix) const {
  Tape& t = *tape_;
  Var h = t.add_row(t.matmul_nt(x, var(prefix + ".w1")), var(prefix + ".b1"));
  return t.add_row(t.matmul_nt(t.relu(h), var(prefix + ".w2")),
                   var(prefix + ".b2"));
}

Var BoundModel::disentangle_state(Var v) const {
  return mlp2(v, "disentangler.state");
}

Var BoundModel::disentangle_object(Var v) const {
  return mlp2(v, "disentangler.object");
}

// Mean-pool of [context rows; token row(s)] followed by the text head.
// `extra_rows` counts the token rows already summed into `tokens`.
Var BoundModel::encode_level(Var tokens, const std::string& ctx_name,
                             int extra_rows) const {
  Tape& t = *tape_;
  const int l = params_->config.ctx_len;
  Var pooled = tokens;
  if (l > 0) pooled = t.add_row(pooled, t.colwise_sum(var(ctx_name)));
  pooled = t.scale(pooled, 1.0 / static_cast<double>(l + extra_rows));
  return mlp2(pooled, "text_head");
}

Var BoundModel::encode_state_parents(const Taxonomy&) const {
  return encode_level(var("prompt.tok.state_parent"), "prompt.ctx.state", 1);
}

Var BoundModel::encode_object_parents(const Taxonomy&) const {
  return encode_level(var("prompt.tok.object_parent"), "prompt.ctx.object", 1);
}

Var BoundModel::encode_states(const Taxonomy&) const {
  return encode_level(var("prompt.tok.state"), "prompt.ctx.state", 1);
}

Var BoundModel::encode_objects(const Taxonomy&) const {
  return encode_level(var("prompt.tok.object"), "prompt.ctx.object", 1);
}

Var BoundModel::encode_compositions(
    const std::vector<std::pair<int, int>>& candidates) const {
  Tape& t = *tape_;
  std::vector<int> s_idx, o_idx;
  s_idx.reserve(candidates.size());
  o_idx.reserve(candidates.size());
  for (const auto& [s, o] : candidates) {
    s_idx.push_back(s);
    o_idx.push_back(o);
  }
  Var toks = t.add(t.gather_rows(var("prompt.tok.state"), s_idx),
                   t.gather_rows(var("prompt.tok.object"), o_idx));
  return encode_level(toks, "prompt.ctx.comp", 2);
}

ad::HcaVars BoundModel::hca_vars(const std::string& branch) const {
  const std::string p = "hca." + branch;
  auto hfc = [&](const std::string& layer) {
    return ad::HfcVars{var(p + "." + layer + ".w"), var(p + "." + layer + ".b")};
  };
  return ad::HcaVars{hfc("q"),   hfc("k"),    hfc("v"),
                     hfc("out"), hfc("ffn1"), hfc("ffn2")};
}

ForwardResult BoundModel::forward(
    const FeatureBatch& batch, const Taxonomy& taxonomy,
    const std::vector<std::pair<int, int>>& candidates) const {
  Tape& t = *tape_;
  if (candidates.empty()) throw DataError("forward: empty candidate set");
  if (batch.dim() != params_->config.dim)
    throw DataError("forward: feature dim " + std::to_string(batch.dim()) +
                    " differs from model dim " +
                    std::to_string(params_->config.dim));

  const int B = static_cast<int>(batch.count());
  const int n_sp = static_cast<int>(taxonomy.state_parent_vocab.size());
  const int n_op = static_cast<int>(taxonomy.object_parent_vocab.size());
  const int n_s = static_cast<int>(taxonomy.states.size());
  const int n_o = static_cast<int>(taxonomy.objects.size());

  std::map<std::pair<int, int>, int> cand_pos;
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c)
    cand_pos[candidates[c]] = c;

  ForwardResult r;
  r.label_pos.resize(B);
  for (int i = 0; i < B; ++i) {
    auto it = cand_pos.find(batch.labels[i]);
    if (it == cand_pos.end())
      throw DataError("forward: label '" +
                      taxonomy.states[batch.labels[i].first] + "," +
                      taxonomy.objects[batch.labels[i].second] +
                      "' not in candidate set");
    r.label_pos[i] = it->second;
  }

  // Visual paths onto the manifold.
  Var v_glob = t.leaf(batch.global);
  r.vs = exp_map0(geom_, disentangle_state(v_glob));
  r.vo = exp_map0(geom_, disentangle_object(v_glob));
  r.vc = exp_map0(geom_, v_glob);

  // Patch tokens; the global vector stands in when patches are absent.
  const int P = batch.patch_count > 0 ? batch.patch_count : 1;
  Var patches_all = exp_map0(
      geom_, t.leaf(batch.patch_count > 0 ? batch.patches : batch.global));

  // Text tables on the manifold (unrefined).
  Var t_sp = exp_map0(geom_, encode_state_parents(taxonomy));
  Var t_op = exp_map0(geom_, encode_object_parents(taxonomy));
  Var t_s = exp_map0(geom_, encode_states(taxonomy));
  Var t_o = exp_map0(geom_, encode_objects(taxonomy));
  Var t_c = exp_map0(geom_, encode_compositions(candidates));

  // Per-branch stacks refined together against each image's patches.
  Var state_stack = t.concat_rows({t_sp, t_s});
  Var object_stack = t.concat_rows({t_op, t_o});
  const ad::HcaVars w_state = hca_vars("state");
  const ad::HcaVars w_object = hca_vars("object");
  const ad::HcaVars w_comp = hca_vars("comp");

  std::vector<int> s_rows(n_s), o_rows(n_o);
  for (int k = 0; k < n_s; ++k) s_rows[k] = n_sp + k;
  for (int k = 0; k < n_o; ++k) o_rows[k] = n_op + k;

  std::vector<Var> lrow_s, lrow_o, lrow_c;
  std::vector<Var> lab_c, lab_s, lab_o, lab_sp, lab_op;
  lrow_s.reserve(B);
  lrow_o.reserve(B);
  lrow_c.reserve(B);
  for (int i = 0; i < B; ++i) {
    std::vector<int> patch_idx(P);
    for (int k = 0; k < P; ++k) patch_idx[k] = i * P + k;
    Var kv = t.gather_rows(patches_all, patch_idx);

    Var rs = ad::refine(geom_, state_stack, kv, w_state, attn_, lambda_);
    Var ro = ad::refine(geom_, object_stack, kv, w_object, attn_, lambda_);
    Var rc = ad::refine(geom_, t_c, kv, w_comp, attn_, lambda_);

    Var vs_i = t.gather_rows(r.vs, {i});
    Var vo_i = t.gather_rows(r.vo, {i});
    Var vc_i = t.gather_rows(r.vc, {i});

    Var ds = distance_cross(geom_, vs_i, t.gather_rows(rs, s_rows));
    Var dobj = distance_cross(geom_, vo_i, t.gather_rows(ro, o_rows));
    Var dc = distance_cross(geom_, vc_i, rc);
    lrow_s.push_back(t.scale(t.mul_scalar(ds, inv_tau_), -1.0));
    lrow_o.push_back(t.scale(t.mul_scalar(dobj, inv_tau_), -1.0));
    lrow_c.push_back(t.scale(t.mul_scalar(dc, inv_tau_), -1.0));

    const auto [si, oi] = batch.labels[i];
    lab_c.push_back(t.gather_rows(rc, {r.label_pos[i]}));
    lab_s.push_back(t.gather_rows(rs, {n_sp + si}));
    lab_o.push_back(t.gather_rows(ro, {n_op + oi}));
    lab_sp.push_back(t.gather_rows(rs, {taxonomy.state_parent[si]}));
    lab_op.push_back(t.gather_rows(ro, {taxonomy.object_parent[oi]}));
  }

  r.logits_state = t.concat_rows(lrow_s);
  r.logits_object = t.concat_rows(lrow_o);
  r.logits_comp = t.concat_rows(lrow_c);
  r.tl_comp = t.concat_rows(lab_c);
  r.tl_state = t.concat_rows(lab_s);
  r.tl_object = t.concat_rows(lab_o);
  r.tl_sparent = t.concat_rows(lab_sp);
  r.tl_oparent = t.concat_rows(lab_op);
  return r;
}

TextTables text_tables(const ModelParams& params, const Taxonomy& taxonomy) {
  ad::Tape t;
  BoundModel m(t, params);
  TextTables out;
  out.sp = t.val(exp_map0(m.geom(), m.encode_state_parents(taxonomy)));
  out.op = t.val(exp_map0(m.geom(), m.encode_object_parents(taxonomy)));
  out.s = t.val(exp_map0(m.geom(), m.encode_states(taxonomy)));
  out.o = t.val(exp_map0(m.geom(), m.encode_objects(taxonomy)));
  out.c = t.val(exp_map0(m.geom(), m.encode_compositions(taxonomy.compositions)));
  return out;
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

Mat mixed_scores(const Mat& logits_comp, const Mat& logits_state,
                 const Mat& logits_object,
                 const std::vector<std::pair<int, int>>& candidates) {
  const Mat pc = softmax_rows(logits_comp);
  const Mat ps = softmax_rows(logits_state);
  const Mat po = softmax_rows(logits_object);
  Mat score(pc.rows(), pc.cols());
  for (Index i = 0; i < pc.rows(); ++i)
    for (Index c = 0; c < pc.cols(); ++c)
      score(i, c) = pc(i, c) + ps(i, candidates[c].first) *
                                   po(i, candidates[c].second);
  return score;
}

std::vector<int> predict(const Mat& logits_comp, const Mat& logits_state,
                         const Mat& logits_object,
                         const std::vector<std::pair<int, int>>& candidates) {
  const Mat score = mixed_scores(logits_comp, logits_state, logits_object,
                                 candidates);
  std::vector<int> out(score.rows());
  for (Index i = 0; i < score.rows(); ++i) {
    int best = 0;
    for (Index c = 1; c < score.cols(); ++c)
      if (score(i, c) > score(i, best)) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

}  // namespace hycomp
