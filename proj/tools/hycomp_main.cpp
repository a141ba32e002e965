#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hycomp/errors.hpp"
#include "hycomp/eval.hpp"
#include "hycomp/features.hpp"
#include "hycomp/hypernyms.hpp"
#include "hycomp/synth.hpp"
#include "hycomp/taxonomy.hpp"
#include "hycomp/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hycomp;

namespace {

json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError(std::string(what) + ": cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string(what) + ": parse error in '" + path +
                      "': " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

// Dotted-path override "a.b.c=value"; values parse as JSON scalars first,
// falling back to strings.
void apply_override(json& config, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key.path=value, got '" + kv + "'");
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json* node = &config;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("--set: empty key in '" + kv + "'");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i)
    node = &((*node)[parts[i]]);
  json value;
  try {
    value = json::parse(raw);
    if (!value.is_primitive()) value = raw;
  } catch (...) {
    value = raw;
  }
  (*node)[parts.back()] = value;
}

std::string require_string(const json& j, const std::string& dotted) {
  const json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->contains(part))
      throw ConfigError("config: missing field '" + dotted + "'");
    node = &((*node)[part]);
  }
  if (!node->is_string())
    throw ConfigError("config: field '" + dotted + "' must be a string");
  return node->get<std::string>();
}

LossWeights loss_weights_from_json(const json& j) {
  LossWeights w;
  if (!j.is_object()) return w;
  w.beta1 = j.value("beta1", w.beta1);
  w.beta2 = j.value("beta2", w.beta2);
  w.beta3 = j.value("beta3", w.beta3);
  w.hard_negative_w = j.value("hard_negative_w", w.hard_negative_w);
  w.tau = j.value("tau", w.tau);
  w.gamma = j.value("gamma", w.gamma);
  return w;
}

TrainConfig train_config_from_json(const json& j, std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  if (!j.is_object()) return c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.cosine_decay = j.value("cosine_decay", c.cosine_decay);
  if (j.contains("adam")) {
    c.adam.beta1 = j["adam"].value("beta1", c.adam.beta1);
    c.adam.beta2 = j["adam"].value("beta2", c.adam.beta2);
    c.adam.eps = j["adam"].value("eps", c.adam.eps);
  }
  return c;
}

json taxonomy_vocab_json(const Taxonomy& t) {
  json v;
  v["states"] = t.states;
  v["objects"] = t.objects;
  v["state_parent_vocab"] = t.state_parent_vocab;
  v["object_parent_vocab"] = t.object_parent_vocab;
  return v;
}

void check_vocab(const json& echo, const Taxonomy& t) {
  if (!echo.contains("taxonomy_vocab")) return;
  const json& v = echo["taxonomy_vocab"];
  auto check_list = [&](const char* key, const std::vector<std::string>& now) {
    const auto then = v[key].get<std::vector<std::string>>();
    if (then.size() != now.size())
      throw DataError(std::string("eval: ") + key + " size changed (" +
                      std::to_string(then.size()) + " at train time vs " +
                      std::to_string(now.size()) + ")");
    for (std::size_t i = 0; i < now.size(); ++i)
      if (then[i] != now[i])
        throw DataError(std::string("eval: ") + key + " mismatch at index " +
                        std::to_string(i) + ": '" + then[i] + "' vs '" +
                        now[i] + "'");
  };
  check_list("states", t.states);
  check_list("objects", t.objects);
  check_list("state_parent_vocab", t.state_parent_vocab);
  check_list("object_parent_vocab", t.object_parent_vocab);
}

json metrics_to_json(const EpochMetrics& m) {
  json j;
  j["epoch"] = m.epoch;
  j["total"] = m.total;
  j["L_DA"] = m.da;
  j["L_TE"] = m.te;
  j["L_s"] = m.ls;
  j["L_o"] = m.lo;
  j["cone_violation_rate"] = m.cone_violation_rate;
  return j;
}

json hierarchy_to_json(const HierarchyReport& h) {
  json j;
  json ns;
  for (const auto& [level, s] : h.norm_stats)
    ns[level] = {{"mean", s.mean}, {"std", s.stddev}};
  j["norm_stats"] = ns;
  j["cone_violation_rate"] = h.cone_violation_rate;
  return j;
}

json eval_report_to_json(const EvalReport& r, bool with_hierarchy) {
  json j;
  j["seen_acc"] = r.seen_acc;
  j["unseen_acc"] = r.unseen_acc;
  j["hm"] = r.hm;
  j["auc"] = r.auc;
  j["hm_bias"] = r.hm_bias;
  j["hm_seen"] = r.hm_seen;
  j["hm_unseen"] = r.hm_unseen;
  json curve = json::array();
  for (const auto& p : r.bias_curve)
    curve.push_back({{"bias", p[0]}, {"seen_acc", p[1]}, {"unseen_acc", p[2]}});
  j["bias_curve"] = curve;
  if (with_hierarchy)
    j["hierarchy"] = hierarchy_to_json(r.hierarchy);
  else
    j["hierarchy"] = nullptr;
  return j;
}

// Forward in chunks; returns mixed Eq-style scores plus bookkeeping.
struct ScoredBatch {
  Mat scores;
  std::vector<int> label_pos;
};

ScoredBatch score_features(const ModelParams& params, const Taxonomy& taxonomy,
                           const FeatureBatch& data,
                           const std::vector<std::pair<int, int>>& candidates,
                           int chunk = 64) {
  ScoredBatch out;
  out.scores.resize(data.count(), static_cast<Index>(candidates.size()));
  std::map<std::pair<int, int>, int> pos;
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c)
    pos[candidates[c]] = c;
  for (int i = 0; i < static_cast<int>(data.count()); ++i) {
    auto it = pos.find(data.labels[i]);
    if (it == pos.end())
      throw DataError("eval: label '" + taxonomy.states[data.labels[i].first] +
                      "," + taxonomy.objects[data.labels[i].second] +
                      "' not in candidate set");
    out.label_pos.push_back(it->second);
  }
  for (Index start = 0; start < data.count(); start += chunk) {
    std::vector<int> idx;
    for (Index i = start; i < std::min<Index>(data.count(), start + chunk); ++i)
      idx.push_back(static_cast<int>(i));
    FeatureBatch sub = data.subset(idx);
    ad::Tape tape;
    BoundModel model(tape, params);
    ForwardResult fwd = model.forward(sub, taxonomy, candidates);
    const Mat scores =
        mixed_scores(tape.val(fwd.logits_comp), tape.val(fwd.logits_state),
                     tape.val(fwd.logits_object), candidates);
    out.scores.middleRows(start, scores.rows()) = scores;
  }
  return out;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides) {
  json config = load_json_file(config_path, "config");
  for (const auto& kv : overrides) apply_override(config, kv);

  const std::string tax_path = require_string(config, "paths.taxonomy");
  const std::string feat_path = require_string(config, "paths.features");
  const std::string out_dir = require_string(config, "paths.out_dir");

  const std::uint64_t seed = config.value("seed", 0ull);
  ModelConfig mc = model_config_from_json(config.value("model", json::object()));
  LossWeights lw = loss_weights_from_json(config.value("loss", json::object()));
  mc.tau_init = lw.tau;
  TrainConfig tc =
      train_config_from_json(config.value("train", json::object()), seed);

  const Taxonomy taxonomy = load_taxonomy(tax_path);
  const FeatureBatch data = load_features(feat_path, taxonomy);

  fs::create_directories(out_dir);
  json resolved = config;
  resolved["taxonomy_vocab"] = taxonomy_vocab_json(taxonomy);
  write_text((fs::path(out_dir) / "config.json").string(),
             resolved.dump(2) + "\n");

  std::ofstream metrics((fs::path(out_dir) / "metrics.jsonl").string(),
                        std::ios::binary);
  if (!metrics) throw DataError("cannot write metrics log in '" + out_dir + "'");

  CheckpointSink sink = [&](const ModelParams& p, const AdamState& o,
                            long long step, int epoch) {
    const std::string name =
        epoch == tc.epochs ? "checkpoint.ckpt"
                           : "checkpoint_epoch" + std::to_string(epoch) + ".ckpt";
    save_checkpoint((fs::path(out_dir) / name).string(), p, o, step, resolved);
  };

  TrainResult result = train(data, taxonomy, mc, tc, lw, sink);
  for (const auto& m : result.log) {
    metrics << metrics_to_json(m).dump() << "\n";
    std::cout << "epoch " << m.epoch << " total " << m.total << " L_DA " << m.da
              << " L_TE " << m.te << " L_s " << m.ls << " L_o " << m.lo
              << " cone_violation " << m.cone_violation_rate << "\n";
  }
  std::cout << "wrote " << (fs::path(out_dir) / "checkpoint.ckpt").string()
            << " after " << result.steps << " steps\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& feat_path,
             const std::string& tax_path, const std::string& mode,
             const std::string& mask_path, const std::string& out_path,
             const std::string& csv_path) {
  if (mode != "closed" && mode != "open")
    throw ConfigError("eval: --mode must be closed or open");
  Checkpoint ck = load_checkpoint(ckpt_path);
  Taxonomy taxonomy = load_taxonomy(tax_path);
  check_vocab(ck.config, taxonomy);
  const FeatureBatch data = load_features(feat_path, taxonomy);

  if (!mask_path.empty()) {
    const json mask = load_json_file(mask_path, "mask");
    taxonomy.feasibility_mask.clear();
    for (const auto& v : mask) {
      const int s = taxonomy.state_index(v[0].get<std::string>());
      const int o = taxonomy.object_index(v[1].get<std::string>());
      if (s < 0 || o < 0)
        throw DataError("mask: unknown primitive in pair [" +
                        v[0].get<std::string>() + "," +
                        v[1].get<std::string>() + "]");
      taxonomy.feasibility_mask.push_back({s, o});
    }
  }

  const auto candidates = mode == "open" ? taxonomy.open_world_candidates()
                                         : taxonomy.closed_world_candidates();
  if (taxonomy.splits.train_seen.empty())
    throw DataError("eval: taxonomy has no train_seen split");
  std::set<std::pair<int, int>> seen;
  for (const auto& p : taxonomy.split_pairs(taxonomy.splits.train_seen))
    seen.insert(p);

  const ScoredBatch scored =
      score_features(ck.params, taxonomy, data, candidates);
  std::vector<bool> cand_is_seen;
  for (const auto& c : candidates) cand_is_seen.push_back(seen.count(c) > 0);
  std::vector<bool> label_is_seen;
  for (const auto& l : data.labels) label_is_seen.push_back(seen.count(l) > 0);

  EvalReport report = evaluate(scored.scores, scored.label_pos, label_is_seen,
                               cand_is_seen);
  const bool hyp = ck.params.config.geometry == GeometryMode::kHyperbolic;
  if (hyp) {
    ConeConfig cc;
    cc.gamma = ck.config.contains("loss")
                   ? ck.config["loss"].value("gamma", 0.1)
                   : 0.1;
    cc.min_parent_norm = ck.params.config.min_parent_norm;
    report.hierarchy = hierarchy_report(text_tables(ck.params, taxonomy),
                                        taxonomy, ck.params.kappa(), cc);
  }

  const json out = eval_report_to_json(report, hyp);
  write_text(out_path, out.dump(2) + "\n");
  if (!csv_path.empty()) {
    std::ostringstream csv;
    csv << "bias,seen_acc,unseen_acc\n";
    for (const auto& p : report.bias_curve)
      csv << p[0] << "," << p[1] << "," << p[2] << "\n";
    write_text(csv_path, csv.str());
  }
  std::cout << "seen " << report.seen_acc << " unseen " << report.unseen_acc
            << " hm " << report.hm << " auc " << report.auc << "\n";
  return 0;
}

int cmd_report(const std::string& ckpt_path, const std::string& tax_path,
               const std::string& out_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  Taxonomy taxonomy = load_taxonomy(tax_path);
  check_vocab(ck.config, taxonomy);
  if (ck.params.config.geometry != GeometryMode::kHyperbolic)
    throw ConfigError("report: hierarchy report requires hyperbolic geometry");
  ConeConfig cc;
  cc.gamma =
      ck.config.contains("loss") ? ck.config["loss"].value("gamma", 0.1) : 0.1;
  cc.min_parent_norm = ck.params.config.min_parent_norm;
  const HierarchyReport report = hierarchy_report(
      text_tables(ck.params, taxonomy), taxonomy, ck.params.kappa(), cc);
  const json j = hierarchy_to_json(report);
  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_distort(int branching, int depth, int dim, const std::string& geometry,
                int steps, std::uint64_t seed) {
  DistortionSpec spec;
  spec.branching = branching;
  spec.depth = depth;
  spec.dim = dim;
  spec.steps = steps;
  if (geometry == "hyp")
    spec.geometry = DistortionGeometry::kHyperbolic;
  else if (geometry == "euc")
    spec.geometry = DistortionGeometry::kEuclidean;
  else
    throw ConfigError("distort: --geometry must be hyp or euc");
  const double d = tree_distortion_report(spec, seed);
  std::cout << "distortion " << d << "\n";
  return 0;
}

int cmd_gradcheck(int dim, int heads, std::uint64_t seed) {
  GradcheckSpec spec;
  spec.dim = dim;
  spec.heads = heads;
  const GradcheckReport r = gradcheck(spec, seed);
  for (const auto& [name, err] : r.max_rel_err)
    std::cout << name << " " << err << "\n";
  std::cout << "worst " << r.worst_name << " " << r.worst_err << "\n";
  if (r.worst_err > 1e-3) {
    std::cerr << "gradcheck: max relative error " << r.worst_err
              << " exceeds 1e-3\n";
    return 3;
  }
  return 0;
}

int cmd_hypernyms(const std::string& endpoint, const std::string& cats_path,
                  const std::string& kind, const std::string& model,
                  const std::string& out_path) {
  const json cats = load_json_file(cats_path, "categories");
  if (!cats.is_array())
    throw ConfigError("categories: expected a JSON array of strings");
  std::vector<std::string> categories;
  for (const auto& c : cats) categories.push_back(c.get<std::string>());
  const char* key = std::getenv("HYPERNYM_API_KEY");
  const auto parents = generate_hypernyms(endpoint, key ? key : "", categories,
                                          kind, model);
  json out = json::object();
  for (const auto& [child, parent] : parents) out[child] = parent;
  write_text(out_path, out.dump(2) + "\n");
  std::cout << "wrote " << out_path << " (" << parents.size() << " entries)\n";
  return 0;
}

int cmd_synth(const std::string& out_dir, int parents, int per_parent,
              double seen_fraction, int per_comp_train, int per_comp_test,
              int dim, double noise, int patch_count, std::uint64_t seed) {
  fs::create_directories(out_dir);
  Rng rng(seed);
  SynthTaxonomySpec ts;
  ts.state_parents = parents;
  ts.states_per_parent = per_parent;
  ts.object_parents = parents;
  ts.objects_per_parent = per_parent;
  ts.seen_fraction = seen_fraction;
  const Taxonomy taxonomy = make_balanced_taxonomy(ts, rng);
  save_taxonomy((fs::path(out_dir) / "taxonomy.json").string(), taxonomy);

  SynthFeatureSpec fsp;
  fsp.per_composition = per_comp_train;
  fsp.dim = dim;
  fsp.noise = noise;
  fsp.patch_count = patch_count;
  const FeatureBatch train_feats =
      make_synthetic_features(taxonomy, taxonomy.splits.train_seen, fsp, rng);
  save_features((fs::path(out_dir) / "train_features.json").string(),
                train_feats, taxonomy);

  std::vector<int> test_comps = taxonomy.splits.test_seen;
  test_comps.insert(test_comps.end(), taxonomy.splits.test_unseen.begin(),
                    taxonomy.splits.test_unseen.end());
  fsp.per_composition = per_comp_test;
  const FeatureBatch test_feats =
      make_synthetic_features(taxonomy, test_comps, fsp, rng);
  save_features((fs::path(out_dir) / "test_features.json").string(), test_feats,
                taxonomy);
  std::cout << "wrote taxonomy and features under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical hyperbolic embeddings for compositional "
               "recognition"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train from a JSON config");
  std::string config_path;
  std::vector<std::string> overrides;
  train_cmd->add_option("--config", config_path, "Run config JSON")->required();
  train_cmd->add_option("--set", overrides, "Override config: key.path=value");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt, feats, tax, mode = "closed", mask, eval_out = "eval_report.json",
              eval_csv;
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--features", feats, "Feature manifest")->required();
  eval_cmd->add_option("--taxonomy", tax, "Taxonomy JSON")->required();
  eval_cmd->add_option("--mode", mode, "closed|open");
  eval_cmd->add_option("--mask", mask, "Feasibility mask JSON");
  eval_cmd->add_option("--out", eval_out, "Report output path");
  eval_cmd->add_option("--csv", eval_csv, "Bias-curve CSV output path");

  // report
  auto* report_cmd = app.add_subcommand("report", "Hierarchy-health report");
  std::string rep_ckpt, rep_tax, rep_out;
  report_cmd->add_option("--ckpt", rep_ckpt, "Checkpoint path")->required();
  report_cmd->add_option("--taxonomy", rep_tax, "Taxonomy JSON")->required();
  report_cmd->add_option("--out", rep_out, "Report output path");

  // distort
  auto* distort_cmd =
      app.add_subcommand("distort", "Balanced-tree distortion benchmark");
  int branching = 3, depth = 4, dist_dim = 16, dist_steps = 400;
  std::string dist_geom = "hyp";
  std::uint64_t dist_seed = 0;
  distort_cmd->add_option("--branching", branching, "Branching factor");
  distort_cmd->add_option("--depth", depth, "Tree depth");
  distort_cmd->add_option("--dim", dist_dim, "Embedding dimension");
  distort_cmd->add_option("--geometry", dist_geom, "hyp|euc");
  distort_cmd->add_option("--steps", dist_steps, "Optimization steps");
  distort_cmd->add_option("--seed", dist_seed, "Seed");

  // gradcheck
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient check");
  int gc_dim = 8, gc_heads = 2;
  std::uint64_t gc_seed = 0;
  grad_cmd->add_option("--dim", gc_dim, "Model dimension");
  grad_cmd->add_option("--heads", gc_heads, "Attention heads");
  grad_cmd->add_option("--seed", gc_seed, "Seed");

  // hypernyms
  auto* hyp_cmd = app.add_subcommand(
      "hypernyms", "Generate parent categories via a chat-completion endpoint");
  std::string endpoint, cats_path, kind = "object", llm_model = "gemini-2.5-pro",
              hyp_out = "hypernyms.json";
  hyp_cmd->add_option("--endpoint", endpoint, "Endpoint URL")->required();
  hyp_cmd->add_option("--categories", cats_path, "JSON array of category names")
      ->required();
  hyp_cmd->add_option("--kind", kind, "state|object");
  hyp_cmd->add_option("--model", llm_model, "Model name");
  hyp_cmd->add_option("--out", hyp_out, "Output parent-map path");

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic taxonomy and features");
  std::string synth_out;
  int sy_parents = 3, sy_per_parent = 3, sy_train_n = 4, sy_test_n = 4,
      sy_dim = 16, sy_patches = 2;
  double sy_seen = 1.0, sy_noise = 0.25;
  std::uint64_t sy_seed = 0;
  synth_cmd->add_option("--out-dir", synth_out, "Output directory")->required();
  synth_cmd->add_option("--parents", sy_parents, "Parents per kind");
  synth_cmd->add_option("--per-parent", sy_per_parent, "Primitives per parent");
  synth_cmd->add_option("--seen-fraction", sy_seen, "Seen composition fraction");
  synth_cmd->add_option("--train-per-comp", sy_train_n,
                        "Training images per composition");
  synth_cmd->add_option("--test-per-comp", sy_test_n,
                        "Test images per composition");
  synth_cmd->add_option("--dim", sy_dim, "Feature dimension");
  synth_cmd->add_option("--noise", sy_noise, "Feature noise");
  synth_cmd->add_option("--patches", sy_patches, "Patch tokens per image");
  synth_cmd->add_option("--seed", sy_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, overrides);
    if (*eval_cmd)
      return cmd_eval(ckpt, feats, tax, mode, mask, eval_out, eval_csv);
    if (*report_cmd) return cmd_report(rep_ckpt, rep_tax, rep_out);
    if (*distort_cmd)
      return cmd_distort(branching, depth, dist_dim, dist_geom, dist_steps,
                         dist_seed);
    if (*grad_cmd) return cmd_gradcheck(gc_dim, gc_heads, gc_seed);
    if (*hyp_cmd)
      return cmd_hypernyms(endpoint, cats_path, kind, llm_model, hyp_out);
    if (*synth_cmd)
      return cmd_synth(synth_out, sy_parents, sy_per_parent, sy_seen,
                       sy_train_n, sy_test_n, sy_dim, sy_noise, sy_patches,
                       sy_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
