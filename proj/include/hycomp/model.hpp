#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hycomp/features.hpp"
#include "hycomp/hypnn.hpp"
#include "hycomp/rng.hpp"
#include "hycomp/taxonomy.hpp"

namespace hycomp {

enum class GeometryMode { kHyperbolic, kEuclidean };

struct ModelConfig {
  int dim = 24;
  int heads = 12;
  int ctx_len = 8;
  double power_p = 2.0;
  double attn_epsilon = 1e-6;
  double lambda_init = 0.1;
  double tau_init = 0.1;
  double t_init = 1.0;
  double kappa_init = 1.0;
  double min_parent_norm = 1e-6;
  GeometryMode geometry = GeometryMode::kHyperbolic;
};

// All learnables, keyed by stable names. kappa, tau and the attention scale
// are stored as logs so they stay positive under unconstrained updates.
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Mat> tensors;

  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;

  double kappa() const;
  double tau() const;

  static ModelParams init(const ModelConfig& config, const Taxonomy& taxonomy,
                          Rng& rng);
};

struct ForwardResult {
  // [B x |S|], [B x |O|], [B x |candidates|]; entries are -d/tau.
  ad::Var logits_state, logits_object, logits_comp;
  // Visual embeddings on the manifold (space components), [B x d].
  ad::Var vs, vo, vc;
  // Refined text embeddings of each item's own label classes, [B x d].
  ad::Var tl_comp, tl_state, tl_object, tl_sparent, tl_oparent;
  std::vector<int> label_pos;  // label index within candidates, per item
};

// Binds parameters as tape leaves and runs the differentiable pipeline.
class BoundModel {
 public:
  BoundModel(ad::Tape& tape, const ModelParams& params);

  ad::Var var(const std::string& name) const;
  const std::map<std::string, ad::Var>& vars() const { return vars_; }
  const ad::GeomCtx& geom() const { return geom_; }
  ad::Var tau() const { return tau_; }

  // Euclidean prompt encodings: one row per category of the level.
  ad::Var encode_state_parents(const Taxonomy& t) const;
  ad::Var encode_object_parents(const Taxonomy& t) const;
  ad::Var encode_states(const Taxonomy& t) const;
  ad::Var encode_objects(const Taxonomy& t) const;
  ad::Var encode_compositions(
      const std::vector<std::pair<int, int>>& candidates) const;

  ad::Var disentangle_state(ad::Var v) const;
  ad::Var disentangle_object(ad::Var v) const;

  ForwardResult forward(const FeatureBatch& batch, const Taxonomy& taxonomy,
                        const std::vector<std::pair<int, int>>& candidates) const;

 private:
  ad::Var encode_level(ad::Var tokens, const std::string& ctx_name,
                       int extra_rows) const;
  ad::Var mlp2(ad::Var x, const std::string& prefix) const;
  ad::HcaVars hca_vars(const std::string& branch) const;

  ad::Tape* tape_;
  const ModelParams* params_;
  std::map<std::string, ad::Var> vars_;
  ad::GeomCtx geom_;
  ad::AttnCtx attn_;
  ad::Var tau_, inv_tau_, lambda_;
};

// Plain text-class tables (space components) for reports; no gradients.
struct TextTables {
  Mat sp, op, s, o, c;
};
TextTables text_tables(const ModelParams& params, const Taxonomy& taxonomy);

Mat softmax_rows(const Mat& logits);

// Eq-style mixed score: p(c|I) + p(s|I) p(o|I) per candidate.
Mat mixed_scores(const Mat& logits_comp, const Mat& logits_state,
                 const Mat& logits_object,
                 const std::vector<std::pair<int, int>>& candidates);

// Argmax of the mixed score, ties broken toward the lowest candidate index.
std::vector<int> predict(const Mat& logits_comp, const Mat& logits_state,
                         const Mat& logits_object,
                         const std::vector<std::pair<int, int>>& candidates);

}  // namespace hycomp
