#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hycomp/losses.hpp"
#include "json.hpp"

namespace hycomp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 64;
  int epochs = 1;
  std::uint64_t seed = 0;
  AdamConfig adam;
  double grad_clip = 0.0;    // global max-norm; 0 disables
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  bool cosine_decay = false;
};

struct AdamState {
  std::map<std::string, Mat> m, v;
  long long t = 0;

  static AdamState init_like(const ModelParams& params);
};

struct EpochMetrics {
  int epoch = 0;
  double total = 0.0, da = 0.0, te = 0.0, ls = 0.0, lo = 0.0;
  double cone_violation_rate = -1.0;  // -1 when not applicable (euclidean)
};

// One reverse pass over the full objective; a gradient per named tensor.
// Throws NumericalError naming the offending part/parameter on non-finite
// values.
std::map<std::string, Mat> compute_gradients(
    const ModelParams& params, const FeatureBatch& batch,
    const Taxonomy& taxonomy,
    const std::vector<std::pair<int, int>>& candidates,
    const HardNegativeIndex& hard_index, const LossWeights& weights,
    LossValues* values_out = nullptr);

void adam_step(ModelParams& params, AdamState& state,
               const std::map<std::string, Mat>& grads, double lr,
               const AdamConfig& cfg, double grad_clip);

struct TrainResult {
  ModelParams params;
  AdamState opt;
  std::vector<EpochMetrics> log;
  long long steps = 0;
};

using CheckpointSink = std::function<void(
    const ModelParams&, const AdamState&, long long step, int epoch)>;

TrainResult train(const FeatureBatch& data, const Taxonomy& taxonomy,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const LossWeights& weights,
                  const CheckpointSink& sink = nullptr);

// ---- checkpoint container ----

struct Checkpoint {
  ModelParams params;
  AdamState opt;
  long long step = 0;
  nlohmann::ordered_json config;  // resolved-config echo
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const AdamState& opt, long long step,
                     const nlohmann::ordered_json& config_echo);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);

// ---- finite-difference verification ----

struct GradcheckSpec {
  int dim = 8;
  int heads = 2;
  int ctx_len = 2;
  int batch = 4;
  double fd_step = 1e-5;
};

enum class LossSelector { kTotal, kAlignment, kEntailment, kPrimitive };

struct GradcheckReport {
  std::map<std::string, double> max_rel_err;  // per parameter tensor
  std::string worst_name;
  double worst_err = 0.0;
};

// Central finite differences against the tape on a tiny model
// (|S| = |O| = 3, |C| = 5). `flip_te_sign` is a mutation hook that corrupts
// the analytic entailment gradient so tests can confirm the check trips.
GradcheckReport gradcheck(const GradcheckSpec& spec, std::uint64_t seed,
                          LossSelector selector = LossSelector::kTotal,
                          bool flip_te_sign = false);

}  // namespace hycomp
