#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hycomp/cones.hpp"
#include "hycomp/model.hpp"

namespace hycomp {

struct LevelNormStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct HierarchyReport {
  std::map<std::string, LevelNormStats> norm_stats;  // Sp/Op/S/O/C
  double cone_violation_rate = 0.0;
};

struct EvalReport {
  double seen_acc = 0.0;    // bias -inf endpoint
  double unseen_acc = 0.0;  // bias +inf endpoint
  double hm = 0.0;          // best harmonic mean over the sweep
  double auc = 0.0;
  double hm_bias = 0.0;
  double hm_seen = 0.0;
  double hm_unseen = 0.0;
  // (bias, seen accuracy, unseen accuracy) per grid point, bias ascending;
  // the endpoints carry the sentinel biases.
  std::vector<std::array<double, 3>> bias_curve;
  HierarchyReport hierarchy;
};

// Calibration-bias sweep over mixed scores [B x |candidates|]. The bias is
// added to every unseen candidate's score; an empty grid selects all
// midpoints between consecutive distinct per-image margins plus sentinels,
// which realizes the full -inf..+inf sweep exactly.
EvalReport evaluate(const Mat& scores, const std::vector<int>& label_pos,
                    const std::vector<bool>& label_is_seen,
                    const std::vector<bool>& cand_is_seen,
                    const std::vector<double>& bias_grid = {});

HierarchyReport hierarchy_report(const TextTables& tables,
                                 const Taxonomy& taxonomy, double kappa,
                                 const ConeConfig& cfg);

enum class DistortionGeometry { kHyperbolic, kEuclidean };

struct DistortionSpec {
  int branching = 3;
  int depth = 4;
  int dim = 16;
  DistortionGeometry geometry = DistortionGeometry::kHyperbolic;
  int steps = 400;
  double learning_rate = 0.05;
};

// Embeds a balanced tree by stress minimization and reports the mean
// multiplicative distortion over all node pairs after optimal uniform
// scaling. Deterministic given the seed.
double tree_distortion_report(const DistortionSpec& spec, std::uint64_t seed);

}  // namespace hycomp
