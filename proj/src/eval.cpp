#include "hycomp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hycomp/errors.hpp"
#include "hycomp/geometry_ad.hpp"
#include "hycomp/rng.hpp"
#include "hycomp/trainer.hpp"

namespace hycomp {

namespace {

// Accuracy over seen- and unseen-labeled images at one bias value.
std::pair<double, double> accuracy_at_bias(
    const Mat& scores, const std::vector<int>& label_pos,
    const std::vector<bool>& label_is_seen,
    const std::vector<bool>& cand_is_seen, double bias) {
  Index seen_total = 0, seen_hit = 0, unseen_total = 0, unseen_hit = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    double best_score = scores(i, 0) + (cand_is_seen[0] ? 0.0 : bias);
    for (Index c = 1; c < scores.cols(); ++c) {
      const double s = scores(i, c) + (cand_is_seen[c] ? 0.0 : bias);
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    const bool hit = best == label_pos[i];
    if (label_is_seen[i]) {
      ++seen_total;
      seen_hit += hit;
    } else {
      ++unseen_total;
      unseen_hit += hit;
    }
  }
  return {static_cast<double>(seen_hit) / static_cast<double>(seen_total),
          static_cast<double>(unseen_hit) / static_cast<double>(unseen_total)};
}

}  // namespace

EvalReport evaluate(const Mat& scores, const std::vector<int>& label_pos,
                    const std::vector<bool>& label_is_seen,
                    const std::vector<bool>& cand_is_seen,
                    const std::vector<double>& bias_grid) {
  const Index B = scores.rows();
  const Index C = scores.cols();
  if (B == 0) throw DataError("evaluate: empty score matrix");
  if (static_cast<Index>(label_pos.size()) != B ||
      static_cast<Index>(label_is_seen.size()) != B ||
      static_cast<Index>(cand_is_seen.size()) != C)
    throw DataError("evaluate: inconsistent shapes");

  Index n_seen = 0, n_unseen = 0;
  for (bool s : label_is_seen) (s ? n_seen : n_unseen) += 1;
  if (n_seen == 0) throw DataError("evaluate: empty seen test subset");
  if (n_unseen == 0) throw DataError("evaluate: empty unseen test subset");
  bool any_seen_cand = false, any_unseen_cand = false;
  for (bool s : cand_is_seen) (s ? any_seen_cand : any_unseen_cand) = true;
  if (!any_seen_cand || !any_unseen_cand)
    throw DataError("evaluate: candidates must include both seen and unseen");

  std::vector<double> grid = bias_grid;
  if (grid.empty()) {
    // Per-image margin between the best seen and best unseen candidate;
    // accuracies are piecewise constant between consecutive margins.
    std::set<double> margins;
    for (Index i = 0; i < B; ++i) {
      double best_seen = -std::numeric_limits<double>::infinity();
      double best_unseen = -std::numeric_limits<double>::infinity();
      for (Index c = 0; c < C; ++c) {
        if (cand_is_seen[c])
          best_seen = std::max(best_seen, scores(i, c));
        else
          best_unseen = std::max(best_unseen, scores(i, c));
      }
      margins.insert(best_seen - best_unseen);
    }
    std::vector<double> sorted(margins.begin(), margins.end());
    grid.push_back(sorted.front() - 1.0);  // -inf sentinel: seen always wins
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k)
      grid.push_back(0.5 * (sorted[k] + sorted[k + 1]));
    grid.push_back(sorted.back() + 1.0);  // +inf sentinel
  }
  std::sort(grid.begin(), grid.end());

  EvalReport r;
  for (double b : grid) {
    const auto [sa, ua] =
        accuracy_at_bias(scores, label_pos, label_is_seen, cand_is_seen, b);
    r.bias_curve.push_back({b, sa, ua});
    const double hm = (sa + ua) > 0.0 ? 2.0 * sa * ua / (sa + ua) : 0.0;
    if (hm > r.hm) {
      r.hm = hm;
      r.hm_bias = b;
      r.hm_seen = sa;
      r.hm_unseen = ua;
    }
  }
  r.seen_acc = r.bias_curve.front()[1];
  r.unseen_acc = r.bias_curve.back()[2];

  // Trapezoid under the (seen, unseen) polyline traced by the sweep.
  double auc = 0.0;
  for (std::size_t k = 0; k + 1 < r.bias_curve.size(); ++k) {
    const double ds = r.bias_curve[k][1] - r.bias_curve[k + 1][1];
    auc += ds * 0.5 * (r.bias_curve[k][2] + r.bias_curve[k + 1][2]);
  }
  r.auc = auc;
  return r;
}

namespace {

LevelNormStats norm_stats_of(const Mat& space) {
  LevelNormStats s;
  const Index n = space.rows();
  if (n == 0) return s;
  Vec norms(n);
  for (Index i = 0; i < n; ++i) norms(i) = space.row(i).norm();
  s.mean = norms.mean();
  double var = 0.0;
  for (Index i = 0; i < n; ++i) var += (norms(i) - s.mean) * (norms(i) - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(n));
  return s;
}

Vec with_time_col(const Mat& space, Index row, double kappa) {
  Vec p(space.cols() + 1);
  p(0) = std::sqrt(space.row(row).squaredNorm() + 1.0 / kappa);
  p.tail(space.cols()) = space.row(row);
  return p;
}

}  // namespace

HierarchyReport hierarchy_report(const TextTables& tables,
                                 const Taxonomy& taxonomy, double kappa,
                                 const ConeConfig& cfg) {
  HierarchyReport r;
  r.norm_stats["state_parents"] = norm_stats_of(tables.sp);
  r.norm_stats["object_parents"] = norm_stats_of(tables.op);
  r.norm_stats["states"] = norm_stats_of(tables.s);
  r.norm_stats["objects"] = norm_stats_of(tables.o);
  r.norm_stats["compositions"] = norm_stats_of(tables.c);

  const auto edges = text_hierarchy_edges(taxonomy);
  Index violated = 0;
  for (const auto& e : edges) {
    const Mat* pt = nullptr;
    const Mat* ct = nullptr;
    switch (e.kind) {
      case EntailmentEdge::Kind::kStateToComp:
        pt = &tables.s;
        ct = &tables.c;
        break;
      case EntailmentEdge::Kind::kObjectToComp:
        pt = &tables.o;
        ct = &tables.c;
        break;
      case EntailmentEdge::Kind::kSParentToState:
        pt = &tables.sp;
        ct = &tables.s;
        break;
      case EntailmentEdge::Kind::kOParentToObject:
        pt = &tables.op;
        ct = &tables.o;
        break;
    }
    const Vec parent = with_time_col(*pt, e.parent, kappa);
    const Vec child = with_time_col(*ct, e.child, kappa);
    // Degenerate geometry (child at the apex or coincident pair) cannot
    // witness containment; count it as violated.
    const double kip = kappa * lorentz_inner(parent, child);
    const bool degenerate = (kip * kip - 1.0 <= 1e-15) ||
                            child.tail(child.size() - 1).norm() < 1e-9;
    if (degenerate || entailment_penalty(parent, child, kappa, cfg) > 1e-3)
      ++violated;
  }
  r.cone_violation_rate =
      edges.empty() ? 0.0
                    : static_cast<double>(violated) /
                          static_cast<double>(edges.size());
  return r;
}

// ---- balanced-tree distortion benchmark ----

namespace {

struct TreeGraph {
  int n = 0;
  std::vector<int> parent;
  std::vector<int> depth;
};

TreeGraph make_tree(int branching, int depth) {
  TreeGraph t;
  t.parent.push_back(-1);
  t.depth.push_back(0);
  int level_start = 0, level_count = 1;
  for (int lvl = 1; lvl <= depth; ++lvl) {
    const int next_start = static_cast<int>(t.parent.size());
    for (int p = level_start; p < level_start + level_count; ++p)
      for (int b = 0; b < branching; ++b) {
        t.parent.push_back(p);
        t.depth.push_back(lvl);
      }
    level_count = static_cast<int>(t.parent.size()) - next_start;
    level_start = next_start;
  }
  t.n = static_cast<int>(t.parent.size());
  return t;
}

int tree_distance(const TreeGraph& t, int a, int b) {
  int da = t.depth[a], db = t.depth[b];
  int steps = 0;
  while (da > db) {
    a = t.parent[a];
    --da;
    ++steps;
  }
  while (db > da) {
    b = t.parent[b];
    --db;
    ++steps;
  }
  while (a != b) {
    a = t.parent[a];
    b = t.parent[b];
    steps += 2;
  }
  return steps;
}

// Mean over pairs of exp|s + log r| is convex in s; golden-section search.
double optimal_scaled_distortion(const std::vector<double>& log_ratios) {
  auto f = [&](double s) {
    double acc = 0.0;
    for (double lr : log_ratios) acc += std::exp(std::abs(s + lr));
    return acc / static_cast<double>(log_ratios.size());
  };
  double lo = *std::max_element(log_ratios.begin(), log_ratios.end()) * -1.0;
  double hi = *std::min_element(log_ratios.begin(), log_ratios.end()) * -1.0;
  if (lo > hi) std::swap(lo, hi);
  lo -= 1.0;
  hi += 1.0;
  const double gr = 0.61803398874989484820;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (f(c) < f(d))
      b = d;
    else
      a = c;
    c = b - gr * (b - a);
    d = a + gr * (b - a);
    if (b - a < 1e-12) break;
  }
  return f(0.5 * (a + b));
}

}  // namespace

double tree_distortion_report(const DistortionSpec& spec, std::uint64_t seed) {
  if (spec.branching < 1 || spec.depth < 1)
    throw ConfigError("distortion: branching and depth must be >= 1");
  const TreeGraph tree = make_tree(spec.branching, spec.depth);

  std::vector<int> pi, pj;
  std::vector<double> gdist;
  for (int i = 0; i < tree.n; ++i)
    for (int j = i + 1; j < tree.n; ++j) {
      pi.push_back(i);
      pj.push_back(j);
      gdist.push_back(static_cast<double>(tree_distance(tree, i, j)));
    }
  Mat gcol(static_cast<Index>(gdist.size()), 1);
  Mat ginv(static_cast<Index>(gdist.size()), 1);
  for (std::size_t k = 0; k < gdist.size(); ++k) {
    gcol(static_cast<Index>(k), 0) = gdist[k];
    ginv(static_cast<Index>(k), 0) = 1.0 / gdist[k];
  }

  Rng rng(seed);
  const bool hyp = spec.geometry == DistortionGeometry::kHyperbolic;
  Mat coords = rng.normal_mat(tree.n, spec.dim,
                              0.1 / std::sqrt(static_cast<double>(spec.dim)));

  std::map<std::string, Mat> params{{"coords", coords}};
  std::map<std::string, Mat> m{{"coords", Mat::Zero(tree.n, spec.dim)}};
  std::map<std::string, Mat> v{{"coords", Mat::Zero(tree.n, spec.dim)}};
  const AdamConfig adam;
  long long step = 0;

  for (int it = 0; it < spec.steps; ++it) {
    ad::Tape t;
    ad::Var x = t.leaf(params["coords"]);
    ad::GeomCtx g;
    g.tape = &t;
    if (hyp) {
      Mat lk = Mat::Zero(1, 1);  // fixed unit curvature
      g = ad::make_geom_ctx(t, t.leaf(lk), ad::Geometry::kHyperbolic);
    } else {
      g.geometry = ad::Geometry::kEuclidean;
      g.tape = &t;
    }
    ad::Var space = ad::exp_map0(g, x);
    ad::Var a = t.gather_rows(space, pi);
    ad::Var b = t.gather_rows(space, pj);
    ad::Var d = ad::distance_rows(g, a, b);
    ad::Var err = t.mul(t.sub(d, t.leaf(gcol)), t.leaf(ginv));
    ad::Var loss = t.mean_all(t.mul(err, err));
    t.backward(loss);
    Mat grad = t.grad(x);

    // Adam on the coordinate block.
    step += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step));
    Mat& mm = m["coords"];
    Mat& vv = v["coords"];
    mm = adam.beta1 * mm + (1.0 - adam.beta1) * grad;
    vv = adam.beta2 * vv + (1.0 - adam.beta2) * grad.cwiseAbs2();
    params["coords"].array() -= spec.learning_rate * (mm / bc1).array() /
                                ((vv / bc2).array().sqrt() + adam.eps);
  }

  // Distortion of the trained embedding.
  const Mat& xs = params["coords"];
  std::vector<double> log_ratios;
  log_ratios.reserve(gdist.size());
  for (std::size_t k = 0; k < gdist.size(); ++k) {
    double d = 0.0;
    if (hyp) {
      const Vec a = exp_map_origin(Vec(xs.row(pi[k]).transpose()), 1.0);
      const Vec b = exp_map_origin(Vec(xs.row(pj[k]).transpose()), 1.0);
      d = geodesic_distance(a, b, 1.0);
    } else {
      d = (xs.row(pi[k]) - xs.row(pj[k])).norm();
    }
    d = std::max(d, 1e-12);
    log_ratios.push_back(std::log(d / gdist[k]));
  }
  return optimal_scaled_distortion(log_ratios);
}

}  // namespace hycomp
