#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hycomp/errors.hpp"
#include "hycomp/eval.hpp"
#include "hycomp/rng.hpp"

using namespace hycomp;

namespace {

// Direct accuracy computation at one bias, used to cross-check the sweep.
std::pair<double, double> brute_accuracy(const Mat& scores,
                                         const std::vector<int>& label_pos,
                                         const std::vector<bool>& label_seen,
                                         const std::vector<bool>& cand_seen,
                                         double bias) {
  double sh = 0, st = 0, uh = 0, ut = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    double best_v = -1e300;
    for (Index c = 0; c < scores.cols(); ++c) {
      const double v = scores(i, c) + (cand_seen[c] ? 0.0 : bias);
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(c);
      }
    }
    if (label_seen[i]) {
      st += 1;
      sh += best == label_pos[i];
    } else {
      ut += 1;
      uh += best == label_pos[i];
    }
  }
  return {sh / st, uh / ut};
}

Mat space_on_ray(const std::vector<double>& radii, int d) {
  Mat m(static_cast<Index>(radii.size()), d);
  m.setZero();
  for (std::size_t i = 0; i < radii.size(); ++i)
    m.row(static_cast<Index>(i)) =
        exp_map_origin(Vec(Vec::Unit(d, 0) * radii[i]), 1.0).tail(d);
  return m;
}

Taxonomy two_by_two() {
  Taxonomy t;
  t.states = {"sa", "sb"};
  t.objects = {"oa", "ob"};
  t.state_parent_vocab = {"sp"};
  t.object_parent_vocab = {"op"};
  t.state_parent = {0, 0};
  t.object_parent = {0, 0};
  t.compositions = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  t.splits.train_seen = {0, 1, 2, 3};
  return t;
}

}  // namespace

TEST_CASE("perfect classifier scores ones across the board") {
  // Images 0,1 seen-labeled; 2,3 unseen-labeled; margins are large enough
  // that the correct candidate survives every bias the sweep visits.
  Mat scores(4, 4);
  scores << 10, 0, 0, 0,
            0, 10, 0, 0,
            0, 0, 10, 0,
            0, 0, 0, 10;
  const std::vector<int> labels = {0, 1, 2, 3};
  const std::vector<bool> label_seen = {true, true, false, false};
  const std::vector<bool> cand_seen = {true, true, false, false};
  const EvalReport r = evaluate(scores, labels, label_seen, cand_seen);
  CHECK(r.seen_acc == 1.0);
  CHECK(r.unseen_acc == 1.0);
  CHECK(r.hm == 1.0);
  CHECK(r.auc == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("harmonic mean identity at the symmetric point") {
  // At bias 0 exactly one of two seen images and one of two unseen images
  // is classified correctly.
  Mat scores(4, 3);
  scores << 5, 0, 0,    // seen, correct (label 0)
            0, 5, 4.8,  // seen, labeled 2 -> wrong within seen
            0, 0.5, 1,  // unseen, correct (label 2)
            0, 4, 0.5;  // unseen, labeled 1 -> seen candidate 1 wins
  const std::vector<int> labels = {0, 2, 2, 2};
  const std::vector<bool> label_seen = {true, true, false, false};
  const std::vector<bool> cand_seen = {true, true, false};
  const EvalReport r = evaluate(scores, labels, label_seen, cand_seen);
  bool found = false;
  for (const auto& p : r.bias_curve)
    if (p[1] == 0.5 && p[2] == 0.5) found = true;
  CHECK(found);
  CHECK(r.hm >= 0.5);
}

TEST_CASE("sweep matches exhaustive enumeration on a hand-built matrix") {
  Mat scores(4, 3);
  scores << 1.0, 0.8, 0.2,
            0.3, 0.9, 0.7,
            0.1, 0.6, 0.65,
            0.5, 0.55, 0.4;
  const std::vector<int> labels = {0, 1, 2, 2};
  const std::vector<bool> label_seen = {true, true, false, false};
  const std::vector<bool> cand_seen = {true, true, false};
  const EvalReport r = evaluate(scores, labels, label_seen, cand_seen);

  double best_hm = 0.0;
  for (const auto& p : r.bias_curve) {
    const auto [sa, ua] =
        brute_accuracy(scores, labels, label_seen, cand_seen, p[0]);
    CHECK(p[1] == sa);
    CHECK(p[2] == ua);
    if (sa + ua > 0) best_hm = std::max(best_hm, 2 * sa * ua / (sa + ua));
  }
  CHECK(r.hm == doctest::Approx(best_hm));
  CHECK(r.seen_acc ==
        brute_accuracy(scores, labels, label_seen, cand_seen,
                       r.bias_curve.front()[0])
            .first);
  CHECK(r.unseen_acc ==
        brute_accuracy(scores, labels, label_seen, cand_seen,
                       r.bias_curve.back()[0])
            .second);

  // AUC equals the trapezoid over the emitted curve exactly.
  double auc = 0.0;
  for (std::size_t k = 0; k + 1 < r.bias_curve.size(); ++k)
    auc += (r.bias_curve[k][1] - r.bias_curve[k + 1][1]) * 0.5 *
           (r.bias_curve[k][2] + r.bias_curve[k + 1][2]);
  CHECK(r.auc == auc);
}

TEST_CASE("evaluate is invariant to increasing per-image transforms") {
  Rng rng(1);
  Mat scores = rng.normal_mat(6, 5, 1.0);
  const std::vector<int> labels = {0, 1, 2, 3, 4, 2};
  const std::vector<bool> label_seen = {true, true, true, false, false, false};
  const std::vector<bool> cand_seen = {true, true, true, false, false};
  const EvalReport base = evaluate(scores, labels, label_seen, cand_seen);

  // Rank-preserving map applied uniformly at fixed bias 0: strictly
  // increasing affine map with the same scale for every image keeps the
  // ordering of biased scores intact at rescaled grid points.
  Mat warped = 2.0 * scores;
  warped.array() += 3.0;
  const EvalReport moved = evaluate(warped, labels, label_seen, cand_seen);
  CHECK(base.seen_acc == moved.seen_acc);
  CHECK(base.unseen_acc == moved.unseen_acc);
  CHECK(base.hm == doctest::Approx(moved.hm));
  CHECK(base.auc == doctest::Approx(moved.auc));
}

TEST_CASE("evaluate validates its inputs") {
  Mat scores(2, 2);
  scores << 1, 0, 0, 1;
  CHECK_THROWS_WITH_AS(
      evaluate(scores, {0, 1}, {true, true}, {true, false}),
      doctest::Contains("empty unseen"), DataError);
  CHECK_THROWS_WITH_AS(
      evaluate(scores, {0, 1}, {true, false}, {true, true}),
      doctest::Contains("seen and unseen"), DataError);
}

TEST_CASE("hierarchy report: containment, degenerate origin, brute force") {
  const Taxonomy tax = two_by_two();
  const int d = 4;
  ConeConfig cfg;

  TextTables good;
  good.sp = space_on_ray({0.4}, d);
  good.op = space_on_ray({0.45}, d);
  good.s = space_on_ray({1.0, 1.1}, d);
  good.o = space_on_ray({0.95, 1.05}, d);
  good.c = space_on_ray({2.0, 2.1, 2.2, 2.3}, d);
  const HierarchyReport ok = hierarchy_report(good, tax, 1.0, cfg);
  CHECK(ok.cone_violation_rate == 0.0);
  CHECK(ok.norm_stats.at("state_parents").mean <
        ok.norm_stats.at("states").mean);
  CHECK(ok.norm_stats.at("states").mean <
        ok.norm_stats.at("compositions").mean);

  TextTables origin;
  origin.sp = Mat::Zero(1, d);
  origin.op = Mat::Zero(1, d);
  origin.s = Mat::Zero(2, d);
  origin.o = Mat::Zero(2, d);
  origin.c = Mat::Zero(4, d);
  const HierarchyReport degen = hierarchy_report(origin, tax, 1.0, cfg);
  CHECK(degen.cone_violation_rate == 1.0);
  CHECK(degen.norm_stats.at("compositions").mean == 0.0);

  Rng rng(2);
  TextTables rnd;
  auto rand_space = [&](int n) {
    Mat m(n, d);
    for (int i = 0; i < n; ++i) {
      Vec x(d);
      for (int k = 0; k < d; ++k) x(k) = rng.normal();
      m.row(i) = exp_map_origin(Vec(rng.uniform(0.3, 1.5) * x / x.norm()), 1.0)
                     .tail(d);
    }
    return m;
  };
  rnd.sp = rand_space(1);
  rnd.op = rand_space(1);
  rnd.s = rand_space(2);
  rnd.o = rand_space(2);
  rnd.c = rand_space(4);
  const HierarchyReport rep = hierarchy_report(rnd, tax, 1.0, cfg);

  auto full = [&](const Mat& m, int i) {
    Vec p(d + 1);
    p(0) = std::sqrt(m.row(i).squaredNorm() + 1.0);
    p.tail(d) = m.row(i);
    return p;
  };
  int violated = 0, total = 0;
  for (int c = 0; c < 4; ++c) {
    violated +=
        entailment_penalty(full(rnd.s, tax.compositions[c].first),
                           full(rnd.c, c), 1.0, cfg) > 1e-3;
    violated +=
        entailment_penalty(full(rnd.o, tax.compositions[c].second),
                           full(rnd.c, c), 1.0, cfg) > 1e-3;
    total += 2;
  }
  for (int s = 0; s < 2; ++s, ++total)
    violated += entailment_penalty(full(rnd.sp, 0), full(rnd.s, s), 1.0, cfg) >
                1e-3;
  for (int o = 0; o < 2; ++o, ++total)
    violated += entailment_penalty(full(rnd.op, 0), full(rnd.o, o), 1.0, cfg) >
                1e-3;
  CHECK(rep.cone_violation_rate ==
        doctest::Approx(static_cast<double>(violated) / total));
}

TEST_CASE("single-edge tree embeds with unit distortion in both geometries") {
  DistortionSpec spec;
  spec.branching = 1;
  spec.depth = 1;
  spec.dim = 4;
  spec.steps = 200;
  spec.geometry = DistortionGeometry::kHyperbolic;
  CHECK(tree_distortion_report(spec, 1) == doctest::Approx(1.0).epsilon(1e-2));
  spec.geometry = DistortionGeometry::kEuclidean;
  CHECK(tree_distortion_report(spec, 1) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("distortion is at least one and deterministic in the seed") {
  DistortionSpec spec;
  spec.branching = 2;
  spec.depth = 2;
  spec.dim = 6;
  spec.steps = 120;
  const double a = tree_distortion_report(spec, 7);
  const double b = tree_distortion_report(spec, 7);
  CHECK(a == b);
  CHECK(a >= 1.0);
  spec.geometry = DistortionGeometry::kEuclidean;
  CHECK(tree_distortion_report(spec, 7) >= 1.0);
}
