#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hycomp/cones.hpp"
#include "hycomp/geometry_ad.hpp"
#include "hycomp/rng.hpp"

using namespace hycomp;

namespace {

using VecLD = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Extended-precision oracle for the exterior angle at the parent.
long double angle_oracle(const VecLD& p, const VecLD& q, long double kappa) {
  long double ip = -p(0) * q(0);
  for (Eigen::Index i = 1; i < p.size(); ++i) ip += p(i) * q(i);
  const long double kip = kappa * ip;
  const long double num = q(0) + p(0) * kip;
  const long double den =
      p.tail(p.size() - 1).norm() * std::sqrt(kip * kip - 1.0L);
  long double c = num / den;
  if (c > 1.0L) c = 1.0L;
  if (c < -1.0L) c = -1.0L;
  return std::acos(c);
}

Vec on_ray(double radius, int d, double kappa) {
  Vec x = Vec::Zero(d);
  x(0) = radius;
  return exp_map_origin(x, kappa);
}

Vec random_point(Rng& rng, int d, double kappa, double scale) {
  Vec x(d);
  for (int i = 0; i < d; ++i) x(i) = scale * rng.normal();
  return exp_map_origin(x, kappa);
}

}  // namespace

TEST_CASE("half aperture boundary, closed form, monotonicity") {
  ConeConfig cfg;
  const auto at_norm = [&](double n) {
    Vec p(3);
    p.tail(2) << n, 0.0;
    p(0) = std::sqrt(p.tail(2).squaredNorm() + 1.0);
    return half_aperture(p, 1.0, cfg);
  };
  CHECK(at_norm(0.2) == doctest::Approx(M_PI / 2).epsilon(1e-5));
  CHECK(at_norm(2.0) == doctest::Approx(std::asin(0.1)).epsilon(1e-12));
  double prev = at_norm(0.21);
  for (double n = 0.3; n < 5.0; n += 0.1) {
    const double cur = at_norm(n);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("exterior angle on collinear constructions") {
  for (double kappa : {0.5, 1.0, 2.0}) {
    const Vec parent = on_ray(0.8, 4, kappa);
    const Vec child = on_ray(1.7, 4, kappa);
    CHECK(exterior_angle(parent, child, kappa) ==
          doctest::Approx(0.0).epsilon(1e-6));
    // Reversed roles: the "child" sits nearer the origin on the same ray.
    CHECK(exterior_angle(child, parent, kappa) ==
          doctest::Approx(M_PI).epsilon(1e-6));
  }
}

TEST_CASE("exterior angle degenerate pair reports zero") {
  const Vec p = on_ray(0.9, 3, 1.0);
  CHECK(exterior_angle(p, p, 1.0) == 0.0);
}

TEST_CASE("exterior angle matches extended-precision oracle") {
  Rng rng(7);
  for (int it = 0; it < 300; ++it) {
    const double kappa = std::exp(rng.uniform(-1.0, 1.0));
    const Vec p = random_point(rng, 6, kappa, 0.8);
    const Vec q = random_point(rng, 6, kappa, 0.8);
    const long double want = angle_oracle(p.cast<long double>(),
                                          q.cast<long double>(),
                                          static_cast<long double>(kappa));
    CHECK(exterior_angle(p, q, kappa) ==
          doctest::Approx(static_cast<double>(want)).epsilon(1e-8));
  }
}

TEST_CASE("entailment penalty on-ray containment and inversion") {
  ConeConfig cfg;
  for (double kappa : {0.7, 1.0, 1.8}) {
    const Vec parent = on_ray(0.9, 4, kappa);
    const Vec child = on_ray(2.1, 4, kappa);
    CHECK(entailment_penalty(parent, child, kappa, cfg) == 0.0);

    const double pen = entailment_penalty(child, parent, kappa, cfg);
    CHECK(pen ==
          doctest::Approx(M_PI - half_aperture(child, kappa, cfg)).epsilon(1e-6));
    CHECK(pen > 1.0);
  }
}

TEST_CASE("penalty stays within [0, pi]") {
  Rng rng(8);
  ConeConfig cfg;
  for (int it = 0; it < 500; ++it) {
    const double kappa = std::exp(rng.uniform(-1.0, 1.0));
    const Vec p = random_point(rng, 5, kappa, 1.0);
    const Vec q = random_point(rng, 5, kappa, 1.0);
    const double pen = entailment_penalty(p, q, kappa, cfg);
    CHECK(pen >= 0.0);
    CHECK(pen <= M_PI);
  }
}

TEST_CASE("tape cone penalty agrees with the plain implementation") {
  Rng rng(9);
  ConeConfig cfg;
  const int n = 40, d = 6;
  const double kappa = 1.3;
  Mat parents(n, d), children(n, d);
  for (int i = 0; i < n; ++i) {
    Vec p = random_point(rng, d, kappa, 0.9);
    Vec q = random_point(rng, d, kappa, 0.9);
    parents.row(i) = p.tail(d);
    children.row(i) = q.tail(d);
  }
  ad::Tape t;
  Mat lk(1, 1);
  lk(0, 0) = std::log(kappa);
  ad::GeomCtx g = ad::make_geom_ctx(t, t.leaf(lk), ad::Geometry::kHyperbolic);
  ad::Var pen = ad::cone_penalty_rows(g, t.leaf(parents), t.leaf(children),
                                      cfg.gamma, cfg.min_parent_norm);
  for (int i = 0; i < n; ++i) {
    Vec p(d + 1), q(d + 1);
    p(0) = std::sqrt(parents.row(i).squaredNorm() + 1.0 / kappa);
    p.tail(d) = parents.row(i);
    q(0) = std::sqrt(children.row(i).squaredNorm() + 1.0 / kappa);
    q.tail(d) = children.row(i);
    CHECK(t.val(pen)(i, 0) ==
          doctest::Approx(entailment_penalty(p, q, kappa, cfg)).epsilon(1e-10));
  }
}
