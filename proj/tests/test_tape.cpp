#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "doctest.h"
#include "hycomp/geometry_ad.hpp"
#include "hycomp/lorentz.hpp"
#include "hycomp/rng.hpp"
#include "hycomp/tape.hpp"

using namespace hycomp;
using ad::Tape;
using ad::Var;

namespace {

using Builder = std::function<Var(Tape&, std::vector<Var>&)>;

double eval_scalar(const Builder& build, const std::vector<Mat>& inputs) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.leaf(m));
  return t.val(build(t, vars))(0, 0);
}

// Central finite differences on every input entry.
void check_grads(const Builder& build, std::vector<Mat> inputs,
                 double tol = 1e-6, double h = 1e-6) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.leaf(m));
  Var loss = build(t, vars);
  t.backward(loss);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Mat analytic = t.grad(vars[k]);
    for (Index i = 0; i < inputs[k].rows(); ++i) {
      for (Index j = 0; j < inputs[k].cols(); ++j) {
        const double orig = inputs[k](i, j);
        inputs[k](i, j) = orig + h;
        const double up = eval_scalar(build, inputs);
        inputs[k](i, j) = orig - h;
        const double dn = eval_scalar(build, inputs);
        inputs[k](i, j) = orig;
        const double fd = (up - dn) / (2.0 * h);
        const double denom =
            std::max({std::abs(fd), std::abs(analytic(i, j)), 1.0});
        CHECK(std::abs(fd - analytic(i, j)) / denom <= tol);
      }
    }
  }
}

Mat rand_mat(Rng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
  return rng.uniform_mat(r, c, lo, hi);
}

}  // namespace

TEST_CASE("arithmetic and matmul gradients") {
  Rng rng(1);
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.mean_all(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
      },
      {rand_mat(rng, 3, 4), rand_mat(rng, 3, 4)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.matmul(v[0], v[1]));
      },
      {rand_mat(rng, 3, 4), rand_mat(rng, 4, 2)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.mul(t.matmul_nt(v[0], v[1]), t.matmul_nt(v[0], v[1])));
      },
      {rand_mat(rng, 3, 4), rand_mat(rng, 5, 4)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.matmul_tn(v[0], v[1]));
      },
      {rand_mat(rng, 4, 3), rand_mat(rng, 4, 2)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.matmul(t.transpose(v[0]), v[0]));
      },
      {rand_mat(rng, 3, 4)});
}

TEST_CASE("broadcast gradients") {
  Rng rng(2);
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.mul_cols(v[0], v[1]));
      },
      {rand_mat(rng, 4, 3), rand_mat(rng, 4, 1)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.mean_all(t.mul(t.add_cols(v[0], v[1]), v[0]));
      },
      {rand_mat(rng, 4, 3), rand_mat(rng, 4, 1)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.mean_all(t.mul(t.add_row(v[0], v[1]), v[0]));
      },
      {rand_mat(rng, 4, 3), rand_mat(rng, 1, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.add_scalar(t.mul_scalar(v[0], v[1]), v[2]));
      },
      {rand_mat(rng, 4, 3), rand_mat(rng, 1, 1), rand_mat(rng, 1, 1)});
}

TEST_CASE("elementwise nonlinearity gradients") {
  Rng rng(3);
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.relu(v[0]));
      },
      {rand_mat(rng, 4, 4, 0.2, 1.5)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.log(t.exp(v[0])));
      },
      {rand_mat(rng, 3, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.sqrt(v[0]));
      },
      {rand_mat(rng, 3, 3, 0.5, 2.0)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.mul(t.cosh(v[0]), t.sinh(v[0])));
      },
      {rand_mat(rng, 3, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.sinhc(v[0]));
      },
      {rand_mat(rng, 3, 3, 0.5, 2.0)});
  // series branch near zero
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.sinhc(v[0]));
      },
      {rand_mat(rng, 2, 2, 1e-6, 5e-5)}, 1e-5);
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.recip(v[0]));
      },
      {rand_mat(rng, 3, 3, 0.5, 2.0)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.pow_const(v[0], 2.5));
      },
      {rand_mat(rng, 3, 3, 0.2, 2.0)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.acosh_min1(v[0]));
      },
      {rand_mat(rng, 3, 3, 1.2, 3.0)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.acos_clamped(v[0]));
      },
      {rand_mat(rng, 3, 3, -0.8, 0.8)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.asin_clamped(v[0]));
      },
      {rand_mat(rng, 3, 3, -0.8, 0.8)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.add(t.max_const(v[0], 0.3), t.min_const(v[0], 0.7)));
      },
      {rand_mat(rng, 4, 4, 0.8, 2.0)});
}

TEST_CASE("reduction and shaping gradients") {
  Rng rng(4);
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.mul(t.rowwise_sum(v[0]), t.rowwise_sqnorm(v[0])));
      },
      {rand_mat(rng, 4, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.colwise_sum(v[0]));
      },
      {rand_mat(rng, 4, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.rowwise_norm(v[0]));
      },
      {rand_mat(rng, 4, 3, 0.3, 1.0)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        return t.sum_all(t.rowwise_dot(v[0], v[1]));
      },
      {rand_mat(rng, 4, 3), rand_mat(rng, 4, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        Var g = t.gather_rows(v[0], {2, 0, 2, 1});
        return t.sum_all(t.mul(g, g));
      },
      {rand_mat(rng, 3, 3)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        Var c = t.concat_rows({v[0], v[1]});
        Var s = t.slice_cols(c, 1, 2);
        return t.sum_all(t.mul(s, s));
      },
      {rand_mat(rng, 2, 4), rand_mat(rng, 3, 4)});
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        Var c = t.concat_cols({v[0], v[1]});
        return t.sum_all(t.mul(c, c));
      },
      {rand_mat(rng, 3, 2), rand_mat(rng, 3, 3)});
}

TEST_CASE("stabilized log-sum-exp gradient is exact despite detached max") {
  Rng rng(5);
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        Var m = t.rowwise_max_detached(v[0]);
        Var sh = t.add_cols(v[0], t.scale(m, -1.0));
        Var lse = t.add(t.log(t.rowwise_sum(t.exp(sh))), m);
        return t.mean_all(lse);
      },
      {rand_mat(rng, 4, 5, -2.0, 2.0)});
}

TEST_CASE("tape geometry matches the plain manifold functions") {
  Rng rng(6);
  const int n = 20, d = 5;
  const double kappa = 1.4;
  Mat tangents = rng.normal_mat(n, d, 0.7);

  Tape t;
  Mat lk(1, 1);
  lk(0, 0) = std::log(kappa);
  ad::GeomCtx g = ad::make_geom_ctx(t, t.leaf(lk), ad::Geometry::kHyperbolic);
  Var x = t.leaf(tangents);
  Var space = ad::exp_map0(g, x);
  Var back = ad::log_map0(g, space);
  Var times = ad::time_col(g, space);

  for (int i = 0; i < n; ++i) {
    const Vec p = exp_map_origin(Vec(tangents.row(i).transpose()), kappa);
    CHECK((t.val(space).row(i).transpose() - p.tail(d)).norm() <= 1e-12);
    CHECK(t.val(times)(i, 0) == doctest::Approx(p(0)).epsilon(1e-12));
    CHECK((t.val(back).row(i) - tangents.row(i)).norm() <= 1e-9);
  }

  Mat tangents2 = rng.normal_mat(n, d, 0.7);
  Var y = ad::exp_map0(g, t.leaf(tangents2));
  Var dist = ad::distance_rows(g, space, y);
  Var mob = ad::mobius_add_rows(g, space, y);
  for (int i = 0; i < n; ++i) {
    const Vec p = exp_map_origin(Vec(tangents.row(i).transpose()), kappa);
    const Vec q = exp_map_origin(Vec(tangents2.row(i).transpose()), kappa);
    CHECK(t.val(dist)(i, 0) ==
          doctest::Approx(geodesic_distance(p, q, kappa)).epsilon(1e-9));
    const Vec m = mobius_add(p, q, kappa);
    CHECK((t.val(mob).row(i).transpose() - m.tail(d)).norm() <=
          1e-9 * (1.0 + m.norm()));
  }
}

TEST_CASE("geometry gradients flow through curvature") {
  Rng rng(7);
  Mat tangents = rng.normal_mat(4, 3, 0.6);
  Mat tangents2 = rng.normal_mat(4, 3, 0.6);
  Mat lk(1, 1);
  lk(0, 0) = 0.2;
  check_grads(
      [](Tape& t, std::vector<Var>& v) {
        ad::GeomCtx g = ad::make_geom_ctx(t, v[2], ad::Geometry::kHyperbolic);
        Var a = ad::exp_map0(g, v[0]);
        Var b = ad::exp_map0(g, v[1]);
        Var m = ad::mobius_add_rows(g, a, b);
        Var dist = ad::distance_rows(g, a, b);
        return t.mean_all(t.add(t.rowwise_sqnorm(m), dist));
      },
      {tangents, tangents2, lk}, 1e-5);
}
