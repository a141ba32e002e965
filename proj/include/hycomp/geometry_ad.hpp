#pragma once

#include "hycomp/tape.hpp"

// Differentiable Lorentz-model operations. Every point batch is carried as
// its space-like components [n x d]; the time-like column is recomputed from
// the hyperboloid constraint wherever it is needed, so batches stay on the
// manifold by construction and gradients flow through the curvature.

namespace hycomp::ad {

enum class Geometry { kHyperbolic, kEuclidean };

struct GeomCtx {
  Tape* tape = nullptr;
  Geometry geometry = Geometry::kHyperbolic;
  Var kappa;       // 1x1
  Var inv_kappa;   // 1x1
  Var sqrt_kappa;  // 1x1
  Var rsqrt_kappa; // 1x1

  bool hyperbolic() const { return geometry == Geometry::kHyperbolic; }
};

inline GeomCtx make_geom_ctx(Tape& t, Var log_kappa, Geometry g) {
  GeomCtx c;
  c.tape = &t;
  c.geometry = g;
  if (g == Geometry::kHyperbolic) {
    c.kappa = t.exp(log_kappa);
    c.inv_kappa = t.recip(c.kappa);
    c.sqrt_kappa = t.sqrt(c.kappa);
    c.rsqrt_kappa = t.recip(c.sqrt_kappa);
  }
  return c;
}

// [n x 1] time column for on-manifold space components.
inline Var time_col(const GeomCtx& g, Var space) {
  Tape& t = *g.tape;
  return t.sqrt(t.add_scalar(t.rowwise_sqnorm(space), g.inv_kappa));
}

// Tangent vectors at the origin -> space components of exp-mapped points.
// In Euclidean mode the map is the identity.
inline Var exp_map0(const GeomCtx& g, Var x) {
  if (!g.hyperbolic()) return x;
  Tape& t = *g.tape;
  Var r = t.mul_scalar(t.rowwise_norm(x), g.sqrt_kappa);
  return t.mul_cols(x, t.sinhc(r));
}

inline Var log_map0(const GeomCtx& g, Var space) {
  if (!g.hyperbolic()) return space;
  Tape& t = *g.tape;
  Var r = t.acosh_min1(t.mul_scalar(time_col(g, space), g.sqrt_kappa));
  return t.mul_cols(space, t.recip(t.sinhc(r)));
}

// Row-aligned Lorentz inner products of two on-manifold batches.
inline Var lorentz_inner_rows(const GeomCtx& g, Var a, Var b) {
  Tape& t = *g.tape;
  return t.sub(t.rowwise_dot(a, b), t.mul(time_col(g, a), time_col(g, b)));
}

// All-pairs inner products: [na x d], [nb x d] -> [na x nb].
inline Var lorentz_inner_cross(const GeomCtx& g, Var a, Var b) {
  Tape& t = *g.tape;
  return t.sub(t.matmul_nt(a, b), t.matmul_nt(time_col(g, a), time_col(g, b)));
}

inline Var distance_rows(const GeomCtx& g, Var a, Var b) {
  Tape& t = *g.tape;
  if (!g.hyperbolic()) {
    Var d = t.sub(a, b);
    return t.rowwise_norm(d);
  }
  Var arg = t.scale(t.mul_scalar(lorentz_inner_rows(g, a, b), g.kappa), -1.0);
  return t.mul_scalar(t.acosh_min1(arg), g.rsqrt_kappa);
}

inline Var distance_cross(const GeomCtx& g, Var a, Var b) {
  Tape& t = *g.tape;
  if (!g.hyperbolic()) {
    // sqrt(|a|^2 - 2 a.b + |b|^2), guarded against cancellation below zero
    Var sq = t.add_cols(t.scale(t.matmul_nt(a, b), -2.0), t.rowwise_sqnorm(a));
    sq = t.add_row(sq, t.transpose(t.rowwise_sqnorm(b)));
    return t.sqrt(t.add_const(t.max_const(sq, 0.0), 1e-24));
  }
  Var arg = t.scale(t.mul_scalar(lorentz_inner_cross(g, a, b), g.kappa), -1.0);
  return t.mul_scalar(t.acosh_min1(arg), g.rsqrt_kappa);
}

// Hyperboloid -> Poincare ball (space components in, ball coordinates out).
inline Var to_poincare(const GeomCtx& g, Var space) {
  Tape& t = *g.tape;
  Var den = t.add_const(t.mul_scalar(time_col(g, space), g.sqrt_kappa), 1.0);
  return t.mul_cols(space, t.recip(den));
}

inline Var from_poincare(const GeomCtx& g, Var y) {
  Tape& t = *g.tape;
  Var den = t.add_const(t.scale(t.mul_scalar(t.rowwise_sqnorm(y), g.kappa), -1.0), 1.0);
  return t.scale(t.mul_cols(y, t.recip(den)), 2.0);
}

// Rowwise Mobius addition of two on-manifold batches, through the ball.
inline Var mobius_add_rows(const GeomCtx& g, Var p, Var q) {
  Tape& t = *g.tape;
  if (!g.hyperbolic()) return t.add(p, q);
  Var u = to_poincare(g, p);
  Var v = to_poincare(g, q);
  Var uv = t.mul_scalar(t.rowwise_dot(u, v), g.kappa);   // kappa <u,v>
  Var u2 = t.mul_scalar(t.rowwise_sqnorm(u), g.kappa);   // kappa |u|^2
  Var v2 = t.mul_scalar(t.rowwise_sqnorm(v), g.kappa);   // kappa |v|^2
  Var a = t.add_const(t.add(t.scale(uv, 2.0), v2), 1.0);
  Var b = t.add_const(t.scale(u2, -1.0), 1.0);
  Var den = t.add_const(t.add(t.scale(uv, 2.0), t.mul(u2, v2)), 1.0);
  Var num = t.add(t.mul_cols(u, a), t.mul_cols(v, b));
  return from_poincare(g, t.mul_cols(num, t.recip(den)));
}

// lambda-scaling of a point in the tangent space at the origin.
inline Var scale_tangent(const GeomCtx& g, Var space, Var lam) {
  Tape& t = *g.tape;
  if (!g.hyperbolic()) return t.mul_scalar(space, lam);
  return exp_map0(g, t.mul_scalar(log_map0(g, space), lam));
}

// Rowwise entailment-cone penalty max(0, alpha(p, q) - omega(p)).
inline Var cone_penalty_rows(const GeomCtx& g, Var parent, Var child,
                             double gamma, double min_parent_norm) {
  Tape& t = *g.tape;
  Var kip = t.mul_scalar(lorentz_inner_rows(g, parent, child), g.kappa);
  Var s = t.sqrt(t.max_const(t.add_const(t.mul(kip, kip), -1.0), 1e-18));
  Var pn = t.rowwise_norm(parent);
  Var num = t.add(time_col(g, child), t.mul(time_col(g, parent), kip));
  Var den = t.max_const(t.mul(pn, s), 1e-15);
  Var alpha = t.acos_clamped(t.mul(num, t.recip(den)));
  Var ap_arg = t.scale(
      t.recip(t.mul_scalar(t.max_const(pn, min_parent_norm), g.sqrt_kappa)),
      2.0 * gamma);
  Var omega = t.asin_clamped(ap_arg);
  return t.relu(t.sub(alpha, omega));
}

}  // namespace hycomp::ad
