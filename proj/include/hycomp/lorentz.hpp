#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

// Lorentz (hyperboloid) model of hyperbolic space with curvature -kappa,
// kappa > 0. A point is a (d+1)-vector [p0, p~] with p0 > 0 and
// <p,p>_L = -p0^2 + |p~|^2 = -1/kappa. Free functions templated on the
// Eigen expression so they evaluate for double or long double alike.

namespace hycomp {

// sinh(x)/x, finite at 0.
template <class S>
S sinhc(S x) {
  if (std::abs(x) < S(1e-4)) {
    const S x2 = x * x;
    return S(1) + x2 / S(6) + x2 * x2 / S(120);
  }
  return std::sinh(x) / x;
}

template <class DA, class DB>
typename DA::Scalar lorentz_inner(const Eigen::MatrixBase<DA>& p,
                                  const Eigen::MatrixBase<DB>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("lorentz_inner: dimension mismatch");
  const auto n = p.size();
  return -p(0) * q(0) + p.tail(n - 1).dot(q.tail(n - 1));
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> lorentz_origin(Eigen::Index d, S kappa) {
  Eigen::Matrix<S, Eigen::Dynamic, 1> o =
      Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(d + 1);
  o(0) = S(1) / std::sqrt(kappa);
  return o;
}

// |<p,p>_L + 1/kappa|; zero on the manifold.
template <class D>
typename D::Scalar hyperboloid_residual(const Eigen::MatrixBase<D>& p,
                                        typename D::Scalar kappa) {
  return std::abs(lorentz_inner(p, p) + typename D::Scalar(1) / kappa);
}

template <class DA, class DB>
typename DA::Scalar geodesic_distance(const Eigen::MatrixBase<DA>& p,
                                      const Eigen::MatrixBase<DB>& q,
                                      typename DA::Scalar kappa) {
  using S = typename DA::Scalar;
  // arccosh amplifies rounding near 1, so identical inputs short-circuit.
  if (p.size() == q.size() && (p.derived().array() == q.derived().array()).all())
    return S(0);
  const S arg = std::max(S(1), -kappa * lorentz_inner(p, q));
  return std::acosh(arg) / std::sqrt(kappa);
}

// Tangent vectors at the origin are lifted as (0, x), so the Lorentz norm of
// the lift equals |x|.
template <class D>
Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, 1> exp_map_origin(
    const Eigen::MatrixBase<D>& x, typename D::Scalar kappa) {
  using S = typename D::Scalar;
  const S sk = std::sqrt(kappa);
  const S r = sk * x.norm();
  Eigen::Matrix<S, Eigen::Dynamic, 1> p(x.size() + 1);
  p(0) = std::cosh(r) / sk;
  p.tail(x.size()) = sinhc(r) * x;
  return p;
}

template <class D>
Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, 1> log_map_origin(
    const Eigen::MatrixBase<D>& p, typename D::Scalar kappa) {
  using S = typename D::Scalar;
  const S sk = std::sqrt(kappa);
  const S r = std::acosh(std::max(S(1), sk * p(0)));
  Eigen::Matrix<S, Eigen::Dynamic, 1> x = p.tail(p.size() - 1);
  x /= sinhc(r);
  return x;
}

// Hyperboloid <-> Poincare ball of radius 1/sqrt(kappa).
template <class D>
Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, 1> to_poincare(
    const Eigen::MatrixBase<D>& p, typename D::Scalar kappa) {
  using S = typename D::Scalar;
  const S sk = std::sqrt(kappa);
  return (p.tail(p.size() - 1) / (S(1) + sk * p(0))).eval();
}

template <class D>
Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, 1> from_poincare(
    const Eigen::MatrixBase<D>& y, typename D::Scalar kappa) {
  using S = typename D::Scalar;
  const S sk = std::sqrt(kappa);
  const S ks = kappa * y.squaredNorm();
  const S den = S(1) - ks;
  Eigen::Matrix<S, Eigen::Dynamic, 1> p(y.size() + 1);
  p(0) = (S(1) + ks) / (sk * den);
  p.tail(y.size()) = (S(2) / den) * y;
  return p;
}

template <class DA, class DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, 1> poincare_mobius_add(
    const Eigen::MatrixBase<DA>& u, const Eigen::MatrixBase<DB>& v,
    typename DA::Scalar kappa) {
  using S = typename DA::Scalar;
  const S uv = u.dot(v);
  const S u2 = u.squaredNorm();
  const S v2 = v.squaredNorm();
  const S a = S(1) + S(2) * kappa * uv + kappa * v2;
  const S b = S(1) - kappa * u2;
  const S den = S(1) + S(2) * kappa * uv + kappa * kappa * u2 * v2;
  return ((a * u + b * v) / den).eval();
}

template <class DA, class DB>
typename DA::Scalar poincare_distance(const Eigen::MatrixBase<DA>& u,
                                      const Eigen::MatrixBase<DB>& v,
                                      typename DA::Scalar kappa) {
  using S = typename DA::Scalar;
  const S sk = std::sqrt(kappa);
  const Eigen::Matrix<S, Eigen::Dynamic, 1> nu = -u;
  const S n = poincare_mobius_add(nu, v, kappa).norm();
  return S(2) / sk * std::atanh(std::min(sk * n, S(1) - S(1e-15)));
}

// Mobius addition of hyperboloid points via the ball isomorphism.
template <class DA, class DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, 1> mobius_add(
    const Eigen::MatrixBase<DA>& p, const Eigen::MatrixBase<DB>& q,
    typename DA::Scalar kappa) {
  return from_poincare(
      poincare_mobius_add(to_poincare(p, kappa), to_poincare(q, kappa), kappa),
      kappa);
}

}  // namespace hycomp
