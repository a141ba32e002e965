#pragma once

#include <algorithm>
#include <cmath>

#include "hycomp/lorentz.hpp"

// Entailment cones anchored at the origin. A parent p spans a cone of
// half-aperture omega(p); a child q is entailed when the exterior angle at
// the parent (between the origin direction and the child) stays within the
// aperture.

namespace hycomp {

struct ConeConfig {
  double gamma = 0.1;
  double min_parent_norm = 1e-6;
};

template <class D>
typename D::Scalar half_aperture(const Eigen::MatrixBase<D>& p,
                                 typename D::Scalar kappa,
                                 const ConeConfig& cfg = {}) {
  using S = typename D::Scalar;
  const S pn = std::max<S>(p.tail(p.size() - 1).norm(), S(cfg.min_parent_norm));
  const S arg =
      std::min<S>(S(2) * S(cfg.gamma) / (std::sqrt(kappa) * pn), S(1) - S(1e-12));
  return std::asin(arg);
}

// Exterior angle at the parent p subtended by child q. Degenerate p == q
// reports 0.
template <class DA, class DB>
typename DA::Scalar exterior_angle(const Eigen::MatrixBase<DA>& p,
                                   const Eigen::MatrixBase<DB>& q,
                                   typename DA::Scalar kappa) {
  using S = typename DA::Scalar;
  const S kip = kappa * lorentz_inner(p, q);  // <= -1 on the manifold
  const S s2 = kip * kip - S(1);
  if (s2 <= S(1e-15)) return S(0);
  const S pn = p.tail(p.size() - 1).norm();
  const S num = q(0) + p(0) * kip;
  const S den = std::max<S>(pn * std::sqrt(s2), S(1e-15));
  const S c = std::clamp<S>(num / den, S(-1), S(1));
  return std::acos(c);
}

template <class DA, class DB>
typename DA::Scalar entailment_penalty(const Eigen::MatrixBase<DA>& p,
                                       const Eigen::MatrixBase<DB>& q,
                                       typename DA::Scalar kappa,
                                       const ConeConfig& cfg = {}) {
  using S = typename DA::Scalar;
  return std::max<S>(S(0),
                     exterior_angle(p, q, kappa) - half_aperture(p, kappa, cfg));
}

}  // namespace hycomp
