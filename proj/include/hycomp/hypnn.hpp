#pragma once

#include <stdexcept>
#include <vector>

#include "hycomp/geometry_ad.hpp"
#include "hycomp/lorentz.hpp"

// Hyperbolic neural blocks. The differentiable versions operate on space
// components through the tape; thin wrappers below evaluate single points
// for callers that work with full (d+1)-vectors.

namespace hycomp {

struct HfcWeights {
  Mat w;  // [d_out x d_in]
  Mat b;  // [1 x d_out]
};

struct AttentionConfig {
  int heads = 12;
  double power_p = 2.0;
  double scale_t = 1.0;       // initial value of the learnable scale
  double fusion_lambda = 0.1; // initial value of the learnable fusion weight
  double epsilon = 1e-6;      // attention denominator guard
};

struct HcaWeights {
  HfcWeights q, k, v, out, ffn1, ffn2;
};

namespace ad {

struct HfcVars {
  Var w, b;
};

struct HcaVars {
  HfcVars q, k, v, out, ffn1, ffn2;
};

struct AttnCtx {
  int heads = 1;
  double power_p = 2.0;
  double epsilon = 1e-6;
  Var scale_t;  // 1x1, positive
};

// HFC(x) = [sqrt(|Wx+b|^2 + 1/kappa), Wx+b]; only the space part is carried.
inline Var hfc(const GeomCtx& g, Var x_space, const HfcVars& w) {
  Tape& t = *g.tape;
  return t.add_row(t.matmul_nt(x_space, w.w), w.b);
}

// phi(x) = (|x_bar| / |x_bar^p|) x_bar^p with x_bar = relu(x)/t.
inline Var phi(Tape& t, Var x, double p, Var scale_t) {
  Var xb = t.mul_scalar(t.relu(x), t.recip(scale_t));
  if (p == 1.0) return xb;
  Var xp = t.pow_const(xb, p);
  Var coef = t.mul(t.rowwise_norm(xb), t.recip(t.rowwise_norm(xp)));
  return t.mul_cols(xp, coef);
}

// Softmax-free linear attention over space components, per head.
inline Var linear_attention(Tape& t, Var q_sp, Var k_sp, Var v_sp,
                            const AttnCtx& a) {
  const Eigen::Index d = t.val(q_sp).cols();
  if (d % a.heads != 0)
    throw std::invalid_argument("linear_attention: heads must divide dim");
  const Eigen::Index dh = d / a.heads;
  std::vector<Var> outs;
  outs.reserve(a.heads);
  for (int h = 0; h < a.heads; ++h) {
    Var q = t.slice_cols(q_sp, h * dh, dh);
    Var k = t.slice_cols(k_sp, h * dh, dh);
    Var v = t.slice_cols(v_sp, h * dh, dh);
    Var pq = phi(t, q, a.power_p, a.scale_t);
    Var pk = phi(t, k, a.power_p, a.scale_t);
    Var num = t.matmul(pq, t.matmul_tn(pk, v));
    Var den = t.add_const(t.matmul_nt(pq, t.colwise_sum(pk)), a.epsilon);
    outs.push_back(t.mul_cols(num, t.recip(den)));
  }
  return a.heads == 1 ? outs[0] : t.concat_cols(outs);
}

inline Var mha(const GeomCtx& g, Var q_space, Var k_space, Var v_space,
               const HcaVars& w, const AttnCtx& a) {
  Var q = hfc(g, q_space, w.q);
  Var k = hfc(g, k_space, w.k);
  Var v = hfc(g, v_space, w.v);
  Var z = linear_attention(*g.tape, q, k, v, a);
  return hfc(g, z, w.out);
}

inline Var ffn(const GeomCtx& g, Var x_space, const HcaVars& w) {
  Tape& t = *g.tape;
  return hfc(g, t.relu(hfc(g, x_space, w.ffn1)), w.ffn2);
}

// HCA(q, K, V) = q (+) FFN(MHA(q, K, V)), all rows of q against one shared
// key/value set.
inline Var hca(const GeomCtx& g, Var q_space, Var kv_space, const HcaVars& w,
               const AttnCtx& a) {
  return mobius_add_rows(
      g, q_space, ffn(g, mha(g, q_space, kv_space, kv_space, w, a), w));
}

// t' = t (+) lambda * HCA(t, V, V); lambda scales in the tangent space at
// the origin.
inline Var refine(const GeomCtx& g, Var t_space, Var kv_space,
                  const HcaVars& w, const AttnCtx& a, Var lambda) {
  Var branch = hca(g, t_space, kv_space, w, a);
  return mobius_add_rows(g, t_space, scale_tangent(g, branch, lambda));
}

inline HfcVars bind(Tape& t, const HfcWeights& w) {
  return HfcVars{t.leaf(w.w), t.leaf(w.b)};
}

inline HcaVars bind(Tape& t, const HcaWeights& w) {
  return HcaVars{bind(t, w.q),   bind(t, w.k),    bind(t, w.v),
                 bind(t, w.out), bind(t, w.ffn1), bind(t, w.ffn2)};
}

}  // namespace ad

namespace detail {

inline ad::GeomCtx plain_ctx(ad::Tape& t, double kappa) {
  Mat lk(1, 1);
  lk(0, 0) = std::log(kappa);
  return ad::make_geom_ctx(t, t.leaf(lk), ad::Geometry::kHyperbolic);
}

inline ad::AttnCtx plain_attn(ad::Tape& t, const AttentionConfig& cfg) {
  Mat st(1, 1);
  st(0, 0) = cfg.scale_t;
  return ad::AttnCtx{cfg.heads, cfg.power_p, cfg.epsilon, t.leaf(st)};
}

inline Vec with_time(const Mat& space_row, double kappa) {
  Vec p(space_row.cols() + 1);
  p(0) = std::sqrt(space_row.squaredNorm() + 1.0 / kappa);
  p.tail(space_row.cols()) = space_row.row(0);
  return p;
}

}  // namespace detail

inline Vec hfc_linear(const Vec& p, const HfcWeights& w, double kappa) {
  if (w.w.cols() != p.size() - 1)
    throw std::invalid_argument("hfc_linear: shape mismatch");
  Mat space = (w.w * p.tail(p.size() - 1) + w.b.transpose()).transpose();
  return detail::with_time(space, kappa);
}

inline Vec phi_map(const Vec& x, double p, double t) {
  Vec xb = (x.cwiseMax(0.0)) / t;
  if (p == 1.0) return xb;
  const double nb = xb.norm();
  if (nb == 0.0) return Vec::Zero(x.size());
  Vec xp = xb.array().pow(p);
  return (nb / xp.norm()) * xp;
}

inline Mat hyp_linear_attention(const Mat& q_sp, const Mat& k_sp,
                                const Mat& v_sp, const AttentionConfig& cfg) {
  ad::Tape t;
  ad::AttnCtx a = detail::plain_attn(t, cfg);
  return t.val(ad::linear_attention(t, t.leaf(q_sp), t.leaf(k_sp),
                                    t.leaf(v_sp), a));
}

// Key/value sequences hold one full (d+1)-point per row.
inline Vec mha_lorentz(const Vec& q, const Mat& keys, const Mat& values,
                       const HcaWeights& w, const AttentionConfig& cfg,
                       double kappa) {
  ad::Tape t;
  ad::GeomCtx g = detail::plain_ctx(t, kappa);
  ad::AttnCtx a = detail::plain_attn(t, cfg);
  Mat q_sp = q.tail(q.size() - 1).transpose();
  Mat k_sp = keys.rightCols(keys.cols() - 1);
  Mat v_sp = values.rightCols(values.cols() - 1);
  ad::Var out = ad::mha(g, t.leaf(q_sp), t.leaf(k_sp), t.leaf(v_sp),
                        ad::bind(t, w), a);
  return detail::with_time(t.val(out), kappa);
}

inline Vec hca(const Vec& q, const Mat& patches, const HcaWeights& w,
               const AttentionConfig& cfg, double kappa) {
  if (patches.rows() == 0) throw std::invalid_argument("hca: empty patches");
  ad::Tape t;
  ad::GeomCtx g = detail::plain_ctx(t, kappa);
  ad::AttnCtx a = detail::plain_attn(t, cfg);
  Mat q_sp = q.tail(q.size() - 1).transpose();
  Mat kv_sp = patches.rightCols(patches.cols() - 1);
  ad::Var out = ad::hca(g, t.leaf(q_sp), t.leaf(kv_sp), ad::bind(t, w), a);
  return detail::with_time(t.val(out), kappa);
}

inline Vec refine_text(const Vec& tq, const Mat& patches, const HcaWeights& w,
                       const AttentionConfig& cfg, double kappa) {
  if (patches.rows() == 0)
    throw std::invalid_argument("refine_text: empty patches");
  ad::Tape t;
  ad::GeomCtx g = detail::plain_ctx(t, kappa);
  ad::AttnCtx a = detail::plain_attn(t, cfg);
  Mat lam(1, 1);
  lam(0, 0) = cfg.fusion_lambda;
  Mat t_sp = tq.tail(tq.size() - 1).transpose();
  Mat kv_sp = patches.rightCols(patches.cols() - 1);
  ad::Var out = ad::refine(g, t.leaf(t_sp), t.leaf(kv_sp), ad::bind(t, w), a,
                           t.leaf(lam));
  return detail::with_time(t.val(out), kappa);
}

}  // namespace hycomp
