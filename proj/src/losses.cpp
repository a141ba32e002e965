#include "hycomp/losses.hpp"

#include <cmath>

#include "hycomp/errors.hpp"

namespace hycomp {

double total_loss(const LossValues& parts, const LossWeights& w) {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v))
      throw NumericalError(std::string("total_loss: non-finite part ") + name);
  };
  check(parts.da, "L_DA");
  check(parts.te, "L_TE");
  check(parts.ls, "L_s");
  check(parts.lo, "L_o");
  return w.beta1 * parts.da + w.beta2 * parts.te + w.beta3 * (parts.ls + parts.lo);
}

namespace ad {

Var weighted_infonce(Tape& t, Var logits, const Mat& onehot,
                     const Mat& weights) {
  Var m = t.rowwise_max_detached(logits);
  Var shifted = t.add_cols(logits, t.scale(m, -1.0));
  Var den = t.rowwise_dot(t.exp(shifted), t.leaf(weights));
  Var pos = t.rowwise_dot(logits, t.leaf(onehot));
  Var per_item = t.sub(t.add(t.log(den), m), pos);
  return t.mean_all(per_item);
}

Var discriminative_alignment_loss(Tape& t, Var logits_comp,
                                  const std::vector<int>& label_pos,
                                  const HardNegativeIndex& hard_index,
                                  double hard_negative_w) {
  const Index B = t.val(logits_comp).rows();
  const Index C = t.val(logits_comp).cols();
  Mat onehot = Mat::Zero(B, C);
  Mat weights = Mat::Ones(B, C);
  for (Index i = 0; i < B; ++i) {
    onehot(i, label_pos[i]) = 1.0;
    for (int j : hard_index.per_composition[label_pos[i]])
      weights(i, j) = hard_negative_w;
  }
  return weighted_infonce(t, logits_comp, onehot, weights);
}

std::pair<Var, Var> primitive_losses(
    Tape& t, Var logits_state, Var logits_object,
    const std::vector<std::pair<int, int>>& labels) {
  const Index B = t.val(logits_state).rows();
  Mat onehot_s = Mat::Zero(B, t.val(logits_state).cols());
  Mat onehot_o = Mat::Zero(B, t.val(logits_object).cols());
  for (Index i = 0; i < B; ++i) {
    onehot_s(i, labels[i].first) = 1.0;
    onehot_o(i, labels[i].second) = 1.0;
  }
  Mat ones_s = Mat::Ones(B, t.val(logits_state).cols());
  Mat ones_o = Mat::Ones(B, t.val(logits_object).cols());
  return {weighted_infonce(t, logits_state, onehot_s, ones_s),
          weighted_infonce(t, logits_object, onehot_o, ones_o)};
}

Var taxonomic_entailment_loss(const GeomCtx& g, const ForwardResult& fwd,
                              double gamma, double min_parent_norm) {
  Tape& t = *g.tape;
  Var total = cone_penalty_rows(g, fwd.vs, fwd.vc, gamma, min_parent_norm);
  total = t.add(total,
                cone_penalty_rows(g, fwd.vo, fwd.vc, gamma, min_parent_norm));
  total = t.add(total, cone_penalty_rows(g, fwd.tl_state, fwd.tl_comp, gamma,
                                         min_parent_norm));
  total = t.add(total, cone_penalty_rows(g, fwd.tl_object, fwd.tl_comp, gamma,
                                         min_parent_norm));
  total = t.add(total, cone_penalty_rows(g, fwd.tl_sparent, fwd.tl_state, gamma,
                                         min_parent_norm));
  total = t.add(total, cone_penalty_rows(g, fwd.tl_oparent, fwd.tl_object,
                                         gamma, min_parent_norm));
  return t.mean_all(total);
}

LossVars compute_losses(Tape& t, const GeomCtx& g, const ForwardResult& fwd,
                        const std::vector<std::pair<int, int>>& labels,
                        const HardNegativeIndex& hard_index,
                        const LossWeights& w, double min_parent_norm) {
  LossVars out;
  out.da = discriminative_alignment_loss(t, fwd.logits_comp, fwd.label_pos,
                                         hard_index, w.hard_negative_w);
  if (g.hyperbolic() && w.beta2 != 0.0)
    out.te = taxonomic_entailment_loss(g, fwd, w.gamma, min_parent_norm);
  else
    out.te = t.leaf(Mat::Zero(1, 1));
  auto [ls, lo] = primitive_losses(t, fwd.logits_state, fwd.logits_object,
                                   labels);
  out.ls = ls;
  out.lo = lo;
  out.total = t.add(t.add(t.scale(out.da, w.beta1), t.scale(out.te, w.beta2)),
                    t.scale(t.add(out.ls, out.lo), w.beta3));
  return out;
}

}  // namespace ad

}  // namespace hycomp
