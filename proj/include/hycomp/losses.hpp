#pragma once

#include <string>
#include <vector>

#include "hycomp/model.hpp"

namespace hycomp {

struct LossWeights {
  double beta1 = 1.0;           // discriminative alignment
  double beta2 = 0.1;           // taxonomic entailment
  double beta3 = 0.5;           // primitive auxiliary pair
  double hard_negative_w = 3.0;
  double tau = 0.1;             // initial temperature (learnable afterwards)
  double gamma = 0.1;           // cone boundary constant
};

struct LossValues {
  double da = 0.0, te = 0.0, ls = 0.0, lo = 0.0, total = 0.0;
};

// beta1 L_DA + beta2 L_TE + beta3 (L_s + L_o); throws NumericalError naming
// the first non-finite part.
double total_loss(const LossValues& parts, const LossWeights& w);

namespace ad {

struct LossVars {
  Var da, te, ls, lo, total;
};

// -log( exp(L_pos) / sum_k w_k exp(L_k) ), batch mean, stabilized by the
// detached row max. `weights` holds 1 for plain candidates (including the
// positive) and w for hard negatives.
Var weighted_infonce(Tape& t, Var logits, const Mat& onehot, const Mat& weights);

Var discriminative_alignment_loss(Tape& t, Var logits_comp,
                                  const std::vector<int>& label_pos,
                                  const HardNegativeIndex& hard_index,
                                  double hard_negative_w);

// (L_s, L_o) as plain batch-mean cross-entropies over the primitive logits.
std::pair<Var, Var> primitive_losses(Tape& t, Var logits_state,
                                     Var logits_object,
                                     const std::vector<std::pair<int, int>>& labels);

// Six per-item cone penalties (visual conceptual, textual conceptual,
// textual semantic), summed per item, batch mean.
Var taxonomic_entailment_loss(const GeomCtx& g, const ForwardResult& fwd,
                              double gamma, double min_parent_norm);

LossVars compute_losses(Tape& t, const GeomCtx& g, const ForwardResult& fwd,
                        const std::vector<std::pair<int, int>>& labels,
                        const HardNegativeIndex& hard_index,
                        const LossWeights& w, double min_parent_norm);

}  // namespace ad

}  // namespace hycomp
