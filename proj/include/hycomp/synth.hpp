#pragma once

#include "hycomp/features.hpp"
#include "hycomp/rng.hpp"
#include "hycomp/taxonomy.hpp"

namespace hycomp {

// Balanced synthetic taxonomy: `parents` parent categories per kind, each
// with `per_parent` primitives; compositions are the full product. A random
// `seen_fraction` of compositions becomes train_seen (= test_seen), the rest
// test_unseen.
struct SynthTaxonomySpec {
  int state_parents = 3;
  int states_per_parent = 3;
  int object_parents = 3;
  int objects_per_parent = 3;
  double seen_fraction = 1.0;
};

Taxonomy make_balanced_taxonomy(const SynthTaxonomySpec& spec, Rng& rng);

// Compositional features: per-primitive latents hang off per-parent latents,
// and an image of composition (s, o) is (u_s + u_o)/sqrt(2) plus noise.
struct SynthFeatureSpec {
  int per_composition = 4;
  int dim = 16;
  double noise = 0.25;
  int patch_count = 2;      // 0 disables the patch tensor
  double patch_noise = 0.1;
  double parent_pull = 0.7; // how strongly primitives cluster under a parent
};

// Draws features for the given composition indices (into t.compositions).
FeatureBatch make_synthetic_features(const Taxonomy& t,
                                     const std::vector<int>& comp_indices,
                                     const SynthFeatureSpec& spec, Rng& rng);

}  // namespace hycomp
