#include "hycomp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hycomp {

Taxonomy make_balanced_taxonomy(const SynthTaxonomySpec& spec, Rng& rng) {
  Taxonomy t;
  auto two_digits = [](int i) {
    return (i < 10 ? "0" : "") + std::to_string(i);
  };
  for (int p = 0; p < spec.state_parents; ++p) {
    t.state_parent_vocab.push_back("sgroup" + two_digits(p));
    for (int k = 0; k < spec.states_per_parent; ++k) {
      t.states.push_back("state" +
                         two_digits(p * spec.states_per_parent + k));
      t.state_parent.push_back(p);
    }
  }
  for (int p = 0; p < spec.object_parents; ++p) {
    t.object_parent_vocab.push_back("ogroup" + two_digits(p));
    for (int k = 0; k < spec.objects_per_parent; ++k) {
      t.objects.push_back("object" +
                          two_digits(p * spec.objects_per_parent + k));
      t.object_parent.push_back(p);
    }
  }
  for (int s = 0; s < static_cast<int>(t.states.size()); ++s)
    for (int o = 0; o < static_cast<int>(t.objects.size()); ++o)
      t.compositions.push_back({s, o});

  std::vector<int> order(t.compositions.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int n_seen = std::max(
      1, static_cast<int>(std::lround(spec.seen_fraction * order.size())));
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    if (i < n_seen) {
      t.splits.train_seen.push_back(order[i]);
      t.splits.test_seen.push_back(order[i]);
    } else {
      t.splits.test_unseen.push_back(order[i]);
    }
  }
  std::sort(t.splits.train_seen.begin(), t.splits.train_seen.end());
  std::sort(t.splits.test_seen.begin(), t.splits.test_seen.end());
  std::sort(t.splits.test_unseen.begin(), t.splits.test_unseen.end());
  return t;
}

FeatureBatch make_synthetic_features(const Taxonomy& t,
                                     const std::vector<int>& comp_indices,
                                     const SynthFeatureSpec& spec, Rng& rng) {
  const int d = spec.dim;
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));
  const double pull = spec.parent_pull;
  const double rest = std::sqrt(std::max(0.0, 1.0 - pull * pull));

  Mat sp_lat = rng.normal_mat(static_cast<Index>(t.state_parent_vocab.size()),
                              d, unit);
  Mat op_lat = rng.normal_mat(static_cast<Index>(t.object_parent_vocab.size()),
                              d, unit);
  Mat s_lat(static_cast<Index>(t.states.size()), d);
  for (Index s = 0; s < s_lat.rows(); ++s)
    s_lat.row(s) = pull * sp_lat.row(t.state_parent[s]) +
                   rest * rng.normal_mat(1, d, unit);
  Mat o_lat(static_cast<Index>(t.objects.size()), d);
  for (Index o = 0; o < o_lat.rows(); ++o)
    o_lat.row(o) = pull * op_lat.row(t.object_parent[o]) +
                   rest * rng.normal_mat(1, d, unit);

  FeatureBatch b;
  b.patch_count = spec.patch_count;
  const Index n = static_cast<Index>(comp_indices.size()) * spec.per_composition;
  b.global.resize(n, d);
  if (spec.patch_count > 0) b.patches.resize(n * spec.patch_count, d);

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Index row = 0;
  for (int ci : comp_indices) {
    const auto [s, o] = t.compositions[ci];
    for (int k = 0; k < spec.per_composition; ++k, ++row) {
      b.global.row(row) = inv_sqrt2 * (s_lat.row(s) + o_lat.row(o)) +
                          spec.noise * rng.normal_mat(1, d, unit);
      b.labels.push_back({s, o});
      if (spec.patch_count > 0) {
        b.patches.middleRows(row * spec.patch_count, 1) = b.global.row(row);
        for (int p = 1; p < spec.patch_count; ++p)
          b.patches.middleRows(row * spec.patch_count + p, 1) =
              b.global.row(row) + spec.patch_noise * rng.normal_mat(1, d, unit);
      }
    }
  }
  return b;
}

}  // namespace hycomp
