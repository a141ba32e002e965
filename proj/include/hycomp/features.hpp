#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hycomp/taxonomy.hpp"
#include "hycomp/types.hpp"

namespace hycomp {

// Euclidean image features: one global vector per image and, optionally,
// patch_count token rows per image (the global token first by convention).
struct FeatureBatch {
  Mat global;      // [B x d]
  Mat patches;     // [(B * patch_count) x d]; empty when patch_count == 0
  int patch_count = 0;
  std::vector<std::pair<int, int>> labels;  // (state, object) indices

  Index count() const { return global.rows(); }
  Index dim() const { return global.cols(); }

  // Rows of the patch block for image i; when patches are absent the global
  // row stands in as a single token.
  Mat patch_rows(Index i) const {
    if (patch_count == 0) return global.row(i);
    return patches.middleRows(i * patch_count, patch_count);
  }

  FeatureBatch subset(const std::vector<int>& rows) const;
};

// Manifest JSON ({count, dim, patch_count, dtype, byte_order, data, labels})
// next to a raw little-endian float32 binary: global matrix row-major, then
// the patch tensor row-major.
FeatureBatch load_features(const std::string& manifest_path,
                           const Taxonomy& taxonomy);
void save_features(const std::string& manifest_path, const FeatureBatch& batch,
                   const Taxonomy& taxonomy);

}  // namespace hycomp
