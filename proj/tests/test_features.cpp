#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hycomp/errors.hpp"
#include "hycomp/features.hpp"
#include "hycomp/rng.hpp"
#include "hycomp/synth.hpp"

using namespace hycomp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hycomp_feat_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Taxonomy tiny_taxonomy(Rng& rng) {
  SynthTaxonomySpec spec;
  spec.state_parents = 2;
  spec.states_per_parent = 2;
  spec.object_parents = 2;
  spec.objects_per_parent = 2;
  return make_balanced_taxonomy(spec, rng);
}

}  // namespace

TEST_CASE("feature save/load round trip preserves f32 payload and labels") {
  TempDir tmp;
  Rng rng(1);
  const Taxonomy t = tiny_taxonomy(rng);
  SynthFeatureSpec spec;
  spec.per_composition = 2;
  spec.dim = 6;
  spec.patch_count = 3;
  const FeatureBatch b =
      make_synthetic_features(t, t.splits.train_seen, spec, rng);

  const std::string manifest = (tmp.path / "feats.json").string();
  save_features(manifest, b, t);
  const FeatureBatch back = load_features(manifest, t);

  CHECK(back.count() == b.count());
  CHECK(back.dim() == 6);
  CHECK(back.patch_count == 3);
  CHECK(back.labels == b.labels);
  for (Index i = 0; i < b.count(); ++i)
    for (Index j = 0; j < b.dim(); ++j) {
      CHECK(back.global(i, j) ==
            static_cast<double>(static_cast<float>(b.global(i, j))));
    }
  CHECK(back.patches.rows() == b.count() * 3);
}

TEST_CASE("patch_rows falls back to the global row") {
  Rng rng(2);
  const Taxonomy t = tiny_taxonomy(rng);
  SynthFeatureSpec spec;
  spec.per_composition = 1;
  spec.dim = 4;
  spec.patch_count = 0;
  const FeatureBatch b =
      make_synthetic_features(t, t.splits.train_seen, spec, rng);
  CHECK(b.patches.size() == 0);
  CHECK((b.patch_rows(2) - b.global.row(2)).norm() == 0.0);
}

TEST_CASE("subset keeps rows, patches, labels aligned") {
  Rng rng(3);
  const Taxonomy t = tiny_taxonomy(rng);
  SynthFeatureSpec spec;
  spec.per_composition = 3;
  spec.dim = 5;
  spec.patch_count = 2;
  const FeatureBatch b =
      make_synthetic_features(t, t.splits.train_seen, spec, rng);
  const FeatureBatch s = b.subset({4, 0, 7});
  CHECK(s.count() == 3);
  CHECK((s.global.row(0) - b.global.row(4)).norm() == 0.0);
  CHECK((s.patch_rows(1) - b.patch_rows(0)).norm() == 0.0);
  CHECK(s.labels[2] == b.labels[7]);
}

TEST_CASE("loader reports malformed inputs") {
  TempDir tmp;
  Rng rng(4);
  const Taxonomy t = tiny_taxonomy(rng);

  const std::string manifest = (tmp.path / "m.json").string();
  {
    std::ofstream out(manifest);
    out << R"({"count": 1, "dim": 4})";
  }
  CHECK_THROWS_WITH_AS(load_features(manifest, t),
                       doctest::Contains("missing 'patch_count'"), DataError);

  {
    std::ofstream out(manifest);
    out << R"({"count": 2, "dim": 4, "patch_count": 0, "dtype": "f32",
               "byte_order": "little", "data": "m.bin",
               "labels": [["state00", "object00"], ["state00", "nope"]]})";
    std::ofstream bin(tmp.path / "m.bin", std::ios::binary);
    const float z[8] = {0};
    bin.write(reinterpret_cast<const char*>(z), sizeof(z));
  }
  CHECK_THROWS_WITH_AS(load_features(manifest, t),
                       doctest::Contains("unknown object label 'nope'"),
                       DataError);

  {
    std::ofstream out(manifest);
    out << R"({"count": 4, "dim": 4, "patch_count": 0, "dtype": "f32",
               "byte_order": "little", "data": "m.bin",
               "labels": [["state00", "object00"], ["state00", "object00"],
                          ["state00", "object00"], ["state00", "object00"]]})";
  }
  CHECK_THROWS_WITH_AS(load_features(manifest, t),
                       doctest::Contains("truncated"), DataError);
}
