#include "hycomp/features.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "hycomp/errors.hpp"
#include "json.hpp"

namespace hycomp {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

Mat read_f32_block(std::ifstream& in, Index rows, Index cols,
                   const std::string& path) {
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in)
    throw DataError("features: binary '" + path + "' truncated");
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<double>(buf[static_cast<std::size_t>(i) * cols + j]);
  return m;
}

void write_f32_block(std::ofstream& out, const Mat& m) {
  std::vector<float> buf(static_cast<std::size_t>(m.rows()) * m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      buf[static_cast<std::size_t>(i) * m.cols() + j] =
          static_cast<float>(m(i, j));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

}  // namespace

FeatureBatch FeatureBatch::subset(const std::vector<int>& rows) const {
  FeatureBatch out;
  out.patch_count = patch_count;
  out.global.resize(static_cast<Index>(rows.size()), global.cols());
  if (patch_count > 0)
    out.patches.resize(static_cast<Index>(rows.size()) * patch_count,
                       global.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.global.row(static_cast<Index>(k)) = global.row(rows[k]);
    if (patch_count > 0)
      out.patches.middleRows(static_cast<Index>(k) * patch_count, patch_count) =
          patches.middleRows(static_cast<Index>(rows[k]) * patch_count,
                             patch_count);
    out.labels.push_back(labels[rows[k]]);
  }
  return out;
}

FeatureBatch load_features(const std::string& manifest_path,
                           const Taxonomy& taxonomy) {
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw DataError("features: cannot open '" + manifest_path + "'");
  json j;
  try {
    j = json::parse(mf);
  } catch (const std::exception& e) {
    throw DataError(std::string("features: manifest parse error: ") + e.what());
  }

  for (const char* key : {"count", "dim", "patch_count", "dtype", "byte_order",
                          "data", "labels"})
    if (!j.contains(key))
      throw DataError(std::string("features: manifest missing '") + key + "'");
  if (j["dtype"].get<std::string>() != "f32")
    throw DataError("features: unsupported dtype '" +
                    j["dtype"].get<std::string>() + "'");
  if (j["byte_order"].get<std::string>() != "little")
    throw DataError("features: unsupported byte_order '" +
                    j["byte_order"].get<std::string>() + "'");

  const Index count = j["count"].get<Index>();
  const Index dim = j["dim"].get<Index>();
  const int patch_count = j["patch_count"].get<int>();

  FeatureBatch b;
  b.patch_count = patch_count;
  const fs::path bin_path =
      fs::path(manifest_path).parent_path() / j["data"].get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("features: cannot open '" + bin_path.string() + "'");
  b.global = read_f32_block(bin, count, dim, bin_path.string());
  if (patch_count > 0)
    b.patches = read_f32_block(bin, count * patch_count, dim, bin_path.string());

  const auto& labels = j["labels"];
  if (static_cast<Index>(labels.size()) != count)
    throw DataError("features: labels length differs from count");
  for (const auto& v : labels) {
    const std::string s = v[0].get<std::string>();
    const std::string o = v[1].get<std::string>();
    const int si = taxonomy.state_index(s);
    if (si < 0) throw DataError("features: unknown state label '" + s + "'");
    const int oi = taxonomy.object_index(o);
    if (oi < 0) throw DataError("features: unknown object label '" + o + "'");
    b.labels.push_back({si, oi});
  }
  return b;
}

void save_features(const std::string& manifest_path, const FeatureBatch& batch,
                   const Taxonomy& taxonomy) {
  const fs::path mpath(manifest_path);
  fs::path bin_rel = mpath.filename();
  bin_rel.replace_extension(".bin");

  json j;
  j["count"] = batch.count();
  j["dim"] = batch.dim();
  j["patch_count"] = batch.patch_count;
  j["dtype"] = "f32";
  j["byte_order"] = "little";
  j["data"] = bin_rel.string();
  json labels = json::array();
  for (const auto& [s, o] : batch.labels)
    labels.push_back({taxonomy.states[s], taxonomy.objects[o]});
  j["labels"] = labels;

  std::ofstream mf(mpath, std::ios::binary);
  if (!mf) throw DataError("features: cannot write '" + manifest_path + "'");
  mf << j.dump(2) << "\n";

  std::ofstream bin(mpath.parent_path() / bin_rel, std::ios::binary);
  if (!bin)
    throw DataError("features: cannot write '" +
                    (mpath.parent_path() / bin_rel).string() + "'");
  write_f32_block(bin, batch.global);
  if (batch.patch_count > 0) write_f32_block(bin, batch.patches);
}

}  // namespace hycomp
