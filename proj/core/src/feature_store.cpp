#include "cofa/feature_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("features: " + msg); }

}  // namespace

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::ori: return "ori";
    case FeatureKind::fg: return "fg";
    case FeatureKind::bg: return "bg";
  }
  fail("unknown feature kind value");
}

FeatureKind kind_from_string(const std::string& name) {
  if (name == "ori") return FeatureKind::ori;
  if (name == "fg") return FeatureKind::fg;
  if (name == "bg") return FeatureKind::bg;
  fail("unknown feature kind '" + name + "'");
}

FeatureStore::FeatureStore(int dim) : dim_(dim) {
  if (dim <= 0) fail("feature dim must be positive");
}

void FeatureStore::ingest(const std::string& viewpoint_id, FeatureKind kind,
                          std::vector<float> feature) {
  if (dim_ == 0) dim_ = static_cast<int>(feature.size());
  if (feature.size() != static_cast<size_t>(dim_))
    fail("feature for '" + viewpoint_id + "/" + to_string(kind) + "' has length " +
         std::to_string(feature.size()) + ", store dim is " + std::to_string(dim_));
  features_[{viewpoint_id, static_cast<int>(kind)}] = std::move(feature);
}

bool FeatureStore::has(const std::string& viewpoint_id, FeatureKind kind) const {
  return features_.count({viewpoint_id, static_cast<int>(kind)}) != 0;
}

const std::vector<float>& FeatureStore::get(const std::string& viewpoint_id,
                                            FeatureKind kind) const {
  auto it = features_.find({viewpoint_id, static_cast<int>(kind)});
  if (it == features_.end())
    fail("no feature stored for '" + viewpoint_id + "/" + to_string(kind) + "'");
  return it->second;
}

std::vector<std::string> FeatureStore::viewpoint_ids() const {
  std::vector<std::string> ids;
  for (const auto& [key, value] : features_)
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  return ids;
}

void FeatureStore::validate_complete() const {
  if (features_.empty()) fail("store is empty");
  for (const auto& id : viewpoint_ids())
    for (FeatureKind kind : kAllKinds)
      if (!has(id, kind)) fail("viewpoint '" + id + "' is missing kind '" + to_string(kind) + "'");
  for (const auto& [key, vec] : features_)
    for (float v : vec)
      if (!std::isfinite(v))
        fail("non-finite value in feature '" + key.first + "/" +
             to_string(static_cast<FeatureKind>(key.second)) + "'");
}

void save_feature_store(const FeatureStore& store, const std::filesystem::path& manifest_path,
                        const std::filesystem::path& blob_path) {
  store.validate_complete();
  const int dim = store.dim();

  std::vector<uint8_t> blob;
  json entries = json::array();
  for (const auto& id : store.viewpoint_ids()) {
    for (FeatureKind kind : kAllKinds) {
      const auto& vec = store.get(id, kind);
      json entry;
      entry["viewpoint"] = id;
      entry["kind"] = to_string(kind);
      entry["offset"] = blob.size();
      entries.push_back(std::move(entry));
      for (float v : vec) {
        uint32_t u;
        std::memcpy(&u, &v, sizeof(u));
        blob.push_back(static_cast<uint8_t>(u & 0xff));
        blob.push_back(static_cast<uint8_t>((u >> 8) & 0xff));
        blob.push_back(static_cast<uint8_t>((u >> 16) & 0xff));
        blob.push_back(static_cast<uint8_t>((u >> 24) & 0xff));
      }
    }
  }

  json manifest;
  manifest["dim"] = dim;
  manifest["entries"] = std::move(entries);

  std::ofstream mf(manifest_path);
  if (!mf) fail("cannot write manifest '" + manifest_path.string() + "'");
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(blob_path, std::ios::binary);
  if (!bf) fail("cannot write blob '" + blob_path.string() + "'");
  bf.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
}

FeatureStore load_feature_store(const std::filesystem::path& manifest_path,
                                const std::filesystem::path& blob_path) {
  std::ifstream mf(manifest_path);
  if (!mf) fail("cannot open manifest '" + manifest_path.string() + "'");
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    fail(std::string("manifest parse error: ") + e.what());
  }

  const int dim = manifest.at("dim").get<int>();
  if (dim <= 0) fail("manifest dim must be positive");

  std::ifstream bf(blob_path, std::ios::binary | std::ios::ate);
  if (!bf) fail("cannot open blob '" + blob_path.string() + "'");
  const size_t blob_size = static_cast<size_t>(bf.tellg());
  bf.seekg(0);
  std::vector<uint8_t> blob(blob_size);
  bf.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_size));

  const size_t vector_bytes = static_cast<size_t>(dim) * 4;
  FeatureStore store(dim);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& entry : manifest.at("entries")) {
    const auto id = entry.at("viewpoint").get<std::string>();
    const auto kind_name = entry.at("kind").get<std::string>();
    const FeatureKind kind = kind_from_string(kind_name);
    if (!seen.insert({id, kind_name}).second)
      fail("duplicate manifest entry for '" + id + "/" + kind_name + "'");
    const auto offset = entry.at("offset").get<size_t>();
    if (offset % 4 != 0) fail("entry offset " + std::to_string(offset) + " is not 4-byte aligned");
    if (offset + vector_bytes > blob_size)
      fail("entry for '" + id + "/" + kind_name + "' points past the end of the blob");
    std::vector<float> vec(dim);
    for (int k = 0; k < dim; ++k) {
      const uint8_t* p = blob.data() + offset + static_cast<size_t>(k) * 4;
      uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                   (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
      std::memcpy(&vec[k], &u, sizeof(float));
    }
    store.ingest(id, kind, std::move(vec));
  }
  store.validate_complete();
  return store;
}

}  // namespace cofa
