#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cofa {

// Canonical order: ori < fg < bg.  Ties in votes and argmins resolve in this order.
enum class FeatureKind : int { ori = 0, fg = 1, bg = 2 };

inline constexpr FeatureKind kAllKinds[] = {FeatureKind::ori, FeatureKind::fg, FeatureKind::bg};

std::string to_string(FeatureKind kind);
FeatureKind kind_from_string(const std::string& name);

// Holds one feature vector per (viewpoint, kind).  A store is complete when
// every viewpoint it mentions carries all three kinds; readers rely on that.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(int dim);

  int dim() const { return dim_; }
  size_t size() const { return features_.size(); }

  void ingest(const std::string& viewpoint_id, FeatureKind kind, std::vector<float> feature);
  bool has(const std::string& viewpoint_id, FeatureKind kind) const;
  const std::vector<float>& get(const std::string& viewpoint_id, FeatureKind kind) const;

  // Viewpoint ids present in the store, sorted.
  std::vector<std::string> viewpoint_ids() const;

  // Throws unless every viewpoint has all three kinds and all values are finite.
  void validate_complete() const;

 private:
  int dim_ = 0;
  std::map<std::pair<std::string, int>, std::vector<float>> features_;
};

// Manifest: {"dim": D, "entries": [{"viewpoint": id, "kind": name, "offset": bytes}]}.
// The blob holds little-endian f32 vectors of length dim at the given byte offsets.
void save_feature_store(const FeatureStore& store, const std::filesystem::path& manifest_path,
                        const std::filesystem::path& blob_path);
FeatureStore load_feature_store(const std::filesystem::path& manifest_path,
                                const std::filesystem::path& blob_path);

}  // namespace cofa
