#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cofa/feature_store.hpp"
#include "doctest.h"

using namespace cofa;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "cofa_featurestore_test";
  std::filesystem::create_directories(dir);
  return dir;
}

FeatureStore small_store() {
  FeatureStore store(4);
  store.ingest("v1", FeatureKind::ori, {1.0f, 2.0f, 3.0f, 4.0f});
  store.ingest("v1", FeatureKind::fg, {0.5f, 0.25f, 0.125f, 0.0625f});
  store.ingest("v1", FeatureKind::bg, {-1.0f, 0.0f, 1.0f, 2.0f});
  return store;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

}  // namespace

TEST_CASE("feature kinds carry a fixed canonical order") {
  CHECK(static_cast<int>(FeatureKind::ori) == 0);
  CHECK(static_cast<int>(FeatureKind::fg) == 1);
  CHECK(static_cast<int>(FeatureKind::bg) == 2);
  CHECK(kAllKinds[0] == FeatureKind::ori);
  CHECK(kAllKinds[1] == FeatureKind::fg);
  CHECK(kAllKinds[2] == FeatureKind::bg);

  for (FeatureKind kind : kAllKinds) CHECK(kind_from_string(to_string(kind)) == kind);
  CHECK(to_string(FeatureKind::ori) == "ori");
  CHECK(to_string(FeatureKind::fg) == "fg");
  CHECK(to_string(FeatureKind::bg) == "bg");
  CHECK_THROWS_AS(kind_from_string("foreground"), std::runtime_error);
}

TEST_CASE("a one-viewpoint store holds three records and serves them back") {
  const auto store = small_store();
  CHECK(store.size() == 3);
  CHECK(store.dim() == 4);
  CHECK(store.viewpoint_ids() == std::vector<std::string>{"v1"});
  CHECK(store.get("v1", FeatureKind::ori) == std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f});
  CHECK_NOTHROW(store.validate_complete());

  SUBCASE("repeated gets return identical vectors") {
    const auto first = store.get("v1", FeatureKind::fg);
    const auto second = store.get("v1", FeatureKind::fg);
    CHECK(first == second);
  }
  SUBCASE("unknown lookups throw") {
    CHECK_THROWS_AS(store.get("v2", FeatureKind::ori), std::runtime_error);
    CHECK_FALSE(store.has("v2", FeatureKind::ori));
  }
}

TEST_CASE("ingest rejects vectors of the wrong length") {
  FeatureStore store(4);
  CHECK_THROWS_AS(store.ingest("v1", FeatureKind::ori, {1.0f, 2.0f}), std::runtime_error);
}

TEST_CASE("completeness validation names the missing kind") {
  FeatureStore store(2);
  store.ingest("v1", FeatureKind::ori, {1.0f, 2.0f});
  store.ingest("v1", FeatureKind::fg, {3.0f, 4.0f});
  CHECK_THROWS_WITH_AS(store.validate_complete(), doctest::Contains("v1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(store.validate_complete(), doctest::Contains("bg"), std::runtime_error);

  store.ingest("v1", FeatureKind::bg, {5.0f, 6.0f});
  CHECK_NOTHROW(store.validate_complete());

  SUBCASE("non-finite values are rejected") {
    store.ingest("v1", FeatureKind::bg, {std::numeric_limits<float>::quiet_NaN(), 0.0f});
    CHECK_THROWS_AS(store.validate_complete(), std::runtime_error);
  }
  SUBCASE("an empty store is incomplete") {
    FeatureStore empty(2);
    CHECK_THROWS_AS(empty.validate_complete(), std::runtime_error);
  }
}

TEST_CASE("manifest and blob round-trip the store bit-exactly") {
  const auto store = small_store();
  const auto manifest = temp_dir() / "features.json";
  const auto blob = temp_dir() / "features.blob";
  save_feature_store(store, manifest, blob);

  const auto loaded = load_feature_store(manifest, blob);
  CHECK(loaded.dim() == store.dim());
  CHECK(loaded.size() == store.size());
  for (const auto& id : store.viewpoint_ids())
    for (FeatureKind kind : kAllKinds) CHECK(loaded.get(id, kind) == store.get(id, kind));

  SUBCASE("a second save is byte-identical") {
    const auto manifest2 = temp_dir() / "features2.json";
    const auto blob2 = temp_dir() / "features2.blob";
    save_feature_store(loaded, manifest2, blob2);
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(slurp(manifest2) == slurp(manifest));
    CHECK(slurp(blob2) == slurp(blob));
  }
}

TEST_CASE("saving an incomplete store is refused") {
  FeatureStore store(2);
  store.ingest("v1", FeatureKind::ori, {1.0f, 2.0f});
  CHECK_THROWS_AS(
      save_feature_store(store, temp_dir() / "bad.json", temp_dir() / "bad.blob"),
      std::runtime_error);
}

TEST_CASE("loader rejects malformed manifest and blob combinations") {
  const auto manifest = temp_dir() / "m.json";
  const auto blob = temp_dir() / "b.blob";

  SUBCASE("offset past the end of the blob") {
    write_file(manifest, R"({"dim": 4, "entries": [
      {"viewpoint": "v1", "kind": "ori", "offset": 0},
      {"viewpoint": "v1", "kind": "fg", "offset": 16},
      {"viewpoint": "v1", "kind": "bg", "offset": 32}
    ]})");
    write_file(blob, std::string(32, '\0'));  // bg needs bytes [32, 48)
    CHECK_THROWS_WITH_AS(load_feature_store(manifest, blob), doctest::Contains("past the end"),
                         std::runtime_error);
  }
  SUBCASE("missing kind for a viewpoint") {
    write_file(manifest, R"({"dim": 4, "entries": [
      {"viewpoint": "v1", "kind": "ori", "offset": 0},
      {"viewpoint": "v1", "kind": "fg", "offset": 16}
    ]})");
    write_file(blob, std::string(32, '\0'));
    CHECK_THROWS_WITH_AS(load_feature_store(manifest, blob), doctest::Contains("bg"),
                         std::runtime_error);
  }
  SUBCASE("duplicate entry") {
    write_file(manifest, R"({"dim": 4, "entries": [
      {"viewpoint": "v1", "kind": "ori", "offset": 0},
      {"viewpoint": "v1", "kind": "ori", "offset": 16},
      {"viewpoint": "v1", "kind": "fg", "offset": 16},
      {"viewpoint": "v1", "kind": "bg", "offset": 32}
    ]})");
    write_file(blob, std::string(48, '\0'));
    CHECK_THROWS_WITH_AS(load_feature_store(manifest, blob), doctest::Contains("duplicate"),
                         std::runtime_error);
  }
  SUBCASE("misaligned offset") {
    write_file(manifest, R"({"dim": 4, "entries": [
      {"viewpoint": "v1", "kind": "ori", "offset": 2},
      {"viewpoint": "v1", "kind": "fg", "offset": 18},
      {"viewpoint": "v1", "kind": "bg", "offset": 34}
    ]})");
    write_file(blob, std::string(64, '\0'));
    CHECK_THROWS_WITH_AS(load_feature_store(manifest, blob), doctest::Contains("aligned"),
                         std::runtime_error);
  }
  SUBCASE("unknown kind name") {
    write_file(manifest, R"({"dim": 4, "entries": [
      {"viewpoint": "v1", "kind": "foreground", "offset": 0}
    ]})");
    write_file(blob, std::string(16, '\0'));
    CHECK_THROWS_AS(load_feature_store(manifest, blob), std::runtime_error);
  }
  SUBCASE("non-positive dim") {
    write_file(manifest, R"({"dim": 0, "entries": []})");
    write_file(blob, "");
    CHECK_THROWS_AS(load_feature_store(manifest, blob), std::runtime_error);
  }
  SUBCASE("manifest is not json") {
    write_file(manifest, "nope");
    write_file(blob, "");
    CHECK_THROWS_WITH_AS(load_feature_store(manifest, blob), doctest::Contains("parse"),
                         std::runtime_error);
  }
}

TEST_CASE("entries may share blob bytes through equal offsets") {
  // Two kinds pointing at the same offset read the same vector; the loader
  // only requires in-bounds, aligned, non-duplicate (viewpoint, kind) pairs.
  const auto manifest = temp_dir() / "shared.json";
  const auto blob = temp_dir() / "shared.blob";
  write_file(manifest, R"({"dim": 1, "entries": [
    {"viewpoint": "v1", "kind": "ori", "offset": 0},
    {"viewpoint": "v1", "kind": "fg", "offset": 0},
    {"viewpoint": "v1", "kind": "bg", "offset": 4}
  ]})");
  const float values[2] = {1.5f, -2.5f};
  std::ofstream out(blob, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values), sizeof(values));
  out.close();

  const auto store = load_feature_store(manifest, blob);
  CHECK(store.get("v1", FeatureKind::ori) == std::vector<float>{1.5f});
  CHECK(store.get("v1", FeatureKind::fg) == std::vector<float>{1.5f});
  CHECK(store.get("v1", FeatureKind::bg) == std::vector<float>{-2.5f});
}
