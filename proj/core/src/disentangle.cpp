#include "cofa/disentangle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("disentangle: " + msg); }

void write_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail("cannot open '" + path.string() + "'");
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  return bytes;
}

void put_f32_le(std::vector<uint8_t>& out, float value) {
  uint32_t u;
  static_assert(sizeof(u) == sizeof(value));
  std::memcpy(&u, &value, sizeof(u));
  out.push_back(static_cast<uint8_t>(u & 0xff));
  out.push_back(static_cast<uint8_t>((u >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((u >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((u >> 24) & 0xff));
}

float get_f32_le(const uint8_t* p) {
  uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float value;
  std::memcpy(&value, &u, sizeof(value));
  return value;
}

}  // namespace

void validate_image(const ViewImage& image) {
  if (image.width <= 0 || image.height <= 0) fail("image dimensions must be positive");
  if (image.pixels.size() != image.pixel_count() * kImageChannels)
    fail("image pixel array length does not match dimensions");
  for (float v : image.pixels)
    if (!(v >= 0.0f && v <= 1.0f)) fail("image pixel value outside [0,1]");
}

void validate_mask(const BinaryMask& mask) {
  if (mask.width <= 0 || mask.height <= 0) fail("mask dimensions must be positive");
  if (mask.bits.size() != mask.pixel_count()) fail("mask bit array length does not match dimensions");
  for (uint8_t b : mask.bits)
    if (b != 0 && b != 1) fail("mask value outside {0,1}");
}

void validate_panorama(const Panorama& pano) {
  if (pano.views.size() != kPanoramaViews || pano.masks.size() != kPanoramaViews)
    fail("panorama '" + pano.viewpoint_id + "' must have exactly 36 views and 36 masks");
  for (size_t j = 0; j < pano.views.size(); ++j) {
    validate_image(pano.views[j]);
    validate_mask(pano.masks[j]);
    if (pano.views[j].width != pano.masks[j].width || pano.views[j].height != pano.masks[j].height) {
      std::ostringstream os;
      os << "panorama '" << pano.viewpoint_id << "' view " << j << " and mask dimensions differ";
      fail(os.str());
    }
  }
}

void validate_landmarks(const LandmarkSet& set) {
  if (set.landmarks.empty()) fail("landmark set for '" + set.viewpoint_id + "' is empty");
  std::set<std::string> seen(set.landmarks.begin(), set.landmarks.end());
  if (seen.size() != set.landmarks.size())
    fail("landmark set for '" + set.viewpoint_id + "' has duplicate entries");
}

double bigram_similarity(const std::string& a, const std::string& b) {
  auto bigrams = [](const std::string& s) {
    std::map<std::pair<char, char>, int> grams;
    for (size_t i = 0; i + 1 < s.size(); ++i) ++grams[{s[i], s[i + 1]}];
    return grams;
  };
  const auto ga = bigrams(a), gb = bigrams(b);
  const size_t na = a.size() < 2 ? 0 : a.size() - 1;
  const size_t nb = b.size() < 2 ? 0 : b.size() - 1;
  if (na == 0 || nb == 0) return a == b ? 1.0 : 0.0;
  size_t inter = 0;
  for (const auto& [gram, count] : ga) {
    auto it = gb.find(gram);
    if (it != gb.end()) inter += std::min(count, it->second);
  }
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<std::string> filter_landmarks(const std::vector<std::string>& detected,
                                          const LandmarkSet& landmarks,
                                          const TextSimilarity& similarity, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("filter threshold must lie in [0,1]");
  std::vector<std::string> kept;
  for (const auto& tag : detected) {
    double best = 0.0;
    for (const auto& lm : landmarks.landmarks) best = std::max(best, similarity(tag, lm));
    if (best >= threshold) kept.push_back(tag);
  }
  return kept;
}

ViewImage apply_mask(const ViewImage& image, const BinaryMask& mask) {
  if (image.width != mask.width || image.height != mask.height)
    fail("apply_mask dimension mismatch");
  ViewImage out = image;
  const size_t pixels = image.pixel_count();
  for (size_t p = 0; p < pixels; ++p) {
    const float m = static_cast<float>(mask.bits[p]);
    for (int c = 0; c < kImageChannels; ++c) out.pixels[p * kImageChannels + c] = image.at(p, c) * m;
  }
  return out;
}

BinaryMask complement_mask(const BinaryMask& mask) {
  BinaryMask out = mask;
  for (auto& b : out.bits) b = static_cast<uint8_t>(1 - b);
  return out;
}

std::array<double, kImageChannels> masked_channel_means(const ViewImage& image,
                                                        const BinaryMask& mask, Region region) {
  if (region != Region::ori && (image.width != mask.width || image.height != mask.height))
    fail("masked_channel_means dimension mismatch");
  std::array<double, kImageChannels> sum{0.0, 0.0, 0.0};
  size_t selected = 0;
  const size_t pixels = image.pixel_count();
  for (size_t p = 0; p < pixels; ++p) {
    const bool in_region = region == Region::ori ? true
                           : region == Region::fg ? mask.bits[p] != 0
                                                  : mask.bits[p] == 0;
    if (!in_region) continue;
    ++selected;
    for (int c = 0; c < kImageChannels; ++c) sum[c] += image.at(p, c);
  }
  if (selected == 0) return {0.0, 0.0, 0.0};  // empty region pools to zeros
  for (auto& s : sum) s /= static_cast<double>(selected);
  return sum;
}

std::vector<int> fold_bounds(int dim) {
  const int slots = kPanoramaViews * kImageChannels;
  if (dim < 1 || dim > slots) fail("feature dim must lie in [1, 108]");
  std::vector<int> bounds(dim + 1);
  for (int k = 0; k <= dim; ++k) bounds[k] = static_cast<int>(static_cast<long>(slots) * k / dim);
  return bounds;
}

std::vector<float> extract_features(const Panorama& pano, Region region, int dim) {
  validate_panorama(pano);
  std::vector<double> slots;
  slots.reserve(kPanoramaViews * kImageChannels);
  for (int j = 0; j < kPanoramaViews; ++j) {
    const auto means = masked_channel_means(pano.views[j], pano.masks[j], region);
    slots.insert(slots.end(), means.begin(), means.end());
  }
  const auto bounds = fold_bounds(dim);
  std::vector<float> out(dim);
  for (int k = 0; k < dim; ++k) {
    double acc = 0.0;
    for (int s = bounds[k]; s < bounds[k + 1]; ++s) acc += slots[s];
    out[k] = static_cast<float>(acc / (bounds[k + 1] - bounds[k]));
  }
  return out;
}

void save_panorama(const Panorama& pano, const std::filesystem::path& dir) {
  validate_panorama(pano);
  std::filesystem::create_directories(dir);
  const auto& first = pano.views.front();

  json sidecar;
  sidecar["viewpoint_id"] = pano.viewpoint_id;
  sidecar["width"] = first.width;
  sidecar["height"] = first.height;
  std::ofstream js(dir / (pano.viewpoint_id + ".json"));
  if (!js) fail("cannot write panorama sidecar for '" + pano.viewpoint_id + "'");
  js << sidecar.dump(2) << "\n";

  std::vector<uint8_t> img_bytes;
  img_bytes.reserve(kPanoramaViews * first.pixels.size() * 4);
  std::vector<uint8_t> mask_bytes;
  for (int j = 0; j < kPanoramaViews; ++j) {
    if (pano.views[j].width != first.width || pano.views[j].height != first.height)
      fail("panorama '" + pano.viewpoint_id + "' has views of differing dimensions");
    for (float v : pano.views[j].pixels) put_f32_le(img_bytes, v);
    mask_bytes.insert(mask_bytes.end(), pano.masks[j].bits.begin(), pano.masks[j].bits.end());
  }
  write_bytes(dir / (pano.viewpoint_id + ".views.f32"), img_bytes);
  write_bytes(dir / (pano.viewpoint_id + ".masks.u8"), mask_bytes);
}

Panorama load_panorama(const std::filesystem::path& dir, const std::string& viewpoint_id) {
  std::ifstream js(dir / (viewpoint_id + ".json"));
  if (!js) fail("missing panorama sidecar for '" + viewpoint_id + "'");
  json sidecar;
  try {
    sidecar = json::parse(js);
  } catch (const json::exception& e) {
    fail("panorama sidecar parse error for '" + viewpoint_id + "': " + e.what());
  }
  Panorama pano;
  pano.viewpoint_id = sidecar.at("viewpoint_id").get<std::string>();
  if (pano.viewpoint_id != viewpoint_id)
    fail("panorama sidecar id '" + pano.viewpoint_id + "' does not match file name '" + viewpoint_id + "'");
  const int width = sidecar.at("width").get<int>();
  const int height = sidecar.at("height").get<int>();
  if (width <= 0 || height <= 0) fail("panorama '" + viewpoint_id + "' has non-positive dimensions");

  const size_t per_view = static_cast<size_t>(width) * height;
  const auto img_bytes = read_bytes(dir / (viewpoint_id + ".views.f32"));
  if (img_bytes.size() != kPanoramaViews * per_view * kImageChannels * 4)
    fail("panorama '" + viewpoint_id + "' pixel blob has wrong size");
  const auto mask_bytes = read_bytes(dir / (viewpoint_id + ".masks.u8"));
  if (mask_bytes.size() != kPanoramaViews * per_view)
    fail("panorama '" + viewpoint_id + "' mask blob has wrong size");

  size_t img_off = 0, mask_off = 0;
  for (int j = 0; j < kPanoramaViews; ++j) {
    ViewImage view;
    view.width = width;
    view.height = height;
    view.pixels.resize(per_view * kImageChannels);
    for (auto& v : view.pixels) {
      v = get_f32_le(img_bytes.data() + img_off);
      img_off += 4;
    }
    BinaryMask mask;
    mask.width = width;
    mask.height = height;
    mask.bits.assign(mask_bytes.begin() + static_cast<long>(mask_off),
                     mask_bytes.begin() + static_cast<long>(mask_off + per_view));
    mask_off += per_view;
    pano.views.push_back(std::move(view));
    pano.masks.push_back(std::move(mask));
  }
  validate_panorama(pano);
  return pano;
}

std::vector<std::string> list_panorama_ids(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  if (!std::filesystem::is_directory(dir)) fail("panorama directory '" + dir.string() + "' does not exist");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".json") ids.push_back(p.stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace cofa
