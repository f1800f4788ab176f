#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cofa {

inline constexpr int kPanoramaViews = 36;
inline constexpr int kImageChannels = 3;

// Row-major interleaved RGB, values in [0, 1].
struct ViewImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // width * height * kImageChannels

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  float at(size_t pixel, int channel) const { return pixels[pixel * kImageChannels + channel]; }
};

// Row-major {0,1} mask, one bit per pixel, broadcast across channels.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

struct Panorama {
  std::string viewpoint_id;
  std::vector<ViewImage> views;  // exactly kPanoramaViews
  std::vector<BinaryMask> masks;  // exactly kPanoramaViews, dims match per index
};

struct LandmarkSet {
  std::string viewpoint_id;
  std::string room_type;
  std::vector<std::string> landmarks;  // non-empty, no duplicate strings
};

enum class Region { ori, fg, bg };

void validate_image(const ViewImage& image);
void validate_mask(const BinaryMask& mask);
void validate_panorama(const Panorama& pano);
void validate_landmarks(const LandmarkSet& set);

using TextSimilarity = std::function<double(const std::string&, const std::string&)>;

// Sorensen-Dice overlap of adjacent-character bigrams, in [0, 1]. Strings
// shorter than two characters have no bigrams; they compare 1.0 on exact
// equality and 0.0 otherwise.
double bigram_similarity(const std::string& a, const std::string& b);

// Keeps the detected tags whose best similarity against any landmark reaches
// the threshold. Order preserved. Throws if threshold is outside [0, 1].
std::vector<std::string> filter_landmarks(const std::vector<std::string>& detected,
                                          const LandmarkSet& landmarks,
                                          const TextSimilarity& similarity, double threshold);

// out[p,c] = image[p,c] * mask[p]. Throws on dimension mismatch.
ViewImage apply_mask(const ViewImage& image, const BinaryMask& mask);

// out[p] = 1 - mask[p]. Involution.
BinaryMask complement_mask(const BinaryMask& mask);

// Per-channel mean over the selected region of one view. fg averages masked
// pixels, bg the complement, ori all pixels. An empty region yields zeros.
std::array<double, kImageChannels> masked_channel_means(const ViewImage& image,
                                                        const BinaryMask& mask, Region region);

// Deterministic pooled feature: the 36 per-view channel means (view-major,
// 108 values) folded to `dim` by block-averaging. Requires 1 <= dim <= 108.
std::vector<float> extract_features(const Panorama& pano, Region region, int dim);

// Half-open slot ranges of the 108 -> dim fold; block k averages slots
// [bounds[k], bounds[k+1]).
std::vector<int> fold_bounds(int dim);

// Panorama files: <id>.json sidecar {"viewpoint_id","width","height"},
// <id>.views.f32 little-endian pixel blob, <id>.masks.u8 mask blob.
void save_panorama(const Panorama& pano, const std::filesystem::path& dir);
Panorama load_panorama(const std::filesystem::path& dir, const std::string& viewpoint_id);
std::vector<std::string> list_panorama_ids(const std::filesystem::path& dir);

}  // namespace cofa
