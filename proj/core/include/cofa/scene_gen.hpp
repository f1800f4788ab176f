#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace cofa {

// Synthetic stand-in for a scanned building: a corridor band of nodes joined
// to a blob of object-annotated room nodes, with one goal viewpoint next to
// the corridor/room junction.  Feature painting makes fg informative in rooms,
// bg informative in corridors, and both informative at the goal, so that the
// augmentation strategies are separable by construction.
struct SceneSpec {
  uint64_t seed = 7;
  int node_count = 96;
  double corridor_fraction = 0.5;
  int feature_dim = 64;
  int instr_dim = 16;
  int image_width = 8;
  int image_height = 8;
};

void validate_scene_spec(const SceneSpec& spec);

struct SceneArtifacts {
  std::filesystem::path graph_path;
  std::filesystem::path panorama_dir;
  std::filesystem::path train_path;
  std::filesystem::path val_path;
  std::string goal_viewpoint;
  int room_count = 0;
  int corridor_count = 0;
  size_t train_trajectories = 0;
  size_t val_trajectories = 0;
};

// Writes graph.json, panoramas/, trajectories_train.jsonl, and
// trajectories_val.jsonl under out_dir.  Byte-identical across invocations
// with the same spec.
SceneArtifacts generate_scene(const SceneSpec& spec, const std::filesystem::path& out_dir);

// Feature slot layout shared by the painter and its tests.  Slot 0 carries a
// goal-closeness ramp (affine in geodesic distance to the goal), slot 1 a
// constant presence marker, and slots >= 2 hold object embeddings.  A kind
// that is uninformative at a node keeps only the presence marker, so it holds
// no node identity and no direction.
inline constexpr int kClosenessSlot = 0;
inline constexpr int kPresenceSlot = 1;
inline constexpr int kFirstObjectSlot = 2;

}  // namespace cofa
