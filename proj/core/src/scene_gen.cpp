#include "cofa/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

#include "cofa/disentangle.hpp"
#include "cofa/navgraph.hpp"
#include "cofa/rng.hpp"
#include "cofa/trajectory.hpp"

namespace cofa {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("scene: " + msg); }

constexpr double kPi = 3.14159265358979323846;
constexpr double kConnectRadius = 2.4;
constexpr double kSignalValue = 0.9;
constexpr int kMinStartHops = 3;
constexpr double kEvalFloorFraction = 0.55;

struct Node {
  std::string id;
  std::array<double, 3> position{};
  bool is_room = false;
};

std::string pad2(int k) { return (k < 10 ? "0" : "") + std::to_string(k); }

// Undirected adjacency as sorted neighbor lists plus a (min,max)-keyed weight map.
struct EdgeSet {
  std::map<std::pair<std::string, std::string>, double> weights;
  std::map<std::string, std::set<std::string>> adjacency;

  void add(const Node& a, const Node& b) {
    if (a.id == b.id) return;
    const auto key = a.id < b.id ? std::make_pair(a.id, b.id) : std::make_pair(b.id, a.id);
    if (weights.count(key)) return;
    weights[key] = euclidean_distance(a.position, b.position);
    adjacency[a.id].insert(b.id);
    adjacency[b.id].insert(a.id);
  }
};

std::map<std::string, int> hop_distances(const NavGraph& graph, const std::string& source) {
  std::map<std::string, int> hops;
  std::queue<std::string> frontier;
  hops[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop();
    for (const auto& n : graph.viewpoint(cur).neighbor_ids) {
      if (hops.count(n)) continue;
      hops[n] = hops[cur] + 1;
      frontier.push(n);
    }
  }
  return hops;
}

// Greedy steepest-descent walk on geodesic distance to the goal: every step
// moves to the neighbor closest to the goal (ties to the smaller id).  Each
// step strictly reduces the distance (the shortest-path successor is always
// available), so the walk terminates at the goal.
std::vector<std::string> steepest_descent_path(const NavGraph& graph, const std::string& start,
                                               const std::string& goal) {
  std::vector<std::string> path{start};
  while (path.back() != goal) {
    const auto& cur = path.back();
    const double here = graph.geodesic(cur, goal);
    std::string best;
    double best_dist = here;
    for (const auto& n : graph.viewpoint(cur).neighbor_ids) {
      const double d = graph.geodesic(n, goal);
      if (d < best_dist || (d == best_dist && !best.empty() && n < best)) {
        best = n;
        best_dist = d;
      }
    }
    if (best.empty()) fail("no descending step from '" + cur + "' toward '" + goal + "'");
    path.push_back(best);
  }
  return path;
}

}  // namespace

void validate_scene_spec(const SceneSpec& spec) {
  if (spec.node_count < 2) fail("node_count must be at least 2");
  if (!(spec.corridor_fraction >= 0.0 && spec.corridor_fraction <= 1.0))
    fail("corridor_fraction must lie in [0,1]");
  if (spec.feature_dim < 8 || spec.feature_dim > kPanoramaViews * kImageChannels)
    fail("feature_dim must lie in [8, 108]");
  if (spec.instr_dim < 1) fail("instr_dim must be positive");
  if (spec.image_width < 2 || spec.image_height < 2) fail("image dimensions must be at least 2x2");
}

SceneArtifacts generate_scene(const SceneSpec& spec, const std::filesystem::path& out_dir) {
  validate_scene_spec(spec);
  std::filesystem::create_directories(out_dir);
  SplitMix64 rng(mix_key(spec.seed, fnv1a64("scene-layout")));

  const int n_corr = static_cast<int>(std::lround(spec.node_count * spec.corridor_fraction));
  const int n_room = spec.node_count - n_corr;

  // Corridor band: two rows of tight columns along +x.  The column pitch keeps
  // adjacent columns connected while two-column skips fall outside the connect
  // radius, so geodesic descent visits every column in order.
  std::vector<Node> nodes;
  for (int i = 0; i < n_corr; ++i) {
    Node node;
    node.id = "c" + pad2(i);
    const int col = i / 2;
    const int row = i % 2;
    node.position = {col * 1.35 + rng.next_in(-0.04, 0.04), row * 1.0 + rng.next_in(-0.04, 0.04),
                     0.0};
    nodes.push_back(node);
  }
  const double band_end_x = n_corr > 0 ? ((n_corr - 1) / 2) * 1.35 : -1.50;

  // Rooms: the goal sits just past the band, near enough that only the last
  // corridor column links to it and the second-to-last column stays inside the
  // success radius.  Two satellite rooms hug the goal so a walk that reaches
  // its doorstep can cycle there without leaving the radius; the remaining
  // rooms fill a disc beyond.  Room ids fall with distance from the goal and
  // the goal takes the last id, which points flat-feature tie resolution (it
  // favors low ids) away from the goal.
  std::string goal_id;
  if (n_room > 0) {
    const std::array<double, 3> goal_pos{band_end_x + 1.30, 0.5, 0.0};
    std::vector<std::array<double, 3>> room_pos{goal_pos};
    if (n_room >= 2) room_pos.push_back({goal_pos[0] + 0.55, 0.90, 0.0});
    if (n_room >= 3) room_pos.push_back({goal_pos[0] + 0.55, 0.10, 0.0});
    const int n_disc = n_room - static_cast<int>(room_pos.size());
    const double disc_radius =
        std::max(2.2, 1.05 * std::sqrt(static_cast<double>(std::max(n_disc, 1))));
    const double disc_cx = goal_pos[0] + 0.55 + disc_radius;
    for (int i = 0; i < n_disc; ++i) {
      std::array<double, 3> pos{};
      for (int attempt = 0;; ++attempt) {
        const double ang = rng.next_in(0.0, 2.0 * kPi);
        const double rad = disc_radius * std::sqrt(rng.next_double());
        pos = {disc_cx + rad * std::cos(ang), 0.5 + rad * std::sin(ang), 0.0};
        bool clear = true;
        for (const auto& other : room_pos)
          if (euclidean_distance(other, pos) < 1.15) {
            clear = false;
            break;
          }
        if (clear || attempt >= 200) break;
      }
      room_pos.push_back(pos);
    }
    std::vector<size_t> order(room_pos.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return euclidean_distance(room_pos[a], goal_pos) > euclidean_distance(room_pos[b], goal_pos);
    });
    for (size_t k = 0; k < order.size(); ++k) {
      Node node;
      node.id = "r" + pad2(static_cast<int>(k));
      node.is_room = true;
      node.position = room_pos[order[k]];
      if (order[k] == 0) goal_id = node.id;
      nodes.push_back(node);
    }
  }

  EdgeSet edges;
  for (size_t a = 0; a < nodes.size(); ++a)
    for (size_t b = a + 1; b < nodes.size(); ++b)
      if (euclidean_distance(nodes[a].position, nodes[b].position) <= kConnectRadius)
        edges.add(nodes[a], nodes[b]);

  // Join any remaining components through their closest cross pair.
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
  std::vector<size_t> comp(nodes.size());
  while (true) {
    for (size_t i = 0; i < comp.size(); ++i) comp[i] = i;
    std::function<size_t(size_t)> find = [&](size_t x) {
      while (comp[x] != x) x = comp[x] = comp[comp[x]];
      return x;
    };
    for (const auto& [key, w] : edges.weights) {
      (void)w;
      const size_t a = find(index[key.first]), b = find(index[key.second]);
      if (a != b) comp[a] = b;
    }
    std::set<size_t> roots;
    for (size_t i = 0; i < comp.size(); ++i) roots.insert(find(i));
    if (roots.size() <= 1) break;
    size_t best_a = 0, best_b = 0;
    double best = -1.0;
    for (size_t a = 0; a < nodes.size(); ++a)
      for (size_t b = a + 1; b < nodes.size(); ++b) {
        if (find(a) == find(b)) continue;
        const double d = euclidean_distance(nodes[a].position, nodes[b].position);
        if (best < 0.0 || d < best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    edges.add(nodes[best_a], nodes[best_b]);
  }

  // With no rooms the goal falls back to the low-x end of the corridor band.
  if (goal_id.empty()) {
    double goal_x = 0.0;
    for (const auto& node : nodes)
      if (goal_id.empty() || node.position[0] < goal_x ||
          (node.position[0] == goal_x && node.id < goal_id)) {
        goal_id = node.id;
        goal_x = node.position[0];
      }
  }

  // Objects: the goal holds the target plus a decoy; every other room node
  // holds one distinct item.  Rooms with a direct edge to the goal also list
  // the target, the way scan annotations repeat an object on every viewpoint
  // it is visible from.  Embeddings are one-hot unit vectors.
  const int dim = spec.feature_dim;
  const int object_slots = dim - kFirstObjectSlot;
  auto object_slot = [&](const std::string& id) {
    return kFirstObjectSlot + static_cast<int>(fnv1a64(id + ":obj") % object_slots);
  };
  auto one_hot = [&](int slot) {
    std::vector<float> v(dim, 0.0f);
    v[slot] = 1.0f;
    return v;
  };

  std::map<std::string, std::vector<float>> embeddings;
  std::map<std::string, std::vector<std::string>> objects;
  if (n_room > 0) {
    for (const auto& node : nodes) {
      if (!node.is_room) continue;
      if (node.id == goal_id) {
        objects[node.id] = {"target_item", "decoy_item"};
        embeddings["target_item"] = one_hot(0);
        embeddings["decoy_item"] = one_hot(object_slot("decoy_item"));
      } else {
        const std::string obj = "item_" + node.id;
        if (edges.adjacency[goal_id].count(node.id)) objects[node.id].push_back("target_item");
        objects[node.id].push_back(obj);
        embeddings[obj] = one_hot(object_slot(obj));
      }
    }
  }

  std::vector<Viewpoint> viewpoints;
  for (const auto& node : nodes) {
    Viewpoint vp;
    vp.id = node.id;
    vp.position = node.position;
    const auto adj = edges.adjacency.find(node.id);
    if (adj != edges.adjacency.end())
      vp.neighbor_ids.assign(adj->second.begin(), adj->second.end());
    const auto obj = objects.find(node.id);
    if (obj != objects.end()) vp.object_ids = obj->second;
    viewpoints.push_back(std::move(vp));
  }

  NavGraph graph("scene" + std::to_string(spec.seed), std::move(viewpoints), edges.weights,
                 embeddings);
  const auto hops = hop_distances(graph, goal_id);

  // Feature painting targets.  The region-matched kind (fg in rooms, bg in
  // corridors) carries a goal-closeness ramp on kClosenessSlot (affine in
  // geodesic distance, so jittered node positions give every node a distinct
  // value) plus a constant presence marker on kPresenceSlot; the mismatched
  // kind keeps only the marker.  ori blends the two by mask fraction, so its
  // ramp copy is scaled to a few percent and further jittered per node, which
  // scrambles cross-node comparisons.
  double max_geo = 0.0;
  for (const auto& id : graph.viewpoint_ids())
    max_geo = std::max(max_geo, graph.geodesic(id, goal_id));
  const double ramp_span = max_geo + 1.0;
  std::map<std::string, std::vector<float>> fg_target, bg_target;
  std::map<std::string, double> mask_fraction;
  for (const auto& node : nodes) {
    std::vector<float> signal(dim, 0.0f);
    signal[kClosenessSlot] = static_cast<float>(
        kSignalValue * (ramp_span - graph.geodesic(node.id, goal_id)) / ramp_span);
    signal[kPresenceSlot] = static_cast<float>(kSignalValue);
    std::vector<float> flat(dim, 0.0f);
    flat[kPresenceSlot] = static_cast<float>(kSignalValue);
    fg_target[node.id] = node.is_room ? signal : flat;
    bg_target[node.id] = node.is_room ? flat : signal;
    // fg pixel share: very low in rooms, very high in corridors, so the ramp
    // reaches ori at only a few percent strength either way.
    const double u = unit_draw(spec.seed, fnv1a64("mask-fraction"), fnv1a64(node.id));
    mask_fraction[node.id] = node.is_room ? 0.02 + 0.03 * u : 0.95 + 0.03 * u;
  }

  // Panoramas reproduce the targets under extract_features: every pixel of a
  // fold block's views is painted with that block's target, masked pixels with
  // the fg value and unmasked with the bg value.
  const auto bounds = fold_bounds(dim);
  std::vector<int> slot_block(kPanoramaViews * kImageChannels);
  for (int k = 0; k < dim; ++k)
    for (int s = bounds[k]; s < bounds[k + 1]; ++s) slot_block[s] = k;

  SceneArtifacts artifacts;
  artifacts.panorama_dir = out_dir / "panoramas";
  std::filesystem::create_directories(artifacts.panorama_dir);
  const size_t pixel_count = static_cast<size_t>(spec.image_width) * spec.image_height;
  for (const auto& node : nodes) {
    Panorama pano;
    pano.viewpoint_id = node.id;
    BinaryMask mask;
    mask.width = spec.image_width;
    mask.height = spec.image_height;
    mask.bits.assign(pixel_count, 0);
    const auto ones = std::clamp<size_t>(
        static_cast<size_t>(std::lround(mask_fraction[node.id] * pixel_count)), 1,
        pixel_count - 1);
    std::fill(mask.bits.begin(), mask.bits.begin() + static_cast<long>(ones), 1);
    for (int view = 0; view < kPanoramaViews; ++view) {
      ViewImage image;
      image.width = spec.image_width;
      image.height = spec.image_height;
      image.pixels.resize(pixel_count * kImageChannels);
      for (int channel = 0; channel < kImageChannels; ++channel) {
        const int block = slot_block[view * kImageChannels + channel];
        const float fg_val = fg_target[node.id][block];
        const float bg_val = bg_target[node.id][block];
        for (size_t p = 0; p < pixel_count; ++p)
          image.pixels[p * kImageChannels + channel] = mask.bits[p] ? fg_val : bg_val;
      }
      pano.views.push_back(std::move(image));
      pano.masks.push_back(mask);
    }
    save_panorama(pano, artifacts.panorama_dir);
  }

  // Each region gets its own walk target: rooms head for the goal itself,
  // corridors for the doorway (the corridor node nearest the goal).  Keeping
  // corridor walks out of the rooms means the corridor-matched kind always
  // sees a bright ground truth during training; a walk target in the other
  // region would flatten its final step and fight the ramp weight.
  std::string corridor_goal = goal_id;
  if (n_room > 0 && n_corr > 0) {
    double best = -1.0;
    for (const auto& node : nodes) {
      if (node.is_room || !hops.count(node.id)) continue;
      const double d = graph.geodesic(node.id, goal_id);
      if (best < 0.0 || d < best) {
        best = d;
        corridor_goal = node.id;
      }
    }
  }
  auto region_goal = [&](const std::string& id) { return id[0] == 'r' ? goal_id : corridor_goal; };

  // Trajectories: one steepest-descent walk from every reachable viewpoint
  // goes into the training split, so the preference pass records a decision
  // at every node a rollout can visit.  The evaluation split keeps only
  // starts in the far part of each region (plus a minimum hop count), so it
  // measures long-range guidance rather than lucky spawns.  A region whose
  // distance floor leaves it empty relaxes to hops alone.
  double max_room_geo = 0.0, max_corr_geo = 0.0;
  for (const auto& node : nodes) {
    if (node.id == goal_id || node.id == corridor_goal || !hops.count(node.id)) continue;
    double& slot = node.is_room ? max_room_geo : max_corr_geo;
    slot = std::max(slot, graph.geodesic(node.id, region_goal(node.id)));
  }

  std::vector<Trajectory> train, val;
  int traj_counter = 0;
  auto emit = [&](const std::string& start, std::vector<Trajectory>& dest) {
    Trajectory traj;
    traj.traj_id = "traj" + std::to_string(100 + traj_counter++) + "_" + start;
    traj.scan_id = graph.scan_id();
    traj.goal_viewpoint = region_goal(start);
    traj.path = steepest_descent_path(graph, start, traj.goal_viewpoint);
    const bool room = start[0] == 'r';
    traj.target_object = room && n_room > 0 ? "target_item" : "";
    const std::string text = room ? "cross the rooms to the target item near the junction"
                                  : "head down the corridor and stop at the doorway";
    traj.instruction =
        make_instruction("route " + std::to_string(traj_counter) + ": " + text, spec.instr_dim);
    dest.push_back(std::move(traj));
  };
  auto is_walk_target = [&](const std::string& id) { return id == region_goal(id); };
  for (const auto& node : nodes)
    if (!is_walk_target(node.id) && hops.count(node.id)) emit(node.id, train);
  auto collect_val = [&](bool rooms) {
    const double geo_floor = kEvalFloorFraction * (rooms ? max_room_geo : max_corr_geo);
    std::vector<std::string> starts;
    for (const auto& node : nodes) {
      if (is_walk_target(node.id) || node.is_room != rooms || !hops.count(node.id)) continue;
      if (hops.at(node.id) < kMinStartHops) continue;
      if (graph.geodesic(node.id, region_goal(node.id)) < geo_floor) continue;
      starts.push_back(node.id);
    }
    if (starts.empty())
      for (const auto& node : nodes)
        if (!is_walk_target(node.id) && node.is_room == rooms && hops.count(node.id))
          starts.push_back(node.id);
    return starts;
  };
  for (const auto& id : collect_val(true)) emit(id, val);
  for (const auto& id : collect_val(false)) emit(id, val);

  artifacts.graph_path = out_dir / "graph.json";
  artifacts.train_path = out_dir / "trajectories_train.jsonl";
  artifacts.val_path = out_dir / "trajectories_val.jsonl";
  artifacts.goal_viewpoint = goal_id;
  artifacts.room_count = n_room;
  artifacts.corridor_count = n_corr;
  artifacts.train_trajectories = train.size();
  artifacts.val_trajectories = val.size();
  save_graph(graph, artifacts.graph_path);
  save_trajectories(train, artifacts.train_path);
  save_trajectories(val, artifacts.val_path);
  return artifacts;
}

}  // namespace cofa
