#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace cofa {

struct Viewpoint {
  std::string id;
  std::array<double, 3> position{0.0, 0.0, 0.0};
  std::vector<std::string> neighbor_ids;  // ordered, no duplicates, no self
  std::vector<std::string> object_ids;    // objects visible here, may be empty
};

// Discrete navigation environment for one scan: viewpoints, undirected
// weighted connectivity, and lazily memoized geodesic distances.
//
// Immutable after construction; geodesic() is safe to call concurrently
// (the memo cache is mutex-guarded), or call precompute_geodesics() once
// before fanning out workers.
class NavGraph {
 public:
  NavGraph() = default;
  NavGraph(std::string scan_id, std::vector<Viewpoint> viewpoints,
           std::map<std::pair<std::string, std::string>, double> edge_weights,
           std::map<std::string, std::vector<float>> object_embeddings = {});

  NavGraph(const NavGraph& other);
  NavGraph& operator=(const NavGraph& other);
  NavGraph(NavGraph&&) noexcept = default;
  NavGraph& operator=(NavGraph&&) noexcept = default;

  const std::string& scan_id() const { return scan_id_; }
  size_t size() const { return viewpoints_.size(); }

  bool has_viewpoint(const std::string& id) const;
  const Viewpoint& viewpoint(const std::string& id) const;

  // Ids in file/insertion order.
  const std::vector<std::string>& viewpoint_ids() const { return order_; }

  bool has_edge(const std::string& u, const std::string& v) const;
  double edge_weight(const std::string& u, const std::string& v) const;

  // Shortest weighted path length. geodesic(u, u) == 0.
  double geodesic(const std::string& u, const std::string& v) const;

  // Eagerly fills the per-source distance cache for every viewpoint.
  void precompute_geodesics() const;

  // Optional object-embedding table ("object_embeddings" key in the graph
  // file); empty when the file has none.
  const std::map<std::string, std::vector<float>>& object_embeddings() const {
    return object_embeddings_;
  }

 private:
  const std::vector<double>& distances_from(const std::string& source) const;

  std::string scan_id_;
  std::vector<Viewpoint> viewpoints_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, size_t> index_;
  std::map<std::pair<std::string, std::string>, double> edge_weights_;  // key: min,max id
  std::map<std::string, std::vector<float>> object_embeddings_;

  mutable std::mutex cache_mu_;
  mutable std::unordered_map<size_t, std::vector<double>> geodesic_cache_;
};

// Parses and validates a graph file. Throws std::runtime_error naming the
// offending viewpoint or edge on: parse errors, unknown endpoints, self
// loops, duplicate or conflicting edge entries, missing reverse edges,
// non-positive weights, and disconnected graphs.
NavGraph load_graph(const std::filesystem::path& path);

// Serializes a graph back to the file format (used by the scene generator).
void save_graph(const NavGraph& graph, const std::filesystem::path& path);

double euclidean_distance(const std::array<double, 3>& a, const std::array<double, 3>& b);

}  // namespace cofa
