#include "cofa/navgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cofa {

using nlohmann::json;

double euclidean_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

namespace {

std::pair<std::string, std::string> unordered_key(const std::string& u, const std::string& v) {
  return u < v ? std::make_pair(u, v) : std::make_pair(v, u);
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("graph: " + msg); }

}  // namespace

NavGraph::NavGraph(std::string scan_id, std::vector<Viewpoint> viewpoints,
                   std::map<std::pair<std::string, std::string>, double> edge_weights,
                   std::map<std::string, std::vector<float>> object_embeddings)
    : scan_id_(std::move(scan_id)),
      viewpoints_(std::move(viewpoints)),
      edge_weights_(std::move(edge_weights)),
      object_embeddings_(std::move(object_embeddings)) {
  order_.reserve(viewpoints_.size());
  for (size_t i = 0; i < viewpoints_.size(); ++i) {
    const auto& vp = viewpoints_[i];
    if (!index_.emplace(vp.id, i).second) fail("duplicate viewpoint id '" + vp.id + "'");
    order_.push_back(vp.id);
  }

  // Invariant checks: neighbor symmetry, no self loops, no duplicates,
  // positive weights, connectivity.
  for (const auto& vp : viewpoints_) {
    std::set<std::string> seen;
    for (const auto& n : vp.neighbor_ids) {
      if (n == vp.id) fail("self loop at viewpoint '" + vp.id + "'");
      if (!seen.insert(n).second) fail("duplicate neighbor '" + n + "' at viewpoint '" + vp.id + "'");
      auto it = index_.find(n);
      if (it == index_.end()) fail("edge " + vp.id + "->" + n + " references unknown viewpoint '" + n + "'");
      const auto& back = viewpoints_[it->second].neighbor_ids;
      if (std::find(back.begin(), back.end(), vp.id) == back.end())
        fail("asymmetric edge: " + vp.id + "->" + n + " has no reverse edge " + n + "->" + vp.id);
      auto w = edge_weights_.find(unordered_key(vp.id, n));
      if (w == edge_weights_.end()) fail("edge " + vp.id + "--" + n + " has no weight entry");
      if (!(w->second > 0.0)) {
        std::ostringstream os;
        os << "edge " << vp.id << "--" << n << " has non-positive weight " << w->second;
        fail(os.str());
      }
    }
  }

  if (!viewpoints_.empty()) {
    std::vector<bool> reached(viewpoints_.size(), false);
    std::queue<size_t> frontier;
    frontier.push(0);
    reached[0] = true;
    size_t count = 1;
    while (!frontier.empty()) {
      size_t cur = frontier.front();
      frontier.pop();
      for (const auto& n : viewpoints_[cur].neighbor_ids) {
        size_t ni = index_.at(n);
        if (!reached[ni]) {
          reached[ni] = true;
          ++count;
          frontier.push(ni);
        }
      }
    }
    if (count != viewpoints_.size()) {
      for (size_t i = 0; i < viewpoints_.size(); ++i)
        if (!reached[i])
          fail("disconnected graph: viewpoint '" + viewpoints_[i].id + "' is unreachable from '" +
               viewpoints_[0].id + "'");
    }
  }
}

NavGraph::NavGraph(const NavGraph& other)
    : scan_id_(other.scan_id_),
      viewpoints_(other.viewpoints_),
      order_(other.order_),
      index_(other.index_),
      edge_weights_(other.edge_weights_),
      object_embeddings_(other.object_embeddings_) {}

NavGraph& NavGraph::operator=(const NavGraph& other) {
  if (this != &other) {
    scan_id_ = other.scan_id_;
    viewpoints_ = other.viewpoints_;
    order_ = other.order_;
    index_ = other.index_;
    edge_weights_ = other.edge_weights_;
    object_embeddings_ = other.object_embeddings_;
    std::lock_guard<std::mutex> lock(cache_mu_);
    geodesic_cache_.clear();
  }
  return *this;
}

bool NavGraph::has_viewpoint(const std::string& id) const { return index_.count(id) > 0; }

const Viewpoint& NavGraph::viewpoint(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail("unknown viewpoint '" + id + "'");
  return viewpoints_[it->second];
}

bool NavGraph::has_edge(const std::string& u, const std::string& v) const {
  return edge_weights_.count(unordered_key(u, v)) > 0;
}

double NavGraph::edge_weight(const std::string& u, const std::string& v) const {
  auto it = edge_weights_.find(unordered_key(u, v));
  if (it == edge_weights_.end()) fail("no edge " + u + "--" + v);
  return it->second;
}

const std::vector<double>& NavGraph::distances_from(const std::string& source) const {
  auto src_it = index_.find(source);
  if (src_it == index_.end()) fail("unknown viewpoint '" + source + "'");
  const size_t src = src_it->second;

  std::lock_guard<std::mutex> lock(cache_mu_);
  auto cached = geodesic_cache_.find(src);
  if (cached != geodesic_cache_.end()) return cached->second;

  std::vector<double> dist(viewpoints_.size(), std::numeric_limits<double>::infinity());
  dist[src] = 0.0;
  using Item = std::pair<double, size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  heap.emplace(0.0, src);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& nid : viewpoints_[u].neighbor_ids) {
      const size_t v = index_.at(nid);
      const double nd = d + edge_weights_.at(unordered_key(viewpoints_[u].id, nid));
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return geodesic_cache_.emplace(src, std::move(dist)).first->second;
}

double NavGraph::geodesic(const std::string& u, const std::string& v) const {
  const auto& dist = distances_from(u);
  auto it = index_.find(v);
  if (it == index_.end()) fail("unknown viewpoint '" + v + "'");
  return dist[it->second];
}

void NavGraph::precompute_geodesics() const {
  for (const auto& id : order_) distances_from(id);
}

NavGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail("parse error in '" + path.string() + "': " + e.what());
  }

  std::vector<Viewpoint> viewpoints;
  std::map<std::string, std::array<double, 3>> positions;
  try {
    if (!doc.is_object() || !doc.contains("viewpoints") || !doc.contains("edges"))
      fail("parse error: expected object with 'viewpoints' and 'edges'");
    for (const auto& jv : doc.at("viewpoints")) {
      Viewpoint vp;
      vp.id = jv.at("id").get<std::string>();
      const auto& pos = jv.at("position");
      if (!pos.is_array() || pos.size() != 3) fail("viewpoint '" + vp.id + "' position must be [x,y,z]");
      for (size_t i = 0; i < 3; ++i) vp.position[i] = pos[i].get<double>();
      if (jv.contains("objects"))
        for (const auto& o : jv.at("objects")) vp.object_ids.push_back(o.get<std::string>());
      positions[vp.id] = vp.position;
      viewpoints.push_back(std::move(vp));
    }

    // Each edge entry is a directed claim; a valid file carries both
    // directions. Weight omitted => Euclidean distance between endpoints.
    std::map<std::pair<std::string, std::string>, std::optional<double>> directed;
    for (const auto& je : doc.at("edges")) {
      if (!je.is_array() || je.size() < 2 || je.size() > 3) fail("edge entries must be [u, v] or [u, v, weight]");
      const std::string u = je[0].get<std::string>();
      const std::string v = je[1].get<std::string>();
      if (!positions.count(u)) fail("edge " + u + "->" + v + " references unknown viewpoint '" + u + "'");
      if (!positions.count(v)) fail("edge " + u + "->" + v + " references unknown viewpoint '" + v + "'");
      if (u == v) fail("self loop at viewpoint '" + u + "'");
      std::optional<double> w;
      if (je.size() == 3) w = je[2].get<double>();
      auto [it, inserted] = directed.emplace(std::make_pair(u, v), w);
      if (!inserted) fail("duplicate edge entry " + u + "->" + v);
      (void)it;
    }

    std::map<std::pair<std::string, std::string>, double> weights;
    std::map<std::string, std::vector<std::string>> neighbors;
    for (const auto& [key, w] : directed) {
      const auto& [u, v] = key;
      auto rev = directed.find(std::make_pair(v, u));
      if (rev == directed.end())
        fail("asymmetric edge: " + u + "->" + v + " has no reverse edge " + v + "->" + u);
      const auto ukey = unordered_key(u, v);
      double resolved;
      if (w.has_value() && rev->second.has_value()) {
        if (*w != *rev->second)
          fail("edge " + u + "--" + v + " has conflicting weights in the two directions");
        resolved = *w;
      } else if (w.has_value()) {
        resolved = *w;
      } else if (rev->second.has_value()) {
        resolved = *rev->second;
      } else {
        resolved = euclidean_distance(positions.at(u), positions.at(v));
      }
      auto existing = weights.find(ukey);
      if (existing == weights.end()) {
        weights.emplace(ukey, resolved);
      } else if (existing->second != resolved) {
        fail("edge " + u + "--" + v + " has conflicting weights in the two directions");
      }
      neighbors[u].push_back(v);
    }

    for (auto& vp : viewpoints) {
      auto it = neighbors.find(vp.id);
      if (it != neighbors.end()) vp.neighbor_ids = it->second;
    }

    std::map<std::string, std::vector<float>> embeddings;
    if (doc.contains("object_embeddings")) {
      for (const auto& [oid, vec] : doc.at("object_embeddings").items()) {
        std::vector<float> e;
        for (const auto& x : vec) e.push_back(x.get<float>());
        embeddings[oid] = std::move(e);
      }
    }

    return NavGraph(doc.value("scan_id", std::string("scan")), std::move(viewpoints),
                    std::move(weights), std::move(embeddings));
  } catch (const json::exception& e) {
    fail("parse error in '" + path.string() + "': " + e.what());
  }
}

void save_graph(const NavGraph& graph, const std::filesystem::path& path) {
  json doc;
  doc["scan_id"] = graph.scan_id();
  doc["viewpoints"] = json::array();
  json edges = json::array();
  for (const auto& id : graph.viewpoint_ids()) {
    const auto& vp = graph.viewpoint(id);
    json jv;
    jv["id"] = vp.id;
    jv["position"] = {vp.position[0], vp.position[1], vp.position[2]};
    jv["objects"] = vp.object_ids;
    doc["viewpoints"].push_back(jv);
    for (const auto& n : vp.neighbor_ids) edges.push_back({vp.id, n, graph.edge_weight(vp.id, n)});
  }
  doc["edges"] = std::move(edges);
  if (!graph.object_embeddings().empty()) {
    json table = json::object();
    for (const auto& [oid, vec] : graph.object_embeddings()) table[oid] = vec;
    doc["object_embeddings"] = std::move(table);
  }
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace cofa
