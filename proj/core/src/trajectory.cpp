#include "cofa/trajectory.hpp"

#include <fstream>
#include <stdexcept>

#include "cofa/navgraph.hpp"
#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("trajectory: " + msg); }

}  // namespace

void validate_trajectory(const Trajectory& traj, const NavGraph& graph) {
  if (traj.path.empty()) fail("'" + traj.traj_id + "' has an empty path");
  if (traj.scan_id != graph.scan_id())
    fail("'" + traj.traj_id + "' belongs to scan '" + traj.scan_id + "', graph is '" +
         graph.scan_id() + "'");
  for (const auto& vp : traj.path)
    if (!graph.has_viewpoint(vp))
      fail("'" + traj.traj_id + "' visits unknown viewpoint '" + vp + "'");
  for (size_t i = 0; i + 1 < traj.path.size(); ++i)
    if (!graph.has_edge(traj.path[i], traj.path[i + 1]))
      fail("'" + traj.traj_id + "' steps from '" + traj.path[i] + "' to non-neighbor '" +
           traj.path[i + 1] + "'");
  if (traj.goal_viewpoint != traj.path.back())
    fail("'" + traj.traj_id + "' goal '" + traj.goal_viewpoint + "' is not the last path viewpoint");
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path, int instr_dim) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  std::vector<Trajectory> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      fail("parse error at " + path.filename().string() + ":" + std::to_string(line_no) + ": " +
           e.what());
    }
    Trajectory traj;
    traj.traj_id = doc.at("traj_id").get<std::string>();
    traj.scan_id = doc.at("scan_id").get<std::string>();
    traj.path = doc.at("path").get<std::vector<std::string>>();
    traj.instruction = make_instruction(doc.at("instruction").get<std::string>(), instr_dim);
    traj.goal_viewpoint = doc.at("goal_viewpoint").get<std::string>();
    traj.target_object = doc.value("target_object", std::string());
    out.push_back(std::move(traj));
  }
  return out;
}

void save_trajectories(const std::vector<Trajectory>& trajectories,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  for (const auto& traj : trajectories) {
    json doc;
    doc["traj_id"] = traj.traj_id;
    doc["scan_id"] = traj.scan_id;
    doc["path"] = traj.path;
    doc["instruction"] = traj.instruction.text;
    doc["goal_viewpoint"] = traj.goal_viewpoint;
    if (!traj.target_object.empty()) doc["target_object"] = traj.target_object;
    out << doc.dump() << "\n";
  }
}

}  // namespace cofa
