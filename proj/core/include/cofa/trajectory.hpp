#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cofa/agent.hpp"

namespace cofa {

class NavGraph;

struct Trajectory {
  std::string traj_id;
  std::string scan_id;
  std::vector<std::string> path;  // >= 1 viewpoints; last one is the goal
  InstructionRecord instruction;
  std::string goal_viewpoint;
  std::string target_object;  // empty when the episode has no grounding target

  // Decision points along the path: one per position, the last being a STOP step.
  size_t step_count() const { return path.size(); }
};

// Throws unless the path is non-empty, consecutive viewpoints are neighbors,
// the goal equals the last path viewpoint, and the scan matches the graph.
void validate_trajectory(const Trajectory& traj, const NavGraph& graph);

// JSON lines, one object per trajectory:
//   {"traj_id", "scan_id", "path", "instruction", "goal_viewpoint", "target_object"?}
// Instruction embeddings are recomputed from the text on load.
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path, int instr_dim = 16);
void save_trajectories(const std::vector<Trajectory>& trajectories,
                       const std::filesystem::path& path);

}  // namespace cofa
