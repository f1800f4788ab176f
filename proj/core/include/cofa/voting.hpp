#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cofa/agent.hpp"
#include "cofa/feature_store.hpp"
#include "cofa/trajectory.hpp"

namespace cofa {

class NavGraph;

// One preference-pass entry: the three frozen agents' scores at one trajectory step.
// scores is indexed by FeatureKind (ori, fg, bg).
struct PreferenceEntry {
  std::string traj_id;
  int step_index = 0;
  std::string viewpoint_id;
  std::array<double, 3> scores{};
};

struct PreferenceTable {
  std::vector<PreferenceEntry> entries;
};

struct VoteRecord {
  FeatureKind final = FeatureKind::ori;
  std::array<int, 3> counts{};  // indexed by FeatureKind
};

struct VoteTable {
  std::map<std::string, VoteRecord> records;  // keyed by viewpoint id

  bool has(const std::string& viewpoint_id) const { return records.count(viewpoint_id) != 0; }
  // Viewpoints without any vote fall back to ori.
  FeatureKind final_kind(const std::string& viewpoint_id) const;
};

// Scores every trajectory step with each frozen agent, each using features of
// its own kind throughout.  `jobs` parallelizes over trajectories.
PreferenceTable preference_pass(const std::vector<PolicyAgent>& agents,
                                const std::vector<Trajectory>& trajectories,
                                const FeatureStore& store, const NavGraph& graph, int jobs = 1);

// Argmin over the three scores; ties go to the earliest kind in ori < fg < bg.
FeatureKind vote_trajectory(const std::array<double, 3>& scores);

// Majority vote; ties among maximal counts go to the earliest kind in ori < fg < bg.
FeatureKind vote_majority(const std::vector<FeatureKind>& labels);

VoteTable build_vote_table(const PreferenceTable& pref);

// JSON map viewpoint_id -> {"final": kind, "counts": {"ori": n, "fg": n, "bg": n}}.
void save_vote_table(const VoteTable& table, const std::filesystem::path& path);
VoteTable load_vote_table(const std::filesystem::path& path);

}  // namespace cofa
