#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cofa/agent.hpp"
#include "cofa/augment.hpp"
#include "cofa/trajectory.hpp"

namespace cofa {

class NavGraph;

struct RolloutConfig {
  int step_limit = 20;
  double success_radius = 3.0;
  uint64_t episode_seed = 0;
};

struct EpisodeResult {
  std::string traj_id;
  std::vector<std::string> executed_path;
  std::string stop_viewpoint;
  std::string grounded_object;  // empty when nothing was grounded
  double tl = 0.0;
  double ne = 0.0;
  int success = 0;
  double spl = 0.0;
  int rgs = 0;
  double rgspl = 0.0;
  int steps = 0;
  bool hit_step_limit = false;
  bool rgs_applicable = false;  // false when the scan carries no object embeddings
};

struct MetricSummary {
  size_t episode_count = 0;
  double tl = 0.0;
  double ne = 0.0;
  double sr = 0.0;
  double spl = 0.0;
  double rgs = 0.0;
  double rgspl = 0.0;
  bool rgs_applicable = false;
};

// success * shortest / max(shortest, tl); a zero-length task counts as success.
double compute_spl(int success, double shortest, double tl);

// Builds the decision context at `viewpoint_id` with every feature (current and
// per-candidate) chosen by the strategy.  Stochastic draws are keyed by
// (draw_seed, traj_key, step, slot): slot 0 is the current viewpoint, slot j+1
// is candidate j.  gt_next = nullopt marks a STOP step.
ActionContext strategy_context(const NavGraph& graph, const FeatureStore& store,
                               const AugmentationStrategy& strategy,
                               const std::string& viewpoint_id,
                               const std::optional<std::string>& gt_next, uint64_t draw_seed,
                               uint64_t traj_key, int step);

// Greedy rollout from the trajectory's first viewpoint; terminates on STOP or
// after step_limit moves, whichever comes first.
EpisodeResult run_episode(const PolicyAgent& policy, const AugmentationStrategy& strategy,
                          const Trajectory& traj, const NavGraph& graph, const FeatureStore& store,
                          const RolloutConfig& config);

// Baseline: uniform choice among neighbors plus STOP at every step.
EpisodeResult run_random_walk_episode(const Trajectory& traj, const NavGraph& graph,
                                      const FeatureStore& store, const RolloutConfig& config);

MetricSummary summarize(const std::vector<EpisodeResult>& episodes);

struct SplitEvaluation {
  std::vector<EpisodeResult> episodes;  // in trajectory order
  MetricSummary summary;
};

SplitEvaluation evaluate_split(const PolicyAgent& policy, const AugmentationStrategy& strategy,
                               const std::vector<Trajectory>& trajectories, const NavGraph& graph,
                               const FeatureStore& store, const RolloutConfig& config,
                               int jobs = 1);

// Percentage of distinct visited viewpoints labeled ori/fg/bg by the table
// (unlisted viewpoints count as ori).  Indexed by FeatureKind; sums to 100.
std::array<double, 3> preference_distribution(const VoteTable& table,
                                              const std::vector<Trajectory>& trajectories);

// Episode records as JSON lines.
void save_episodes(const std::vector<EpisodeResult>& episodes, const std::filesystem::path& path);
std::vector<EpisodeResult> load_episodes(const std::filesystem::path& path);

// Summary JSON; created_utc is stored verbatim so callers control timestamping.
void save_summary(const MetricSummary& summary, const std::string& split_name,
                  const std::string& created_utc, const std::filesystem::path& path);
MetricSummary load_summary(const std::filesystem::path& path);

// Aligned text table, one row per named summary, columns TL SR SPL RGS RGSPL
// (rates scaled to percent; "n/a" for inapplicable grounding columns).
std::string format_summary_table(const std::vector<std::pair<std::string, MetricSummary>>& rows);

struct DistributionRow {
  std::string split;
  FeatureKind kind = FeatureKind::ori;
  double percent = 0.0;
};

// CSV with header "split,kind,percent".
void save_distribution_csv(const std::vector<DistributionRow>& rows,
                           const std::filesystem::path& path);

}  // namespace cofa
