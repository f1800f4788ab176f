#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cofa/rollout.hpp"
#include "cofa/scene_gen.hpp"

namespace cofa {

// One self-describing experiment bundle.  Artifact paths are relative to
// output_dir; the CLI overrides seeds and jobs from flags.
struct ExperimentConfig {
  std::string output_dir = "out";

  std::string graph_path = "graph.json";
  std::string panorama_dir = "panoramas";
  std::string features_manifest = "features.json";
  std::string features_blob = "features.blob";
  std::string train_trajectories = "trajectories_train.jsonl";
  std::string val_trajectories = "trajectories_val.jsonl";
  std::string agents_dir = "agents";
  std::string vote_table_path = "vote_table.json";
  std::string episodes_dir = "episodes";
  std::string summary_dir = "summaries";
  std::string analysis_path = "distribution.csv";

  // Strategy for the single-strategy `rollout --only` path and config examples:
  // original | replace_fg | replace_bg | stochastic_fg | stochastic_bg | cofa.
  std::string strategy = "cofa";
  uint64_t stochastic_seed = 0;

  int node_count = 96;
  double corridor_fraction = 0.5;
  int feature_dim = 64;
  int instr_dim = 16;
  int image_width = 8;
  int image_height = 8;

  int epochs = 500;
  double lr = 0.5;
  int step_limit = 30;
  double success_radius = 3.0;

  uint64_t seed_scene = 7;
  uint64_t seed_train = 11;
  uint64_t seed_episode = 13;

  bool operator==(const ExperimentConfig&) const = default;

  std::filesystem::path resolve(const std::string& relative) const {
    return std::filesystem::path(output_dir) / relative;
  }
  SceneSpec scene_spec() const;
  RolloutConfig rollout_config() const;
};

void validate_config(const ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);

// The comparison evaluated by the rollout stage, in canonical row order:
// original, replace_fg, replace_bg, stochastic_fg, stochastic_bg, cofa,
// random_walk.
extern const std::vector<std::string> kStrategyNames;

// Builds the named strategy; "cofa" captures the given vote table.
AugmentationStrategy make_strategy(const std::string& name, uint64_t stochastic_seed,
                                   const VoteTable& table);

// Training samples with every feature of one kind.
std::vector<TrainSample> kind_dataset(const NavGraph& graph, const FeatureStore& store,
                                      FeatureKind kind,
                                      const std::vector<Trajectory>& trajectories);

// Stage names in execution order: generate, mask, ingest, train, vote,
// rollout, analyze.  A stage is skipped when its outputs already exist and
// force is false; failures carry the stage name.
struct PipelineResult {
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
};

// only_stage = "" runs every stage in order; otherwise just the named one
// (its inputs must already exist on disk).
PipelineResult run_pipeline(const ExperimentConfig& config, bool force, int jobs,
                            std::ostream& log, const std::string& only_stage = "");

}  // namespace cofa
