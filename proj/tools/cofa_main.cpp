#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cofa/experiment.hpp"
#include "cofa/navgraph.hpp"
#include "json.hpp"

namespace {

// Flag values shared by every subcommand; only flags the user actually passed
// override the config file.
struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  uint64_t seed_scene = 0;
  uint64_t seed_train = 0;
  uint64_t seed_episode = 0;
  int jobs = 1;
  bool force = false;

  CLI::Option* out_opt = nullptr;
  CLI::Option* scene_opt = nullptr;
  CLI::Option* train_opt = nullptr;
  CLI::Option* episode_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Experiment config JSON");
  flags.out_opt = cmd->add_option("--out", flags.out_dir, "Output directory (overrides config)");
  flags.scene_opt = cmd->add_option("--seed-scene", flags.seed_scene, "Scene generation seed");
  flags.train_opt = cmd->add_option("--seed-train", flags.seed_train, "Training seed");
  flags.episode_opt = cmd->add_option("--seed-episode", flags.seed_episode, "Episode seed");
  cmd->add_option("--jobs", flags.jobs, "Worker threads for parallel stages")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--force", flags.force, "Rerun stages even if their outputs exist");
}

cofa::ExperimentConfig resolve_config(const CommonFlags& flags) {
  cofa::ExperimentConfig config;
  if (!flags.config_path.empty()) config = cofa::load_config(flags.config_path);
  if (flags.out_opt && flags.out_opt->count()) config.output_dir = flags.out_dir;
  if (flags.scene_opt && flags.scene_opt->count()) config.seed_scene = flags.seed_scene;
  if (flags.train_opt && flags.train_opt->count()) config.seed_train = flags.seed_train;
  if (flags.episode_opt && flags.episode_opt->count()) config.seed_episode = flags.seed_episode;
  cofa::validate_config(config);
  return config;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int run_stage(const CommonFlags& flags, const std::string& stage) {
  const auto config = resolve_config(flags);
  cofa::run_pipeline(config, flags.force, flags.jobs, std::cout, stage);
  return 0;
}

int run_eval(const CommonFlags& flags) {
  const auto config = resolve_config(flags);
  const auto episodes_dir = config.resolve(config.episodes_dir);
  const auto summary_dir = config.resolve(config.summary_dir);

  std::vector<std::pair<std::string, cofa::MetricSummary>> rows;
  nlohmann::json strategies = nlohmann::json::object();
  for (const auto& name : cofa::kStrategyNames) {
    const auto path = episodes_dir / ("episodes_" + name + ".jsonl");
    if (!std::filesystem::exists(path)) continue;
    const auto episodes = cofa::load_episodes(path);
    const auto summary = cofa::summarize(episodes);
    rows.emplace_back(name, summary);
    nlohmann::json entry;
    entry["episode_count"] = summary.episode_count;
    entry["tl"] = summary.tl;
    entry["ne"] = summary.ne;
    entry["sr"] = summary.sr;
    entry["spl"] = summary.spl;
    entry["rgs_applicable"] = summary.rgs_applicable;
    if (summary.rgs_applicable) {
      entry["rgs"] = summary.rgs;
      entry["rgspl"] = summary.rgspl;
    }
    strategies[name] = std::move(entry);
  }
  if (rows.empty())
    throw std::runtime_error("eval: no episode files found under '" + episodes_dir.string() + "'");

  const auto table = cofa::format_summary_table(rows);
  std::cout << table;

  std::filesystem::create_directories(summary_dir);
  nlohmann::json doc;
  doc["created_utc"] = utc_now();
  doc["strategies"] = std::move(strategies);
  std::ofstream out(summary_dir / "summaries.json");
  out << doc.dump(2) << "\n";
  std::cout << "wrote " << (summary_dir / "summaries.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-driven feature augmentation harness for discrete navigation"};
  app.require_subcommand(1);

  struct SubSpec {
    const char* name;
    const char* help;
    std::string stage;
  };
  const SubSpec specs[] = {
      {"generate", "Generate the synthetic scene (graph, panoramas, trajectories)", "generate"},
      {"mask", "Extract fg/bg/ori features from panoramas via their masks", "mask"},
      {"ingest", "Validate feature coverage against the graph", "ingest"},
      {"train", "Train the three per-kind policies", "train"},
      {"vote", "Run the frozen preference pass and write the vote table", "vote"},
      {"rollout", "Evaluate every augmentation strategy on the validation split", "rollout"},
      {"analyze", "Write the per-split and per-region label distribution CSV", "analyze"},
      {"pipeline", "Run all stages in order", ""},
  };

  std::vector<std::unique_ptr<CommonFlags>> flag_sets;
  std::vector<std::pair<CLI::App*, std::string>> stage_cmds;

  int nodes = 0;
  double corridor_fraction = -1.0;
  int dim = 0;
  CLI::Option* nodes_opt = nullptr;
  CLI::Option* fraction_opt = nullptr;
  CLI::Option* dim_opt = nullptr;

  for (const auto& spec : specs) {
    auto* cmd = app.add_subcommand(spec.name, spec.help);
    auto flags = std::make_unique<CommonFlags>();
    add_common(cmd, *flags);
    if (std::string(spec.name) == "generate") {
      nodes_opt = cmd->add_option("--nodes", nodes, "Viewpoint count")->check(CLI::Range(2, 100000));
      fraction_opt = cmd->add_option("--corridor-fraction", corridor_fraction,
                                     "Fraction of corridor nodes")
                         ->check(CLI::Range(0.0, 1.0));
      dim_opt = cmd->add_option("--dim", dim, "Feature dimension")->check(CLI::Range(8, 108));
    }
    stage_cmds.emplace_back(cmd, spec.stage);
    flag_sets.push_back(std::move(flags));
  }

  auto* eval_cmd = app.add_subcommand("eval", "Summarize episode files into a metrics table");
  auto eval_flags = std::make_unique<CommonFlags>();
  add_common(eval_cmd, *eval_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed()) return run_eval(*eval_flags);
    for (size_t i = 0; i < stage_cmds.size(); ++i) {
      auto* cmd = stage_cmds[i].first;
      if (!cmd->parsed()) continue;
      auto& flags = *flag_sets[i];
      if (std::string(cmd->get_name()) == "generate") {
        auto config = resolve_config(flags);
        if (nodes_opt->count()) config.node_count = nodes;
        if (fraction_opt->count()) config.corridor_fraction = corridor_fraction;
        if (dim_opt->count()) config.feature_dim = dim;
        cofa::validate_config(config);
        cofa::run_pipeline(config, flags.force, flags.jobs, std::cout, "generate");
        return 0;
      }
      return run_stage(flags, stage_cmds[i].second);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
