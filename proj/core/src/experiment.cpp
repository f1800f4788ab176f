#include "cofa/experiment.hpp"

#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "cofa/disentangle.hpp"
#include "cofa/navgraph.hpp"
#include "cofa/rng.hpp"
#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("config: " + msg); }

}  // namespace

const std::vector<std::string> kStrategyNames = {
    "original",      "replace_fg", "replace_bg", "stochastic_fg",
    "stochastic_bg", "cofa",       "random_walk"};

SceneSpec ExperimentConfig::scene_spec() const {
  SceneSpec spec;
  spec.seed = seed_scene;
  spec.node_count = node_count;
  spec.corridor_fraction = corridor_fraction;
  spec.feature_dim = feature_dim;
  spec.instr_dim = instr_dim;
  spec.image_width = image_width;
  spec.image_height = image_height;
  return spec;
}

RolloutConfig ExperimentConfig::rollout_config() const {
  RolloutConfig rc;
  rc.step_limit = step_limit;
  rc.success_radius = success_radius;
  rc.episode_seed = seed_episode;
  return rc;
}

void validate_config(const ExperimentConfig& config) {
  validate_scene_spec(config.scene_spec());
  if (config.step_limit < 1) fail("step_limit must be at least 1");
  if (config.success_radius <= 0.0) fail("success_radius must be positive");
  if (config.epochs < 0) fail("epochs must be non-negative");
  if (config.output_dir.empty()) fail("output_dir must be set");
  bool known = false;
  for (const auto& name : kStrategyNames) known = known || name == config.strategy;
  if (!known || config.strategy == "random_walk")
    fail("unknown strategy '" + config.strategy + "'");
}

std::string config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["output_dir"] = c.output_dir;
  doc["paths"] = {{"graph", c.graph_path},
                  {"panoramas", c.panorama_dir},
                  {"features_manifest", c.features_manifest},
                  {"features_blob", c.features_blob},
                  {"train_trajectories", c.train_trajectories},
                  {"val_trajectories", c.val_trajectories},
                  {"agents_dir", c.agents_dir},
                  {"vote_table", c.vote_table_path},
                  {"episodes_dir", c.episodes_dir},
                  {"summary_dir", c.summary_dir},
                  {"analysis", c.analysis_path}};
  doc["strategy"] = {{"name", c.strategy}, {"stochastic_seed", c.stochastic_seed}};
  doc["scene"] = {{"node_count", c.node_count},
                  {"corridor_fraction", c.corridor_fraction},
                  {"feature_dim", c.feature_dim},
                  {"instr_dim", c.instr_dim},
                  {"image_width", c.image_width},
                  {"image_height", c.image_height}};
  doc["training"] = {{"epochs", c.epochs}, {"lr", c.lr}};
  doc["rollout"] = {{"step_limit", c.step_limit}, {"success_radius", c.success_radius}};
  doc["seeds"] = {{"scene", c.seed_scene}, {"train", c.seed_train}, {"episode", c.seed_episode}};
  return doc.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("parse error: ") + e.what());
  }
  ExperimentConfig c;
  c.output_dir = doc.value("output_dir", c.output_dir);
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    c.graph_path = p.value("graph", c.graph_path);
    c.panorama_dir = p.value("panoramas", c.panorama_dir);
    c.features_manifest = p.value("features_manifest", c.features_manifest);
    c.features_blob = p.value("features_blob", c.features_blob);
    c.train_trajectories = p.value("train_trajectories", c.train_trajectories);
    c.val_trajectories = p.value("val_trajectories", c.val_trajectories);
    c.agents_dir = p.value("agents_dir", c.agents_dir);
    c.vote_table_path = p.value("vote_table", c.vote_table_path);
    c.episodes_dir = p.value("episodes_dir", c.episodes_dir);
    c.summary_dir = p.value("summary_dir", c.summary_dir);
    c.analysis_path = p.value("analysis", c.analysis_path);
  }
  if (doc.contains("strategy")) {
    c.strategy = doc["strategy"].value("name", c.strategy);
    c.stochastic_seed = doc["strategy"].value("stochastic_seed", c.stochastic_seed);
  }
  if (doc.contains("scene")) {
    const auto& s = doc["scene"];
    c.node_count = s.value("node_count", c.node_count);
    c.corridor_fraction = s.value("corridor_fraction", c.corridor_fraction);
    c.feature_dim = s.value("feature_dim", c.feature_dim);
    c.instr_dim = s.value("instr_dim", c.instr_dim);
    c.image_width = s.value("image_width", c.image_width);
    c.image_height = s.value("image_height", c.image_height);
  }
  if (doc.contains("training")) {
    c.epochs = doc["training"].value("epochs", c.epochs);
    c.lr = doc["training"].value("lr", c.lr);
  }
  if (doc.contains("rollout")) {
    c.step_limit = doc["rollout"].value("step_limit", c.step_limit);
    c.success_radius = doc["rollout"].value("success_radius", c.success_radius);
  }
  if (doc.contains("seeds")) {
    c.seed_scene = doc["seeds"].value("scene", c.seed_scene);
    c.seed_train = doc["seeds"].value("train", c.seed_train);
    c.seed_episode = doc["seeds"].value("episode", c.seed_episode);
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << config_to_json(config);
}

AugmentationStrategy make_strategy(const std::string& name, uint64_t stochastic_seed,
                                   const VoteTable& table) {
  if (name == "original") return Original{};
  if (name == "replace_fg") return Replace{FeatureKind::fg};
  if (name == "replace_bg") return Replace{FeatureKind::bg};
  if (name == "stochastic_fg") return Stochastic{FeatureKind::fg, stochastic_seed};
  if (name == "stochastic_bg") return Stochastic{FeatureKind::bg, stochastic_seed};
  if (name == "cofa") return Cofa{table};
  fail("unknown strategy '" + name + "'");
}

std::vector<TrainSample> kind_dataset(const NavGraph& graph, const FeatureStore& store,
                                      FeatureKind kind,
                                      const std::vector<Trajectory>& trajectories) {
  std::vector<TrainSample> samples;
  for (const auto& traj : trajectories) {
    validate_trajectory(traj, graph);
    // Move steps only: the gt at position s is the next path viewpoint.  The
    // goal's STOP decision is never supervised; episodes end by radius or
    // step limit instead, so stop pressure cannot fight descent pressure on
    // the shared candidate weights.
    for (size_t s = 0; s + 1 < traj.path.size(); ++s) {
      TrainSample sample;
      sample.ctx = uniform_kind_context(graph, store, kind, traj.path[s], traj.path[s + 1]);
      sample.instr = traj.instruction;
      sample.sample_id = traj.traj_id + ":" + std::to_string(s);
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

namespace {

bool all_exist(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths)
    if (!std::filesystem::exists(p)) return false;
  return true;
}

struct Stage {
  std::string name;
  std::vector<std::filesystem::path> outputs;
  std::function<void()> body;
};

// Trains one policy per feature kind on uniform-kind datasets.
std::vector<PolicyAgent> train_voting_agents(const ExperimentConfig& config, const NavGraph& graph,
                                             const FeatureStore& store,
                                             const std::vector<Trajectory>& train_trajs,
                                             std::ostream& log) {
  std::vector<PolicyAgent> agents;
  for (FeatureKind kind : kAllKinds) {
    PolicyAgent agent(kind, config.feature_dim, config.instr_dim,
                      mix_key(config.seed_train, fnv1a64("agent:" + to_string(kind))));
    const auto dataset = kind_dataset(graph, store, kind, train_trajs);
    const auto curve = train(agent, dataset, config.epochs, config.lr);
    log << "  agent " << to_string(kind) << ": " << dataset.size() << " samples, final loss "
        << (curve.empty() ? 0.0 : curve.back()) << "\n";
    agents.push_back(std::move(agent));
  }
  return agents;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config, bool force, int jobs,
                            std::ostream& log, const std::string& only_stage) {
  validate_config(config);
  std::filesystem::create_directories(config.output_dir);

  const auto graph_path = config.resolve(config.graph_path);
  const auto pano_dir = config.resolve(config.panorama_dir);
  const auto manifest_path = config.resolve(config.features_manifest);
  const auto blob_path = config.resolve(config.features_blob);
  const auto train_path = config.resolve(config.train_trajectories);
  const auto val_path = config.resolve(config.val_trajectories);
  const auto agents_dir = config.resolve(config.agents_dir);
  const auto vote_path = config.resolve(config.vote_table_path);
  const auto episodes_dir = config.resolve(config.episodes_dir);
  const auto summary_dir = config.resolve(config.summary_dir);
  const auto analysis_path = config.resolve(config.analysis_path);

  auto agent_path = [&](FeatureKind kind) { return agents_dir / ("agent_" + to_string(kind) + ".json"); };
  auto episodes_path = [&](const std::string& name) {
    return episodes_dir / ("episodes_" + name + ".jsonl");
  };
  auto summary_path = [&](const std::string& name) {
    return summary_dir / ("summary_" + name + ".json");
  };

  std::vector<Stage> stages;

  stages.push_back(
      {"generate",
       {graph_path, pano_dir, train_path, val_path},
       [&] {
         const auto artifacts = generate_scene(config.scene_spec(), config.output_dir);
         log << "  scene: " << artifacts.corridor_count << " corridor + " << artifacts.room_count
             << " room nodes, goal " << artifacts.goal_viewpoint << ", "
             << artifacts.train_trajectories << " train / " << artifacts.val_trajectories
             << " val trajectories\n";
       }});

  stages.push_back({"mask",
                    {manifest_path, blob_path},
                    [&] {
                      FeatureStore store(config.feature_dim);
                      const auto ids = list_panorama_ids(pano_dir);
                      if (ids.empty()) throw std::runtime_error("no panoramas found");
                      for (const auto& id : ids) {
                        const auto pano = load_panorama(pano_dir, id);
                        store.ingest(id, FeatureKind::ori,
                                     extract_features(pano, Region::ori, config.feature_dim));
                        store.ingest(id, FeatureKind::fg,
                                     extract_features(pano, Region::fg, config.feature_dim));
                        store.ingest(id, FeatureKind::bg,
                                     extract_features(pano, Region::bg, config.feature_dim));
                      }
                      save_feature_store(store, manifest_path, blob_path);
                      log << "  extracted " << ids.size() << " viewpoints x 3 kinds\n";
                    }});

  const auto ingest_report = config.resolve("ingest_report.json");
  stages.push_back({"ingest",
                    {ingest_report},
                    [&] {
                      const auto graph = load_graph(graph_path);
                      const auto store = load_feature_store(manifest_path, blob_path);
                      size_t covered = 0;
                      for (const auto& id : graph.viewpoint_ids()) {
                        for (FeatureKind kind : kAllKinds)
                          if (!store.has(id, kind))
                            throw std::runtime_error("viewpoint '" + id + "' missing kind '" +
                                                     to_string(kind) + "'");
                        ++covered;
                      }
                      json report;
                      report["scan_id"] = graph.scan_id();
                      report["dim"] = store.dim();
                      report["viewpoints"] = covered;
                      report["records"] = store.size();
                      std::ofstream out(ingest_report);
                      out << report.dump(2) << "\n";
                      log << "  coverage: " << covered << " viewpoints, dim " << store.dim()
                          << "\n";
                    }});

  stages.push_back(
      {"train",
       {agent_path(FeatureKind::ori), agent_path(FeatureKind::fg), agent_path(FeatureKind::bg)},
       [&] {
         const auto graph = load_graph(graph_path);
         const auto store = load_feature_store(manifest_path, blob_path);
         const auto train_trajs = load_trajectories(train_path, config.instr_dim);
         std::filesystem::create_directories(agents_dir);
         for (auto& agent : train_voting_agents(config, graph, store, train_trajs, log))
           save_agent(agent, agent_path(agent.feature_kind()));
       }});

  stages.push_back({"vote",
                    {vote_path},
                    [&] {
                      const auto graph = load_graph(graph_path);
                      const auto store = load_feature_store(manifest_path, blob_path);
                      const auto train_trajs = load_trajectories(train_path, config.instr_dim);
                      std::vector<PolicyAgent> agents;
                      for (FeatureKind kind : kAllKinds)
                        agents.push_back(load_agent(agent_path(kind)));
                      const auto pref = preference_pass(agents, train_trajs, store, graph, jobs);
                      const auto table = build_vote_table(pref);
                      save_vote_table(table, vote_path);
                      log << "  " << pref.entries.size() << " preference entries, "
                          << table.records.size() << " voted viewpoints\n";
                    }});

  {
    std::vector<std::filesystem::path> outputs;
    for (const auto& name : kStrategyNames) {
      outputs.push_back(episodes_path(name));
      outputs.push_back(summary_path(name));
    }
    outputs.push_back(summary_dir / "table.txt");
    stages.push_back(
        {"rollout", std::move(outputs), [&] {
           const auto graph = load_graph(graph_path);
           const auto store = load_feature_store(manifest_path, blob_path);
           const auto val_trajs = load_trajectories(val_path, config.instr_dim);
           if (val_trajs.empty()) throw std::runtime_error("validation split is empty");
           const auto table = load_vote_table(vote_path);
           graph.precompute_geodesics();

           // Every strategy drives the same frozen base agent, the one trained
           // on original features; a strategy changes only which stored kind
           // each candidate presents at inference time.
           const auto policy = load_agent(agent_path(FeatureKind::ori));
           std::filesystem::create_directories(episodes_dir);
           std::filesystem::create_directories(summary_dir);
           const auto rc = config.rollout_config();
           std::vector<std::pair<std::string, MetricSummary>> rows;
           for (const auto& name : kStrategyNames) {
             SplitEvaluation eval;
             if (name == "random_walk") {
               eval.episodes.resize(val_trajs.size());
               for (size_t t = 0; t < val_trajs.size(); ++t)
                 eval.episodes[t] = run_random_walk_episode(val_trajs[t], graph, store, rc);
               eval.summary = summarize(eval.episodes);
             } else {
               const auto strategy = make_strategy(name, config.stochastic_seed, table);
               eval = evaluate_split(policy, strategy, val_trajs, graph, store, rc, jobs);
             }
             save_episodes(eval.episodes, episodes_path(name));
             save_summary(eval.summary, name, "", summary_path(name));
             rows.emplace_back(name, eval.summary);
           }
           const auto table_text = format_summary_table(rows);
           std::ofstream table_out(summary_dir / "table.txt");
           table_out << table_text;
           log << table_text;
         }});
  }

  stages.push_back(
      {"analyze", {analysis_path}, [&] {
         const auto graph = load_graph(graph_path);
         const auto table = load_vote_table(vote_path);
         std::vector<DistributionRow> rows;
         const std::pair<const char*, std::filesystem::path> splits[] = {
             {"train", train_path}, {"val", val_path}};
         for (const auto& [split, path] : splits) {
           const auto trajs = load_trajectories(path, config.instr_dim);
           if (trajs.empty()) continue;
           const auto percent = preference_distribution(table, trajs);
           for (FeatureKind kind : kAllKinds)
             rows.push_back({split, kind, percent[static_cast<int>(kind)]});
         }
         // Region rows: label shares over all room (object-annotated) and all
         // corridor viewpoints, unvoted ones counting as ori.
         std::array<std::array<double, 3>, 2> counts{};
         std::array<double, 2> totals{};
         for (const auto& id : graph.viewpoint_ids()) {
           const bool room = !graph.viewpoint(id).object_ids.empty();
           ++counts[room ? 0 : 1][static_cast<int>(table.final_kind(id))];
           ++totals[room ? 0 : 1];
         }
         const char* regions[] = {"rooms", "corridors"};
         for (int r = 0; r < 2; ++r) {
           if (totals[r] == 0.0) continue;
           for (FeatureKind kind : kAllKinds)
             rows.push_back({regions[r], kind,
                             counts[r][static_cast<int>(kind)] * 100.0 / totals[r]});
         }
         save_distribution_csv(rows, analysis_path);
         log << "  " << rows.size() << " distribution rows\n";
       }});

  if (!only_stage.empty()) {
    bool known = false;
    for (const auto& stage : stages) known = known || stage.name == only_stage;
    if (!known) fail("unknown pipeline stage '" + only_stage + "'");
  }

  PipelineResult result;
  for (auto& stage : stages) {
    if (!only_stage.empty() && stage.name != only_stage) continue;
    if (!force && all_exist(stage.outputs)) {
      log << "[" << stage.name << "] up to date\n";
      result.skipped.push_back(stage.name);
      continue;
    }
    log << "[" << stage.name << "]\n";
    try {
      stage.body();
    } catch (const std::exception& e) {
      throw std::runtime_error("pipeline stage '" + stage.name + "' failed: " + e.what());
    }
    result.executed.push_back(stage.name);
  }
  return result;
}

}  // namespace cofa
