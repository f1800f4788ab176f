#include "cofa/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cofa/navgraph.hpp"
#include "cofa/parallel.hpp"
#include "cofa/rng.hpp"
#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("rollout: " + msg); }

int argmax_logit(const std::vector<double>& logits) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(logits.size()); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

// Grounds the stop viewpoint's objects against the observation feature by dot
// product; lexicographically smallest object id wins exact ties.
std::string ground_object(const NavGraph& graph, const std::string& stop_viewpoint,
                          const std::vector<float>& observation) {
  const auto& embeddings = graph.object_embeddings();
  if (embeddings.empty()) return {};
  std::string best_id;
  double best_score = 0.0;
  for (const auto& obj : graph.viewpoint(stop_viewpoint).object_ids) {
    auto it = embeddings.find(obj);
    if (it == embeddings.end()) fail("object '" + obj + "' has no stored embedding");
    if (it->second.size() != observation.size())
      fail("object embedding dim differs from feature dim for '" + obj + "'");
    double score = 0.0;
    for (size_t k = 0; k < observation.size(); ++k)
      score += static_cast<double>(it->second[k]) * observation[k];
    if (best_id.empty() || score > best_score || (score == best_score && obj < best_id)) {
      best_id = obj;
      best_score = score;
    }
  }
  return best_id;
}

EpisodeResult finish_episode(const Trajectory& traj, const NavGraph& graph,
                             const RolloutConfig& config, std::vector<std::string> executed,
                             double tl, int steps, bool hit_limit,
                             const std::vector<float>& stop_observation) {
  EpisodeResult result;
  result.traj_id = traj.traj_id;
  result.executed_path = std::move(executed);
  result.stop_viewpoint = result.executed_path.back();
  result.tl = tl;
  result.steps = steps;
  result.hit_step_limit = hit_limit;
  result.ne = graph.geodesic(result.stop_viewpoint, traj.goal_viewpoint);
  result.success = result.ne <= config.success_radius ? 1 : 0;
  const double shortest = graph.geodesic(traj.path.front(), traj.goal_viewpoint);
  result.spl = compute_spl(result.success, shortest, tl);
  result.rgs_applicable = !graph.object_embeddings().empty() && !traj.target_object.empty();
  if (result.rgs_applicable) {
    result.grounded_object = ground_object(graph, result.stop_viewpoint, stop_observation);
    result.rgs = result.grounded_object == traj.target_object ? 1 : 0;
    result.rgspl = compute_spl(result.rgs, shortest, tl);
  }
  return result;
}

}  // namespace

double compute_spl(int success, double shortest, double tl) {
  if (shortest < 0.0 || tl < 0.0) fail("negative path length");
  if (success == 0) return 0.0;
  if (shortest == 0.0 && tl == 0.0) return 1.0;
  return shortest / std::max(shortest, tl);
}

ActionContext strategy_context(const NavGraph& graph, const FeatureStore& store,
                               const AugmentationStrategy& strategy,
                               const std::string& viewpoint_id,
                               const std::optional<std::string>& gt_next, uint64_t draw_seed,
                               uint64_t traj_key, int step) {
  const auto& vp = graph.viewpoint(viewpoint_id);
  ActionContext ctx;
  ctx.viewpoint_id = viewpoint_id;
  ctx.current_feature =
      select_feature(strategy, viewpoint_id, store,
                     unit_draw(draw_seed, traj_key, static_cast<uint64_t>(step), 0))
          .second;
  ctx.candidate_ids = vp.neighbor_ids;
  ctx.candidate_features.reserve(ctx.candidate_ids.size());
  for (size_t j = 0; j < ctx.candidate_ids.size(); ++j)
    ctx.candidate_features.push_back(
        select_feature(strategy, ctx.candidate_ids[j], store,
                       unit_draw(draw_seed, traj_key, static_cast<uint64_t>(step), j + 1))
            .second);

  if (!gt_next) {
    ctx.gt_index = static_cast<int>(ctx.stop_index());
  } else {
    auto it = std::find(ctx.candidate_ids.begin(), ctx.candidate_ids.end(), *gt_next);
    if (it == ctx.candidate_ids.end())
      fail("ground-truth action '" + *gt_next + "' is not a neighbor of '" + viewpoint_id + "'");
    ctx.gt_index = static_cast<int>(it - ctx.candidate_ids.begin());
  }
  return ctx;
}

EpisodeResult run_episode(const PolicyAgent& policy, const AugmentationStrategy& strategy,
                          const Trajectory& traj, const NavGraph& graph, const FeatureStore& store,
                          const RolloutConfig& config) {
  validate_trajectory(traj, graph);
  if (config.step_limit < 1) fail("step limit must be at least 1");
  uint64_t draw_seed = config.episode_seed;
  if (const auto* s = std::get_if<Stochastic>(&strategy)) draw_seed = mix_key(draw_seed, s->seed);
  const uint64_t traj_key = fnv1a64(traj.traj_id);

  std::string current = traj.path.front();
  std::vector<std::string> executed{current};
  double tl = 0.0;
  int steps = 0;
  bool hit_limit = false;
  std::vector<float> stop_observation;

  while (true) {
    if (steps == config.step_limit) {
      hit_limit = true;
      stop_observation =
          select_feature(strategy, current, store,
                         unit_draw(draw_seed, traj_key, static_cast<uint64_t>(steps), 0))
              .second;
      break;
    }
    const auto ctx = strategy_context(graph, store, strategy, current, std::nullopt, draw_seed,
                                      traj_key, steps);
    const auto logits = score_actions(policy, ctx, traj.instruction);
    const int choice = argmax_logit(logits);
    if (choice == static_cast<int>(ctx.stop_index())) {
      stop_observation = ctx.current_feature;
      break;
    }
    const auto& next = ctx.candidate_ids[choice];
    tl += graph.edge_weight(current, next);
    current = next;
    executed.push_back(current);
    ++steps;
  }
  return finish_episode(traj, graph, config, std::move(executed), tl, steps, hit_limit,
                        stop_observation);
}

EpisodeResult run_random_walk_episode(const Trajectory& traj, const NavGraph& graph,
                                      const FeatureStore& store, const RolloutConfig& config) {
  validate_trajectory(traj, graph);
  if (config.step_limit < 1) fail("step limit must be at least 1");
  SplitMix64 rng(mix_key(mix_key(config.episode_seed, fnv1a64("random-walk")),
                         fnv1a64(traj.traj_id)));

  std::string current = traj.path.front();
  std::vector<std::string> executed{current};
  double tl = 0.0;
  int steps = 0;
  bool hit_limit = false;
  while (true) {
    if (steps == config.step_limit) {
      hit_limit = true;
      break;
    }
    const auto& neighbors = graph.viewpoint(current).neighbor_ids;
    const auto choice = rng.next_below(neighbors.size() + 1);
    if (choice == neighbors.size()) break;  // STOP
    const auto& next = neighbors[choice];
    tl += graph.edge_weight(current, next);
    current = next;
    executed.push_back(current);
    ++steps;
  }
  return finish_episode(traj, graph, config, std::move(executed), tl, steps, hit_limit,
                        store.get(current, FeatureKind::ori));
}

// Grounding metrics average over the episodes that carry an object target;
// episodes without one (no objects in the scan, or no named target) do not
// dilute them.  With no applicable episode at all the columns read n/a.
MetricSummary summarize(const std::vector<EpisodeResult>& episodes) {
  if (episodes.empty()) fail("cannot summarize an empty episode list");
  MetricSummary summary;
  summary.episode_count = episodes.size();
  size_t grounded = 0;
  for (const auto& ep : episodes) {
    summary.tl += ep.tl;
    summary.ne += ep.ne;
    summary.sr += ep.success;
    summary.spl += ep.spl;
    if (ep.rgs_applicable) {
      summary.rgs += ep.rgs;
      summary.rgspl += ep.rgspl;
      ++grounded;
    }
  }
  const double n = static_cast<double>(episodes.size());
  summary.tl /= n;
  summary.ne /= n;
  summary.sr /= n;
  summary.spl /= n;
  summary.rgs_applicable = grounded > 0;
  if (summary.rgs_applicable) {
    summary.rgs /= static_cast<double>(grounded);
    summary.rgspl /= static_cast<double>(grounded);
  }
  return summary;
}

SplitEvaluation evaluate_split(const PolicyAgent& policy, const AugmentationStrategy& strategy,
                               const std::vector<Trajectory>& trajectories, const NavGraph& graph,
                               const FeatureStore& store, const RolloutConfig& config, int jobs) {
  if (trajectories.empty()) fail("cannot evaluate an empty trajectory set");
  SplitEvaluation eval;
  eval.episodes.resize(trajectories.size());
  parallel_for(trajectories.size(), jobs, [&](size_t t) {
    eval.episodes[t] = run_episode(policy, strategy, trajectories[t], graph, store, config);
  });
  eval.summary = summarize(eval.episodes);
  return eval;
}

std::array<double, 3> preference_distribution(const VoteTable& table,
                                              const std::vector<Trajectory>& trajectories) {
  std::set<std::string> visited;
  for (const auto& traj : trajectories)
    visited.insert(traj.path.begin(), traj.path.end());
  if (visited.empty()) fail("preference distribution over an empty split");

  std::array<double, 3> percent{};
  for (const auto& id : visited) ++percent[static_cast<int>(table.final_kind(id))];
  for (auto& p : percent) p = p * 100.0 / static_cast<double>(visited.size());
  return percent;
}

void save_episodes(const std::vector<EpisodeResult>& episodes,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  for (const auto& ep : episodes) {
    json doc;
    doc["traj_id"] = ep.traj_id;
    doc["executed_path"] = ep.executed_path;
    doc["stop_viewpoint"] = ep.stop_viewpoint;
    if (!ep.grounded_object.empty()) doc["grounded_object"] = ep.grounded_object;
    doc["tl"] = ep.tl;
    doc["ne"] = ep.ne;
    doc["success"] = ep.success;
    doc["spl"] = ep.spl;
    doc["rgs"] = ep.rgs;
    doc["rgspl"] = ep.rgspl;
    doc["steps"] = ep.steps;
    doc["hit_step_limit"] = ep.hit_step_limit;
    doc["rgs_applicable"] = ep.rgs_applicable;
    out << doc.dump() << "\n";
  }
}

std::vector<EpisodeResult> load_episodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  std::vector<EpisodeResult> episodes;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      fail("episode parse error at line " + std::to_string(line_no) + ": " + e.what());
    }
    EpisodeResult ep;
    ep.traj_id = doc.at("traj_id").get<std::string>();
    ep.executed_path = doc.at("executed_path").get<std::vector<std::string>>();
    ep.stop_viewpoint = doc.at("stop_viewpoint").get<std::string>();
    ep.grounded_object = doc.value("grounded_object", std::string());
    ep.tl = doc.at("tl").get<double>();
    ep.ne = doc.at("ne").get<double>();
    ep.success = doc.at("success").get<int>();
    ep.spl = doc.at("spl").get<double>();
    ep.rgs = doc.at("rgs").get<int>();
    ep.rgspl = doc.at("rgspl").get<double>();
    ep.steps = doc.at("steps").get<int>();
    ep.hit_step_limit = doc.at("hit_step_limit").get<bool>();
    ep.rgs_applicable = doc.at("rgs_applicable").get<bool>();
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

void save_summary(const MetricSummary& summary, const std::string& split_name,
                  const std::string& created_utc, const std::filesystem::path& path) {
  json doc;
  doc["split"] = split_name;
  doc["episode_count"] = summary.episode_count;
  doc["tl"] = summary.tl;
  doc["ne"] = summary.ne;
  doc["sr"] = summary.sr;
  doc["spl"] = summary.spl;
  doc["rgs_applicable"] = summary.rgs_applicable;
  if (summary.rgs_applicable) {
    doc["rgs"] = summary.rgs;
    doc["rgspl"] = summary.rgspl;
  }
  if (!created_utc.empty()) doc["created_utc"] = created_utc;
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

MetricSummary load_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(std::string("summary parse error: ") + e.what());
  }
  MetricSummary summary;
  summary.episode_count = doc.at("episode_count").get<size_t>();
  summary.tl = doc.at("tl").get<double>();
  summary.ne = doc.at("ne").get<double>();
  summary.sr = doc.at("sr").get<double>();
  summary.spl = doc.at("spl").get<double>();
  summary.rgs_applicable = doc.at("rgs_applicable").get<bool>();
  if (summary.rgs_applicable) {
    summary.rgs = doc.at("rgs").get<double>();
    summary.rgspl = doc.at("rgspl").get<double>();
  }
  return summary;
}

std::string format_summary_table(
    const std::vector<std::pair<std::string, MetricSummary>>& rows) {
  size_t name_width = 8;
  for (const auto& [name, summary] : rows) name_width = std::max(name_width, name.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_width + 2)) << "strategy" << std::right
     << std::setw(8) << "TL" << std::setw(8) << "SR" << std::setw(8) << "SPL" << std::setw(8)
     << "RGS" << std::setw(8) << "RGSPL" << "\n";
  os << std::string(name_width + 2 + 5 * 8, '-') << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& [name, summary] : rows) {
    os << std::left << std::setw(static_cast<int>(name_width + 2)) << name << std::right;
    os << std::setw(8) << summary.tl;
    os << std::setw(8) << summary.sr * 100.0;
    os << std::setw(8) << summary.spl * 100.0;
    if (summary.rgs_applicable) {
      os << std::setw(8) << summary.rgs * 100.0;
      os << std::setw(8) << summary.rgspl * 100.0;
    } else {
      os << std::setw(8) << "n/a" << std::setw(8) << "n/a";
    }
    os << "\n";
  }
  return os.str();
}

void save_distribution_csv(const std::vector<DistributionRow>& rows,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << "split,kind,percent\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& row : rows)
    out << row.split << "," << to_string(row.kind) << "," << row.percent << "\n";
}

}  // namespace cofa
