#include "cofa/voting.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "cofa/navgraph.hpp"
#include "cofa/parallel.hpp"
#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("voting: " + msg); }

}  // namespace

FeatureKind VoteTable::final_kind(const std::string& viewpoint_id) const {
  auto it = records.find(viewpoint_id);
  return it == records.end() ? FeatureKind::ori : it->second.final;
}

PreferenceTable preference_pass(const std::vector<PolicyAgent>& agents,
                                const std::vector<Trajectory>& trajectories,
                                const FeatureStore& store, const NavGraph& graph, int jobs) {
  std::array<const PolicyAgent*, 3> by_kind{nullptr, nullptr, nullptr};
  for (const auto& agent : agents) {
    auto& slot = by_kind[static_cast<int>(agent.feature_kind())];
    if (slot) fail("duplicate agent for kind '" + to_string(agent.feature_kind()) + "'");
    slot = &agent;
  }
  for (FeatureKind kind : kAllKinds)
    if (!by_kind[static_cast<int>(kind)]) fail("missing agent for kind '" + to_string(kind) + "'");

  std::vector<size_t> first_entry(trajectories.size() + 1, 0);
  for (size_t t = 0; t < trajectories.size(); ++t)
    first_entry[t + 1] = first_entry[t] + trajectories[t].step_count();

  PreferenceTable table;
  table.entries.resize(first_entry.back());
  parallel_for(trajectories.size(), jobs, [&](size_t t) {
    const auto& traj = trajectories[t];
    validate_trajectory(traj, graph);
    for (size_t s = 0; s < traj.path.size(); ++s) {
      PreferenceEntry entry;
      entry.traj_id = traj.traj_id;
      entry.step_index = static_cast<int>(s);
      entry.viewpoint_id = traj.path[s];
      const std::optional<std::string> gt_next =
          s + 1 < traj.path.size() ? std::optional<std::string>(traj.path[s + 1]) : std::nullopt;
      for (FeatureKind kind : kAllKinds) {
        const auto ctx = uniform_kind_context(graph, store, kind, traj.path[s], gt_next);
        entry.scores[static_cast<int>(kind)] =
            preference_score(*by_kind[static_cast<int>(kind)], ctx, traj.instruction);
      }
      table.entries[first_entry[t] + s] = std::move(entry);
    }
  });
  return table;
}

FeatureKind vote_trajectory(const std::array<double, 3>& scores) {
  for (double s : scores)
    if (!std::isfinite(s)) fail("non-finite preference score");
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (scores[k] < scores[best]) best = k;
  return static_cast<FeatureKind>(best);
}

FeatureKind vote_majority(const std::vector<FeatureKind>& labels) {
  if (labels.empty()) fail("majority vote over an empty label set");
  std::array<int, 3> counts{};
  for (FeatureKind k : labels) ++counts[static_cast<int>(k)];
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (counts[k] > counts[best]) best = k;
  return static_cast<FeatureKind>(best);
}

VoteTable build_vote_table(const PreferenceTable& pref) {
  VoteTable table;
  for (const auto& entry : pref.entries) {
    const FeatureKind label = vote_trajectory(entry.scores);
    ++table.records[entry.viewpoint_id].counts[static_cast<int>(label)];
  }
  for (auto& [id, record] : table.records) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (record.counts[k] > record.counts[best]) best = k;
    record.final = static_cast<FeatureKind>(best);
  }
  return table;
}

void save_vote_table(const VoteTable& table, const std::filesystem::path& path) {
  json doc = json::object();
  for (const auto& [id, record] : table.records) {
    json counts;
    for (FeatureKind kind : kAllKinds)
      counts[to_string(kind)] = record.counts[static_cast<int>(kind)];
    doc[id] = {{"final", to_string(record.final)}, {"counts", std::move(counts)}};
  }
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

VoteTable load_vote_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(std::string("vote table parse error: ") + e.what());
  }
  VoteTable table;
  for (const auto& [id, value] : doc.items()) {
    VoteRecord record;
    record.final = kind_from_string(value.at("final").get<std::string>());
    for (FeatureKind kind : kAllKinds)
      record.counts[static_cast<int>(kind)] = value.at("counts").at(to_string(kind)).get<int>();
    table.records[id] = record;
  }
  return table;
}

}  // namespace cofa
