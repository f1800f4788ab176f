#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cofa/navgraph.hpp"
#include "cofa/rng.hpp"
#include "cofa/rollout.hpp"
#include "doctest.h"

using namespace cofa;

namespace {

// Line world A - B - C (weights 2.0, 1.0).  Slot 0 of ori points toward B
// from A only; slot 1 is a constant presence bit.  A greedy policy reading
// just the candidate block can be steered walk / stop / never-stop.
struct World {
  NavGraph graph;
  FeatureStore store;

  World()
      : graph("scan",
              {{"A", {0.0, 0.0, 0.0}, {"B"}, {"pan", "pot"}},
               {"B", {2.0, 0.0, 0.0}, {"A", "C"}, {"cup", "mug"}},
               {"C", {3.0, 0.0, 0.0}, {"B"}, {}}},
              {{{"A", "B"}, 2.0}, {{"B", "C"}, 1.0}},
              {{"mug", {0.0f, 1.0f}},
               {"cup", {0.0f, 0.5f}},
               {"pan", {1.0f, 0.0f}},
               {"pot", {1.0f, 0.0f}}}) {
    ingest("A", -1.0f);
    ingest("B", 1.0f);
    ingest("C", -1.0f);
  }

  void ingest(const std::string& vp, float heading) {
    store.ingest(vp, FeatureKind::ori, {heading, 1.0f});
    store.ingest(vp, FeatureKind::fg, {heading + 10.0f, 1.0f});
    store.ingest(vp, FeatureKind::bg, {heading + 20.0f, 1.0f});
  }

  // Weight layout: [cur0, cur1, cand0, cand1, instr0].  Only the candidate
  // block can change the argmax; shared terms shift every logit equally.
  PolicyAgent policy(double cand0, double cand1) const {
    PolicyAgent agent(FeatureKind::ori, 2, 1, 0);
    std::fill(agent.mutable_weights().begin(), agent.mutable_weights().end(), 0.0);
    agent.mutable_weights()[2] = cand0;
    agent.mutable_weights()[3] = cand1;
    return agent;
  }

  Trajectory traj(const std::string& id, std::vector<std::string> path,
                  const std::string& target = "") const {
    Trajectory t;
    t.traj_id = id;
    t.scan_id = "scan";
    t.path = std::move(path);
    t.instruction = make_instruction("go", 1);
    t.goal_viewpoint = t.path.back();
    t.target_object = target;
    return t;
  }
};

}  // namespace

TEST_CASE("path-weighted success rescales by the shortest path") {
  CHECK(compute_spl(1, 10.0, 20.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(compute_spl(1, 10.0, 5.0) == 1.0);   // beat the geodesic: capped
  CHECK(compute_spl(0, 10.0, 20.0) == 0.0);
  CHECK(compute_spl(1, 0.0, 0.0) == 1.0);    // started at the goal
  CHECK(compute_spl(1, 0.0, 2.0) == 0.0);
  CHECK_THROWS_AS(compute_spl(1, -1.0, 2.0), std::runtime_error);
  CHECK_THROWS_AS(compute_spl(1, 1.0, -2.0), std::runtime_error);
}

TEST_CASE("a policy that prefers stopping produces a degenerate episode") {
  World w;
  const auto policy = w.policy(-5.0, -5.0);
  const auto traj = w.traj("stay", {"A"}, "pot");
  RolloutConfig config;

  const auto ep = run_episode(policy, Original{}, traj, w.graph, w.store, config);
  CHECK(ep.traj_id == "stay");
  CHECK(ep.executed_path == std::vector<std::string>{"A"});
  CHECK(ep.stop_viewpoint == "A");
  CHECK(ep.tl == 0.0);
  CHECK(ep.ne == 0.0);
  CHECK(ep.success == 1);
  CHECK(ep.spl == 1.0);
  CHECK(ep.steps == 0);
  CHECK_FALSE(ep.hit_step_limit);

  // Both objects at A tie on the dot product; the lexicographically smaller
  // id wins, which misses the stated target.
  CHECK(ep.rgs_applicable);
  CHECK(ep.grounded_object == "pan");
  CHECK(ep.rgs == 0);
  CHECK(ep.rgspl == 0.0);
}

TEST_CASE("a slot-0 seeking policy walks to B and stops") {
  World w;
  const auto policy = w.policy(5.0, 0.0);
  const auto traj = w.traj("walk", {"A", "B"}, "mug");
  RolloutConfig config;

  const auto ep = run_episode(policy, Original{}, traj, w.graph, w.store, config);
  CHECK(ep.executed_path == std::vector<std::string>{"A", "B"});
  CHECK(ep.stop_viewpoint == "B");
  CHECK(ep.tl == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ep.ne == 0.0);
  CHECK(ep.success == 1);
  CHECK(ep.spl == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ep.steps == 1);
  CHECK_FALSE(ep.hit_step_limit);

  // Observation at B is its ori feature {1, 1}: mug (0,1) beats cup (0,0.5).
  CHECK(ep.rgs_applicable);
  CHECK(ep.grounded_object == "mug");
  CHECK(ep.rgs == 1);
  CHECK(ep.rgspl == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("an empty target disables grounding even with embeddings present") {
    const auto plain = w.traj("walk2", {"A", "B"});
    const auto ep2 = run_episode(policy, Original{}, plain, w.graph, w.store, config);
    CHECK_FALSE(ep2.rgs_applicable);
    CHECK(ep2.grounded_object.empty());
    CHECK(ep2.rgs == 0);
  }
}

TEST_CASE("a policy that never stops hits the step limit") {
  World w;
  const auto policy = w.policy(0.0, 3.0);  // presence bit: every move beats STOP
  const auto traj = w.traj("loop", {"A", "B"}, "mug");
  RolloutConfig config;
  config.step_limit = 2;
  config.success_radius = 1.0;

  const auto ep = run_episode(policy, Original{}, traj, w.graph, w.store, config);
  // Ties among candidates resolve to the first neighbor, so B bounces back to A.
  CHECK(ep.executed_path == std::vector<std::string>{"A", "B", "A"});
  CHECK(ep.steps == 2);
  CHECK(ep.hit_step_limit);
  CHECK(ep.stop_viewpoint == "A");
  CHECK(ep.tl == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(ep.ne == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ep.success == 0);  // radius 1 < ne 2
  CHECK(ep.spl == 0.0);
  CHECK(ep.rgs == 0);
  CHECK(ep.grounded_object == "pan");

  SUBCASE("the step limit must be positive") {
    RolloutConfig bad;
    bad.step_limit = 0;
    CHECK_THROWS_AS(run_episode(policy, Original{}, traj, w.graph, w.store, bad),
                    std::runtime_error);
  }
}

TEST_CASE("grounding an object with no stored embedding is an error") {
  // A one-node world whose only object lacks an embedding entry.
  const NavGraph graph("scan",
                       {{"X", {0.0, 0.0, 0.0}, {"Y"}, {"ghost"}},
                        {"Y", {1.0, 0.0, 0.0}, {"X"}, {}}},
                       {{{"X", "Y"}, 1.0}}, {{"mug", {0.0f, 1.0f}}});
  FeatureStore store;
  for (const auto& vp : {std::string("X"), std::string("Y")})
    for (auto kind : kAllKinds) store.ingest(vp, kind, {0.0f, 1.0f});
  PolicyAgent policy(FeatureKind::ori, 2, 1, 0);
  std::fill(policy.mutable_weights().begin(), policy.mutable_weights().end(), 0.0);
  policy.mutable_weights()[2] = -5.0;
  policy.mutable_weights()[3] = -5.0;
  Trajectory traj;
  traj.traj_id = "ghostly";
  traj.scan_id = "scan";
  traj.path = {"X"};
  traj.goal_viewpoint = "X";
  traj.instruction = make_instruction("stay", 1);
  traj.target_object = "ghost";
  CHECK_THROWS_WITH_AS(run_episode(policy, Original{}, traj, graph, store, RolloutConfig{}),
                       doctest::Contains("embedding"), std::runtime_error);
}

TEST_CASE("strategy contexts key stochastic draws by step and slot") {
  World w;
  const uint64_t draw_seed = 99;
  const uint64_t traj_key = fnv1a64("tk");
  const Stochastic strat{FeatureKind::fg, 0};

  for (int step : {0, 1, 4}) {
    const auto ctx = strategy_context(w.graph, w.store, strat, "B", std::nullopt, draw_seed,
                                      traj_key, step);
    REQUIRE(ctx.candidate_ids == std::vector<std::string>{"A", "C"});

    const auto expect = [&](uint64_t slot, const std::string& vp) {
      const double d = unit_draw(draw_seed, traj_key, static_cast<uint64_t>(step), slot);
      return w.store.get(vp, d > 0.5 ? FeatureKind::fg : FeatureKind::ori);
    };
    CHECK(ctx.current_feature == expect(0, "B"));
    CHECK(ctx.candidate_features[0] == expect(1, "A"));
    CHECK(ctx.candidate_features[1] == expect(2, "C"));
  }

  SUBCASE("a STOP step aims the label at the stop action") {
    const auto ctx =
        strategy_context(w.graph, w.store, Original{}, "B", std::nullopt, 0, 0, 0);
    CHECK(ctx.gt_index == static_cast<int>(ctx.stop_index()));
    CHECK(ctx.gt_index == 2);
  }
  SUBCASE("a ground-truth move resolves to its candidate index") {
    const auto ctx =
        strategy_context(w.graph, w.store, Original{}, "B", std::optional<std::string>("C"), 0, 0, 0);
    CHECK(ctx.gt_index == 1);
  }
  SUBCASE("a non-adjacent ground-truth move is rejected") {
    CHECK_THROWS_AS(strategy_context(w.graph, w.store, Original{}, "A",
                                     std::optional<std::string>("C"), 0, 0, 0),
                    std::runtime_error);
  }
}

TEST_CASE("episodes are reproducible, including stochastic strategies") {
  World w;
  const auto policy = w.policy(5.0, 0.0);
  const auto traj = w.traj("walk", {"A", "B"}, "mug");
  RolloutConfig config;
  config.episode_seed = 77;

  for (const AugmentationStrategy strat :
       {AugmentationStrategy(Original{}), AugmentationStrategy(Stochastic{FeatureKind::fg, 5})}) {
    const auto a = run_episode(policy, strat, traj, w.graph, w.store, config);
    const auto b = run_episode(policy, strat, traj, w.graph, w.store, config);
    CHECK(a.executed_path == b.executed_path);
    CHECK(a.tl == b.tl);
    CHECK(a.ne == b.ne);
    CHECK(a.spl == b.spl);
    CHECK(a.grounded_object == b.grounded_object);
  }
}

TEST_CASE("random walks are seeded per trajectory and respect the limit") {
  World w;
  const auto traj = w.traj("wander", {"A", "B"}, "mug");
  RolloutConfig config;
  config.step_limit = 5;
  config.episode_seed = 3;

  const auto a = run_random_walk_episode(traj, w.graph, w.store, config);
  const auto b = run_random_walk_episode(traj, w.graph, w.store, config);
  CHECK(a.executed_path == b.executed_path);
  CHECK(a.steps <= 5);
  CHECK(a.executed_path.front() == "A");
  for (size_t i = 1; i < a.executed_path.size(); ++i)
    CHECK(w.graph.has_edge(a.executed_path[i - 1], a.executed_path[i]));

  // Distinct trajectory ids draw from distinct streams.
  bool diverged = false;
  for (int k = 0; k < 16 && !diverged; ++k) {
    auto other = w.traj("wander" + std::to_string(k), {"A", "B"}, "mug");
    diverged = run_random_walk_episode(other, w.graph, w.store, config).executed_path !=
               a.executed_path;
  }
  CHECK(diverged);
}

TEST_CASE("summaries average episodes, grounding over applicable ones only") {
  EpisodeResult e1;
  e1.traj_id = "a";
  e1.tl = 2.0;
  e1.ne = 0.0;
  e1.success = 1;
  e1.spl = 1.0;
  e1.rgs = 1;
  e1.rgspl = 0.5;
  e1.rgs_applicable = true;
  EpisodeResult e2;
  e2.traj_id = "b";
  e2.tl = 4.0;
  e2.ne = 2.0;
  e2.success = 0;
  e2.spl = 0.0;
  e2.rgs_applicable = false;

  const auto s = summarize({e1, e2});
  CHECK(s.episode_count == 2);
  CHECK(s.tl == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.ne == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.sr == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.spl == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.rgs_applicable);
  CHECK(s.rgs == doctest::Approx(1.0).epsilon(1e-12));     // only e1 counts
  CHECK(s.rgspl == doctest::Approx(0.5).epsilon(1e-12));

  SUBCASE("no applicable episode leaves grounding unpopulated") {
    const auto bare = summarize({e2});
    CHECK_FALSE(bare.rgs_applicable);
    CHECK(bare.rgs == 0.0);
  }
  SUBCASE("an empty split cannot be summarized") {
    CHECK_THROWS_AS(summarize({}), std::runtime_error);
  }
}

TEST_CASE("split evaluation preserves order and is jobs-invariant") {
  World w;
  const auto policy = w.policy(5.0, 0.0);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 6; ++i)
    trajs.push_back(w.traj("t" + std::to_string(i), {"A", "B"}, "mug"));
  trajs.push_back(w.traj("stay", {"A"}, "pot"));
  RolloutConfig config;

  const auto serial = evaluate_split(policy, Original{}, trajs, w.graph, w.store, config, 1);
  const auto threaded = evaluate_split(policy, Original{}, trajs, w.graph, w.store, config, 4);

  REQUIRE(serial.episodes.size() == trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) {
    CHECK(serial.episodes[i].traj_id == trajs[i].traj_id);
    CHECK(serial.episodes[i].executed_path == threaded.episodes[i].executed_path);
    CHECK(serial.episodes[i].tl == threaded.episodes[i].tl);
    CHECK(serial.episodes[i].spl == threaded.episodes[i].spl);
    CHECK(serial.episodes[i].grounded_object == threaded.episodes[i].grounded_object);
  }
  CHECK(serial.summary.sr == threaded.summary.sr);

  // The summary is exactly summarize() of the episode list.
  const auto recomputed = summarize(serial.episodes);
  CHECK(serial.summary.tl == recomputed.tl);
  CHECK(serial.summary.spl == recomputed.spl);

  SUBCASE("an empty trajectory set is rejected") {
    CHECK_THROWS_AS(evaluate_split(policy, Original{}, {}, w.graph, w.store, config),
                    std::runtime_error);
  }
}

TEST_CASE("preference distributions cover distinct visited viewpoints") {
  VoteTable table;
  table.records["v1"] = VoteRecord{FeatureKind::fg, {0, 1, 0}};
  table.records["v2"] = VoteRecord{FeatureKind::fg, {0, 2, 0}};
  table.records["v3"] = VoteRecord{FeatureKind::bg, {0, 0, 1}};

  Trajectory t1;
  t1.path = {"v1", "v2"};
  Trajectory t2;
  t2.path = {"v2", "v3"};

  const auto dist = preference_distribution(table, {t1, t2});
  CHECK(dist[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dist[1] == doctest::Approx(200.0 / 3.0).epsilon(1e-9));
  CHECK(dist[2] == doctest::Approx(100.0 / 3.0).epsilon(1e-9));
  CHECK(dist[0] + dist[1] + dist[2] == doctest::Approx(100.0).epsilon(1e-9));

  SUBCASE("unlisted viewpoints count as unmodified") {
    const auto all_ori = preference_distribution(VoteTable{}, {t1, t2});
    CHECK(all_ori[0] == 100.0);
    CHECK(all_ori[1] == 0.0);
    CHECK(all_ori[2] == 0.0);
  }
  SUBCASE("revisits do not double count") {
    Trajectory loop;
    loop.path = {"v1", "v2", "v1"};
    const auto d = preference_distribution(table, {loop});
    CHECK(d[1] == doctest::Approx(100.0).epsilon(1e-9));
  }
  SUBCASE("an empty split is rejected") {
    CHECK_THROWS_AS(preference_distribution(table, {}), std::runtime_error);
  }
}

TEST_CASE("episode records round-trip through JSON lines") {
  World w;
  const auto policy = w.policy(5.0, 0.0);
  std::vector<Trajectory> trajs = {w.traj("walk", {"A", "B"}, "mug"),
                                   w.traj("plain", {"A", "B"})};
  const auto eval = evaluate_split(policy, Original{}, trajs, w.graph, w.store, RolloutConfig{});

  const auto dir = std::filesystem::temp_directory_path() / "cofa_rollout_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "episodes.jsonl";
  save_episodes(eval.episodes, path);
  const auto loaded = load_episodes(path);

  REQUIRE(loaded.size() == eval.episodes.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    const auto& a = eval.episodes[i];
    const auto& b = loaded[i];
    CHECK(b.traj_id == a.traj_id);
    CHECK(b.executed_path == a.executed_path);
    CHECK(b.stop_viewpoint == a.stop_viewpoint);
    CHECK(b.grounded_object == a.grounded_object);
    CHECK(b.tl == a.tl);
    CHECK(b.ne == a.ne);
    CHECK(b.success == a.success);
    CHECK(b.spl == a.spl);
    CHECK(b.rgs == a.rgs);
    CHECK(b.rgspl == a.rgspl);
    CHECK(b.steps == a.steps);
    CHECK(b.hit_step_limit == a.hit_step_limit);
    CHECK(b.rgs_applicable == a.rgs_applicable);
  }

  // Ungrounded episodes omit the grounded_object key entirely.
  std::ifstream in(path);
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  CHECK(line1.find("grounded_object") != std::string::npos);
  CHECK(line2.find("grounded_object") == std::string::npos);

  CHECK_THROWS_AS(load_episodes(dir / "missing.jsonl"), std::runtime_error);
}

TEST_CASE("summaries round-trip through JSON") {
  MetricSummary s;
  s.episode_count = 7;
  s.tl = 12.5;
  s.ne = 1.25;
  s.sr = 0.75;
  s.spl = 0.5;
  s.rgs = 0.25;
  s.rgspl = 0.125;
  s.rgs_applicable = true;

  const auto dir = std::filesystem::temp_directory_path() / "cofa_rollout_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "summary.json";
  save_summary(s, "val", "2026-01-01T00:00:00Z", path);
  const auto loaded = load_summary(path);
  CHECK(loaded.episode_count == 7);
  CHECK(loaded.tl == s.tl);
  CHECK(loaded.ne == s.ne);
  CHECK(loaded.sr == s.sr);
  CHECK(loaded.spl == s.spl);
  CHECK(loaded.rgs == s.rgs);
  CHECK(loaded.rgspl == s.rgspl);
  CHECK(loaded.rgs_applicable);

  SUBCASE("grounding keys vanish when inapplicable") {
    MetricSummary bare = s;
    bare.rgs_applicable = false;
    const auto path2 = dir / "summary2.json";
    save_summary(bare, "val", "", path2);
    std::ifstream in(path2);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"rgs\"") == std::string::npos);
    CHECK(text.find("created_utc") == std::string::npos);
    const auto reloaded = load_summary(path2);
    CHECK_FALSE(reloaded.rgs_applicable);
    CHECK(reloaded.rgs == 0.0);
  }
}

TEST_CASE("the metrics table aligns columns and marks missing grounding") {
  MetricSummary grounded;
  grounded.tl = 1.2345;
  grounded.sr = 0.5;
  grounded.spl = 0.25;
  grounded.rgs = 1.0;
  grounded.rgspl = 0.75;
  grounded.rgs_applicable = true;
  MetricSummary blind;
  blind.tl = 10.0;
  blind.sr = 1.0;
  blind.spl = 1.0;

  const auto text = format_summary_table({{"original", grounded}, {"stochastic_fg", blind}});
  std::istringstream lines(text);
  std::string header, dashes, row1, row2;
  std::getline(lines, header);
  std::getline(lines, dashes);
  std::getline(lines, row1);
  std::getline(lines, row2);

  CHECK(header.find("strategy") == 0);
  for (const auto* col : {"TL", "SR", "SPL", "RGS", "RGSPL"})
    CHECK(header.find(col) != std::string::npos);
  CHECK(dashes == std::string(std::string("stochastic_fg").size() + 2 + 40, '-'));

  CHECK(row1.find("original") == 0);
  CHECK(row1.find("1.23") != std::string::npos);    // TL stays in path units
  CHECK(row1.find("50.00") != std::string::npos);   // SR in percent
  CHECK(row1.find("75.00") != std::string::npos);   // RGSPL in percent
  CHECK(row2.find("n/a") != std::string::npos);
  CHECK(row1.size() == row2.size());
}

TEST_CASE("distribution rows serialize as CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "cofa_rollout_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "distribution.csv";
  save_distribution_csv({{"train", FeatureKind::fg, 62.5}, {"val", FeatureKind::ori, 100.0}},
                        path);

  std::ifstream in(path);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "split,kind,percent");
  CHECK(row1 == "train,fg,62.500000");
  CHECK(row2 == "val,ori,100.000000");
}
