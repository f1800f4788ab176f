#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>

#include "cofa/disentangle.hpp"
#include "cofa/experiment.hpp"
#include "cofa/navgraph.hpp"
#include "cofa/rng.hpp"
#include "cofa/rollout.hpp"
#include "cofa/scene_gen.hpp"
#include "cofa/voting.hpp"

namespace {

// One fixture shared by all benchmarks: a generated scene plus the artifacts
// of the full pipeline, built once.
struct Fixture {
  std::filesystem::path dir;
  cofa::ExperimentConfig config;
  cofa::NavGraph graph{"bench",
                       {cofa::Viewpoint{"a", {0, 0, 0}, {"b"}, {}},
                        cofa::Viewpoint{"b", {1, 0, 0}, {"a"}, {}}},
                       {{{"a", "b"}, 1.0}}};
  cofa::FeatureStore store;
  std::vector<cofa::Trajectory> val;
  cofa::PolicyAgent policy{cofa::FeatureKind::ori, 1, 1, 0};
  cofa::VoteTable votes;

  Fixture() {
    dir = std::filesystem::temp_directory_path() / "cofa_bench";
    std::filesystem::remove_all(dir);
    config.output_dir = dir.string();
    config.node_count = 64;
    config.epochs = 50;
    std::ofstream devnull;
    cofa::run_pipeline(config, true, 1, devnull);
    graph = cofa::load_graph(config.resolve(config.graph_path));
    const auto [manifest, blob] = std::pair(config.resolve(config.features_manifest),
                                            config.resolve(config.features_blob));
    store = cofa::load_feature_store(manifest, blob);
    val = cofa::load_trajectories(config.resolve(config.val_trajectories), config.instr_dim);
    policy = cofa::load_agent(config.resolve("agents") / "agent_ori.json");
    votes = cofa::load_vote_table(config.resolve(config.vote_table_path));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Geodesic(benchmark::State& state) {
  auto& f = fixture();
  const auto ids = f.graph.viewpoint_ids();
  size_t i = 0;
  for (auto _ : state) {
    const auto& a = ids[i % ids.size()];
    const auto& b = ids[(i * 7 + 3) % ids.size()];
    benchmark::DoNotOptimize(f.graph.geodesic(a, b));
    ++i;
  }
}
BENCHMARK(BM_Geodesic);

void BM_ApplyMask(benchmark::State& state) {
  cofa::ViewImage img{64, 64, std::vector<float>(64 * 64 * cofa::kImageChannels, 0.5F)};
  cofa::BinaryMask mask{64, 64, std::vector<uint8_t>(64 * 64, 0)};
  for (size_t p = 0; p < mask.bits.size(); p += 2) mask.bits[p] = 1;
  for (auto _ : state) benchmark::DoNotOptimize(cofa::apply_mask(img, mask));
}
BENCHMARK(BM_ApplyMask);

void BM_ExtractFeatures(benchmark::State& state) {
  cofa::Panorama pano;
  pano.viewpoint_id = "p";
  cofa::ViewImage img{16, 16, std::vector<float>(16 * 16 * cofa::kImageChannels, 0.25F)};
  cofa::BinaryMask mask{16, 16, std::vector<uint8_t>(16 * 16, 0)};
  for (size_t p = 0; p < mask.bits.size(); p += 3) mask.bits[p] = 1;
  pano.views.assign(cofa::kPanoramaViews, img);
  pano.masks.assign(cofa::kPanoramaViews, mask);
  for (auto _ : state)
    benchmark::DoNotOptimize(cofa::extract_features(pano, cofa::Region::fg, 64));
}
BENCHMARK(BM_ExtractFeatures);

void BM_BuildVoteTable(benchmark::State& state) {
  cofa::PreferenceTable table;
  cofa::SplitMix64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    cofa::PreferenceEntry e;
    e.traj_id = "t" + std::to_string(i % 50);
    e.step_index = i % 7;
    e.viewpoint_id = "v" + std::to_string(i % 40);
    e.scores = {rng.next_double(), rng.next_double(), rng.next_double()};
    table.entries.push_back(std::move(e));
  }
  for (auto _ : state) benchmark::DoNotOptimize(cofa::build_vote_table(table));
}
BENCHMARK(BM_BuildVoteTable);

void BM_RunEpisode(benchmark::State& state) {
  auto& f = fixture();
  f.graph.precompute_geodesics();
  cofa::RolloutConfig rc = f.config.rollout_config();
  cofa::AugmentationStrategy strategy = cofa::Cofa{f.votes};
  size_t i = 0;
  for (auto _ : state) {
    const auto& traj = f.val[i % f.val.size()];
    benchmark::DoNotOptimize(cofa::run_episode(f.policy, strategy, traj, f.graph, f.store, rc));
    ++i;
  }
}
BENCHMARK(BM_RunEpisode);

}  // namespace

BENCHMARK_MAIN();
