#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cofa/experiment.hpp"
#include "cofa/rollout.hpp"
#include "cofa/trajectory.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cofa;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> slurp_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[std::filesystem::relative(entry.path(), root).generic_string()] = slurp(entry.path());
  }
  return files;
}

int run_cli(const std::string& args, const std::filesystem::path& log_path) {
  const std::string cmd =
      std::string(COFA_CLI_PATH) + " " + args + " > " + log_path.string() + " 2>&1";
  return std::system(cmd.c_str());
}

// One real pipeline run shared by every case in this file.
struct CliFixture {
  std::filesystem::path root;
  std::filesystem::path config_path;
  std::filesystem::path log_path;
  ExperimentConfig config;
  int exit_code = -1;
  std::string log;

  std::filesystem::path out(const std::string& rel) const { return config.resolve(rel); }
};

const CliFixture& fixture() {
  static const CliFixture fix = [] {
    CliFixture f;
    f.root = std::filesystem::temp_directory_path() / "cofa_cli_test";
    std::filesystem::remove_all(f.root);
    std::filesystem::create_directories(f.root);

    f.config.output_dir = (f.root / "out").string();
    f.config.node_count = 24;
    f.config.feature_dim = 16;
    f.config.instr_dim = 8;
    f.config.image_width = 4;
    f.config.image_height = 4;
    f.config.epochs = 60;
    f.config.step_limit = 12;
    f.config_path = f.root / "config.json";
    save_config(f.config, f.config_path);

    f.log_path = f.root / "pipeline.log";
    f.exit_code = run_cli("pipeline --config " + f.config_path.string() + " --jobs 2", f.log_path);
    f.log = slurp(f.log_path);
    return f;
  }();
  return fix;
}

}  // namespace

TEST_CASE("the pipeline subcommand produces the full artifact set") {
  const auto& f = fixture();
  INFO(f.log);
  REQUIRE(f.exit_code == 0);

  for (const auto* rel :
       {"graph.json", "features.json", "features.blob", "trajectories_train.jsonl",
        "trajectories_val.jsonl", "ingest_report.json", "vote_table.json",
        "agents/agent_ori.json", "agents/agent_fg.json", "agents/agent_bg.json",
        "summaries/table.txt", "distribution.csv"}) {
    CAPTURE(rel);
    CHECK(std::filesystem::exists(f.out(rel)));
  }
  for (const auto& name : kStrategyNames) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(f.out("episodes/episodes_" + name + ".jsonl")));
    CHECK(std::filesystem::exists(f.out("summaries/summary_" + name + ".json")));
  }
  CHECK(std::filesystem::is_directory(f.out("panoramas")));

  SUBCASE("the ingest report reflects full coverage") {
    const auto report = nlohmann::json::parse(slurp(f.out("ingest_report.json")));
    CHECK(report.at("viewpoints").get<int>() == f.config.node_count);
    CHECK(report.at("records").get<int>() == f.config.node_count * 3);
    CHECK(report.at("dim").get<int>() == f.config.feature_dim);
    CHECK(!report.at("scan_id").get<std::string>().empty());
  }
  SUBCASE("each strategy was rolled out over the whole validation split") {
    const auto val = load_trajectories(f.out("trajectories_val.jsonl"), f.config.instr_dim);
    for (const auto* name : {"original", "cofa", "random_walk"}) {
      const auto episodes = load_episodes(f.out("episodes/episodes_" + std::string(name) + ".jsonl"));
      CHECK(episodes.size() == val.size());
    }
  }
  SUBCASE("the metrics table lists every strategy") {
    const auto table = slurp(f.out("summaries/table.txt"));
    CHECK(table.find("strategy") == 0);
    for (const auto& name : kStrategyNames) CHECK(table.find(name) != std::string::npos);
    for (const auto* col : {"TL", "SR", "SPL", "RGS", "RGSPL"})
      CHECK(table.find(col) != std::string::npos);
  }
}

TEST_CASE("a second run skips completed stages and changes nothing") {
  const auto& f = fixture();
  REQUIRE(f.exit_code == 0);
  const auto before = slurp_tree(f.out(""));

  const auto log_path = f.root / "rerun.log";
  const int rc = run_cli("pipeline --config " + f.config_path.string() + " --jobs 2", log_path);
  const auto log = slurp(log_path);
  INFO(log);
  CHECK(rc == 0);
  CHECK(log.find("up to date") != std::string::npos);
  CHECK(slurp_tree(f.out("")) == before);
}

TEST_CASE("a forced run recomputes everything to identical bytes") {
  const auto& f = fixture();
  REQUIRE(f.exit_code == 0);
  const auto before = slurp_tree(f.out(""));

  const auto log_path = f.root / "force.log";
  const int rc =
      run_cli("pipeline --config " + f.config_path.string() + " --jobs 2 --force", log_path);
  const auto log = slurp(log_path);
  INFO(log);
  CHECK(rc == 0);
  CHECK(log.find("up to date") == std::string::npos);
  CHECK(slurp_tree(f.out("")) == before);
}

TEST_CASE("stage subcommands rerun a single stage in place") {
  const auto& f = fixture();
  REQUIRE(f.exit_code == 0);
  const auto vote_before = slurp(f.out("vote_table.json"));
  const auto csv_before = slurp(f.out("distribution.csv"));

  CHECK(run_cli("vote --config " + f.config_path.string() + " --force", f.root / "vote.log") == 0);
  CHECK(slurp(f.out("vote_table.json")) == vote_before);

  CHECK(run_cli("analyze --config " + f.config_path.string() + " --force",
                f.root / "analyze.log") == 0);
  CHECK(slurp(f.out("distribution.csv")) == csv_before);
}

TEST_CASE("eval reprints metrics from stored episodes") {
  const auto& f = fixture();
  REQUIRE(f.exit_code == 0);

  const auto log_path = f.root / "eval.log";
  const int rc = run_cli("eval --config " + f.config_path.string(), log_path);
  const auto log = slurp(log_path);
  INFO(log);
  REQUIRE(rc == 0);
  for (const auto* col : {"strategy", "TL", "SR", "SPL", "RGS", "RGSPL"})
    CHECK(log.find(col) != std::string::npos);

  const auto doc = nlohmann::json::parse(slurp(f.out("summaries/summaries.json")));
  CHECK(!doc.at("created_utc").get<std::string>().empty());
  REQUIRE(doc.at("strategies").size() == kStrategyNames.size());
  for (const auto& name : kStrategyNames) {
    const auto& entry = doc.at("strategies").at(name);
    CHECK(entry.at("episode_count").get<int>() > 0);
    CHECK(entry.contains("tl"));
    CHECK(entry.contains("sr"));
    CHECK(entry.contains("spl"));
  }
}

TEST_CASE("the preference analysis covers four splits that each sum to 100") {
  const auto& f = fixture();
  REQUIRE(f.exit_code == 0);

  std::ifstream in(f.out("distribution.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "split,kind,percent");

  std::map<std::string, double> sums;
  std::map<std::string, int> rows;
  std::string line;
  int total_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string split, kind, percent;
    std::getline(fields, split, ',');
    std::getline(fields, kind, ',');
    std::getline(fields, percent, ',');
    CHECK((kind == "ori" || kind == "fg" || kind == "bg"));
    sums[split] += std::stod(percent);
    rows[split]++;
    ++total_rows;
  }
  CHECK(total_rows == 12);
  const std::set<std::string> expected = {"train", "val", "rooms", "corridors"};
  std::set<std::string> seen;
  for (const auto& [split, count] : rows) {
    seen.insert(split);
    CHECK(count == 3);
    CHECK(sums[split] == doctest::Approx(100.0).epsilon(1e-6));
  }
  CHECK(seen == expected);
}

TEST_CASE("configs round-trip through JSON and reject bad strategies") {
  const auto& f = fixture();
  CHECK(config_from_json(config_to_json(f.config)) == f.config);
  CHECK(load_config(f.config_path) == f.config);
  CHECK(config_from_json(config_to_json(ExperimentConfig{})) == ExperimentConfig{});

  auto bad = f.config;
  bad.strategy = "random_walk";  // rollout-only baseline, not a selectable strategy
  CHECK_THROWS_AS(validate_config(bad), std::runtime_error);
  bad.strategy = "bogus";
  CHECK_THROWS_AS(validate_config(bad), std::runtime_error);
  CHECK_THROWS_AS(config_from_json("not json"), std::runtime_error);
}

TEST_CASE("bad invocations exit nonzero") {
  const auto& f = fixture();
  const auto log_path = f.root / "bad.log";
  CHECK(run_cli("generate --config " + f.config_path.string() + " --nodes 1", log_path) != 0);
  CHECK(run_cli("frobnicate", log_path) != 0);
  CHECK(run_cli("pipeline --config " + (f.root / "missing.json").string(), log_path) != 0);
  CHECK(run_cli("pipeline --config " + f.config_path.string() + " --jobs 0", log_path) != 0);
}
