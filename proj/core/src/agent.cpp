#include "cofa/agent.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cofa/navgraph.hpp"
#include "cofa/rng.hpp"
#include "json.hpp"

namespace cofa {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("agent: " + msg); }

}  // namespace

InstructionRecord make_instruction(const std::string& text, int dim) {
  if (dim <= 0) fail("instruction dim must be positive");
  InstructionRecord record;
  record.text = text;
  record.embedding.assign(dim, 0.0f);

  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    record.embedding[fnv1a64(token) % dim] += 1.0f;
    token.clear();
  };
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    else
      flush();
  }
  flush();

  double norm = 0.0;
  for (float v : record.embedding) norm += static_cast<double>(v) * v;
  if (norm > 0.0) {
    const float inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (auto& v : record.embedding) v *= inv;
  }
  return record;
}

void validate_context(const ActionContext& ctx) {
  if (ctx.candidate_features.size() != ctx.candidate_ids.size())
    fail("context '" + ctx.viewpoint_id + "' has mismatched candidate lists");
  if (ctx.gt_index < 0 || static_cast<size_t>(ctx.gt_index) >= ctx.action_count())
    fail("context '" + ctx.viewpoint_id + "' ground-truth index out of range");
  for (const auto& f : ctx.candidate_features)
    if (f.size() != ctx.current_feature.size())
      fail("context '" + ctx.viewpoint_id + "' candidate feature dim differs from current feature");
}

PolicyAgent::PolicyAgent(FeatureKind kind, int feature_dim, int instr_dim, uint64_t seed)
    : kind_(kind), feature_dim_(feature_dim), instr_dim_(instr_dim), seed_(seed) {
  if (feature_dim <= 0 || instr_dim <= 0) fail("agent dims must be positive");
  weights_.resize(2 * static_cast<size_t>(feature_dim) + instr_dim);
  SplitMix64 rng(mix_key(seed, fnv1a64("agent-init") ^ static_cast<uint64_t>(kind)));
  for (auto& w : weights_) w = rng.next_double() * 0.1 - 0.05;
}

std::vector<double> score_actions(const PolicyAgent& agent, const ActionContext& ctx,
                                  const InstructionRecord& instr) {
  validate_context(ctx);
  const size_t fd = static_cast<size_t>(agent.feature_dim());
  const size_t id = static_cast<size_t>(agent.instr_dim());
  if (ctx.current_feature.size() != fd)
    fail("context feature dim " + std::to_string(ctx.current_feature.size()) +
         " does not match agent dim " + std::to_string(fd));
  if (instr.embedding.size() != id)
    fail("instruction dim " + std::to_string(instr.embedding.size()) +
         " does not match agent dim " + std::to_string(id));

  const auto& w = agent.weights();
  double shared = 0.0;
  for (size_t k = 0; k < fd; ++k) shared += w[k] * ctx.current_feature[k];
  for (size_t k = 0; k < id; ++k) shared += w[2 * fd + k] * instr.embedding[k];

  std::vector<double> logits(ctx.action_count(), shared);
  for (size_t c = 0; c < ctx.candidate_ids.size(); ++c) {
    double dot = 0.0;
    const auto& f = ctx.candidate_features[c];
    for (size_t k = 0; k < fd; ++k) dot += w[fd + k] * f[k];
    logits[c] += dot;
  }
  return logits;  // STOP keeps the shared term only (zero candidate block)
}

double cross_entropy(const std::vector<double>& logits, int gt_index) {
  if (logits.empty()) fail("cross_entropy on empty logits");
  if (gt_index < 0 || static_cast<size_t>(gt_index) >= logits.size())
    fail("cross_entropy ground-truth index out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - mx);
  return std::log(denom) - (logits[gt_index] - mx);
}

double preference_score(const PolicyAgent& agent, const ActionContext& ctx,
                        const InstructionRecord& instr) {
  return cross_entropy(score_actions(agent, ctx, instr), ctx.gt_index);
}

double mean_loss(const PolicyAgent& agent, const std::vector<TrainSample>& dataset,
                 std::vector<double>* gradient) {
  if (dataset.empty()) fail("empty training dataset");
  const size_t fd = static_cast<size_t>(agent.feature_dim());
  const size_t id = static_cast<size_t>(agent.instr_dim());
  if (gradient) gradient->assign(agent.weights().size(), 0.0);

  double total = 0.0;
  for (const auto& sample : dataset) {
    const auto logits = score_actions(agent, sample.ctx, sample.instr);
    const double loss = cross_entropy(logits, sample.ctx.gt_index);
    if (!std::isfinite(loss))
      fail("non-finite loss at sample '" + sample.sample_id + "'");
    total += loss;
    if (!gradient) continue;

    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - mx);
    for (size_t a = 0; a < logits.size(); ++a) {
      const double p = std::exp(logits[a] - mx) / denom;
      const double coef = p - (static_cast<int>(a) == sample.ctx.gt_index ? 1.0 : 0.0);
      for (size_t k = 0; k < fd; ++k) (*gradient)[k] += coef * sample.ctx.current_feature[k];
      if (a < sample.ctx.candidate_ids.size()) {
        const auto& f = sample.ctx.candidate_features[a];
        for (size_t k = 0; k < fd; ++k) (*gradient)[fd + k] += coef * f[k];
      }
      for (size_t k = 0; k < id; ++k) (*gradient)[2 * fd + k] += coef * sample.instr.embedding[k];
    }
  }
  if (gradient)
    for (auto& g : *gradient) g /= static_cast<double>(dataset.size());
  return total / static_cast<double>(dataset.size());
}

std::vector<double> train(PolicyAgent& agent, const std::vector<TrainSample>& dataset, int epochs,
                          double lr) {
  if (dataset.empty()) fail("empty training dataset");
  if (epochs < 0) fail("negative epoch count");
  std::vector<double> curve;
  curve.reserve(epochs);
  std::vector<double> gradient;
  for (int e = 0; e < epochs; ++e) {
    const double loss = mean_loss(agent, dataset, &gradient);
    curve.push_back(loss);
    if (lr != 0.0) {
      auto& w = agent.mutable_weights();
      for (size_t k = 0; k < w.size(); ++k) w[k] -= lr * gradient[k];
    }
  }
  return curve;
}

ActionContext uniform_kind_context(const NavGraph& graph, const FeatureStore& store,
                                   FeatureKind kind, const std::string& viewpoint_id,
                                   const std::optional<std::string>& gt_next) {
  const auto& vp = graph.viewpoint(viewpoint_id);
  ActionContext ctx;
  ctx.viewpoint_id = viewpoint_id;
  ctx.current_feature = store.get(viewpoint_id, kind);
  ctx.candidate_ids = vp.neighbor_ids;
  ctx.candidate_features.reserve(ctx.candidate_ids.size());
  for (const auto& n : ctx.candidate_ids) ctx.candidate_features.push_back(store.get(n, kind));

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

void save_agent(const PolicyAgent& agent, const std::filesystem::path& manifest_path) {
  if (agent.weights().empty()) fail("cannot save an uninitialized agent");
  auto blob_path = manifest_path;
  blob_path.replace_extension(".weights.f32");

  json manifest;
  manifest["feature_kind"] = to_string(agent.feature_kind());
  manifest["feature_dim"] = agent.feature_dim();
  manifest["instr_dim"] = agent.instr_dim();
  manifest["seed"] = agent.seed();
  manifest["weights_blob"] = blob_path.filename().string();
  std::ofstream mf(manifest_path);
  if (!mf) fail("cannot write checkpoint '" + manifest_path.string() + "'");
  mf << manifest.dump(2) << "\n";

  std::vector<uint8_t> bytes;
  bytes.reserve(agent.weights().size() * 4);
  for (double wd : agent.weights()) {
    const float w = static_cast<float>(wd);
    uint32_t u;
    std::memcpy(&u, &w, sizeof(u));
    bytes.push_back(static_cast<uint8_t>(u & 0xff));
    bytes.push_back(static_cast<uint8_t>((u >> 8) & 0xff));
    bytes.push_back(static_cast<uint8_t>((u >> 16) & 0xff));
    bytes.push_back(static_cast<uint8_t>((u >> 24) & 0xff));
  }
  std::ofstream bf(blob_path, std::ios::binary);
  if (!bf) fail("cannot write weights blob '" + blob_path.string() + "'");
  bf.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PolicyAgent load_agent(const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) fail("cannot open checkpoint '" + manifest_path.string() + "'");
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    fail(std::string("checkpoint parse error: ") + e.what());
  }

  const auto kind = kind_from_string(manifest.at("feature_kind").get<std::string>());
  const int feature_dim = manifest.at("feature_dim").get<int>();
  const int instr_dim = manifest.at("instr_dim").get<int>();
  const auto seed = manifest.at("seed").get<uint64_t>();
  PolicyAgent agent(kind, feature_dim, instr_dim, seed);

  const auto blob_path = manifest_path.parent_path() / manifest.at("weights_blob").get<std::string>();
  std::ifstream bf(blob_path, std::ios::binary | std::ios::ate);
  if (!bf) fail("cannot open weights blob '" + blob_path.string() + "'");
  const size_t size = static_cast<size_t>(bf.tellg());
  bf.seekg(0);
  if (size != agent.weights().size() * 4)
    fail("weights blob '" + blob_path.string() + "' has wrong size");
  std::vector<uint8_t> bytes(size);
  bf.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));

  auto& w = agent.mutable_weights();
  for (size_t k = 0; k < w.size(); ++k) {
    const uint8_t* p = bytes.data() + k * 4;
    uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                 (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &u, sizeof(v));
    if (!std::isfinite(v)) fail("non-finite weight in '" + blob_path.string() + "'");
    w[k] = static_cast<double>(v);
  }
  return agent;
}

}  // namespace cofa
