#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cofa/feature_store.hpp"

namespace cofa {

class NavGraph;

struct InstructionRecord {
  std::string text;
  std::vector<float> embedding;
};

// Hashed bag-of-words embedding: lowercase tokens on non-alphanumeric boundaries,
// each token adds 1 to slot fnv1a64(token) % dim, then L2-normalize.
// Empty or token-free text embeds to the zero vector.
InstructionRecord make_instruction(const std::string& text, int dim = 16);

// One decision point: candidates are the neighbor viewpoints in order, then STOP.
// STOP's candidate feature is the zero vector and is not stored explicitly.
struct ActionContext {
  std::string viewpoint_id;
  std::vector<std::string> candidate_ids;  // neighbors only; STOP is implicit at index size()
  std::vector<float> current_feature;
  std::vector<std::vector<float>> candidate_features;  // parallel to candidate_ids
  int gt_index = 0;                                    // in [0, candidate_ids.size()]; size() means STOP

  size_t action_count() const { return candidate_ids.size() + 1; }
  size_t stop_index() const { return candidate_ids.size(); }
};

void validate_context(const ActionContext& ctx);

// Linear scorer over concat(current feature, candidate feature, instruction embedding).
class PolicyAgent {
 public:
  PolicyAgent() = default;
  PolicyAgent(FeatureKind kind, int feature_dim, int instr_dim, uint64_t seed);

  FeatureKind feature_kind() const { return kind_; }
  int feature_dim() const { return feature_dim_; }
  int instr_dim() const { return instr_dim_; }
  uint64_t seed() const { return seed_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& mutable_weights() { return weights_; }

 private:
  FeatureKind kind_ = FeatureKind::ori;
  int feature_dim_ = 0;
  int instr_dim_ = 0;
  uint64_t seed_ = 0;
  std::vector<double> weights_;  // length 2*feature_dim + instr_dim
};

// logit[k] = w . concat(ctx.current_feature, candidate_feature_k, instr.embedding);
// the STOP logit uses a zero candidate block.
std::vector<double> score_actions(const PolicyAgent& agent, const ActionContext& ctx,
                                  const InstructionRecord& instr);

// -log softmax(logits)[gt_index], stabilized by max subtraction.
double cross_entropy(const std::vector<double>& logits, int gt_index);

double preference_score(const PolicyAgent& agent, const ActionContext& ctx,
                        const InstructionRecord& instr);

struct TrainSample {
  ActionContext ctx;
  InstructionRecord instr;
  std::string sample_id;  // reported when a sample produces a non-finite loss
};

// Full-batch gradient descent on mean cross-entropy.  Returns the per-epoch
// mean loss (length epochs).  lr = 0 or epochs = 0 leaves weights untouched.
std::vector<double> train(PolicyAgent& agent, const std::vector<TrainSample>& dataset, int epochs,
                          double lr);

// Mean cross-entropy and its analytic gradient at the agent's current weights.
double mean_loss(const PolicyAgent& agent, const std::vector<TrainSample>& dataset,
                 std::vector<double>* gradient = nullptr);

// Context where every feature (current and candidates) comes from one kind.
ActionContext uniform_kind_context(const NavGraph& graph, const FeatureStore& store,
                                   FeatureKind kind, const std::string& viewpoint_id,
                                   const std::optional<std::string>& gt_next);

// Checkpoint: JSON manifest {feature_kind, feature_dim, instr_dim, seed, weights_blob}
// plus a little-endian f32 blob of the weights next to it.
void save_agent(const PolicyAgent& agent, const std::filesystem::path& manifest_path);
PolicyAgent load_agent(const std::filesystem::path& manifest_path);

}  // namespace cofa
