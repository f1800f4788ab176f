#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cofa/feature_store.hpp"
#include "cofa/voting.hpp"

namespace cofa {

// The four augmentation strategies under comparison.
struct Original {};
struct Replace {
  FeatureKind kind = FeatureKind::fg;  // fg or bg
};
struct Stochastic {
  FeatureKind kind = FeatureKind::fg;  // fg or bg
  uint64_t seed = 0;                   // mixed into the episode draw stream
};
struct Cofa {
  VoteTable table;
};

using AugmentationStrategy = std::variant<Original, Replace, Stochastic, Cofa>;

// Throws if a Replace/Stochastic strategy names a kind outside {fg, bg}.
void validate_strategy(const AugmentationStrategy& strategy);

std::string strategy_name(const AugmentationStrategy& strategy);

// Picks the feature kind for one viewpoint and returns the stored vector.
//   Original       -> ori
//   Replace(k)     -> k
//   Stochastic(k)  -> k when draw > 0.5, else ori (draw = 0.5 keeps ori)
//   Cofa           -> voted label, ori for unlisted viewpoints
// `draw` must come from the episode's deterministic stream; it is ignored by
// every strategy except Stochastic.
std::pair<FeatureKind, std::vector<float>> select_feature(const AugmentationStrategy& strategy,
                                                          const std::string& viewpoint_id,
                                                          const FeatureStore& store, double draw);

}  // namespace cofa
