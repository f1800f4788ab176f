#include "cofa/augment.hpp"

#include <stdexcept>

namespace cofa {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("augment: " + msg); }

void check_kind(FeatureKind kind, const char* which) {
  if (kind != FeatureKind::fg && kind != FeatureKind::bg)
    fail(std::string(which) + " strategy kind must be fg or bg, got '" + to_string(kind) + "'");
}

}  // namespace

void validate_strategy(const AugmentationStrategy& strategy) {
  if (const auto* r = std::get_if<Replace>(&strategy)) check_kind(r->kind, "replace");
  if (const auto* s = std::get_if<Stochastic>(&strategy)) check_kind(s->kind, "stochastic");
}

std::string strategy_name(const AugmentationStrategy& strategy) {
  struct Namer {
    std::string operator()(const Original&) const { return "original"; }
    std::string operator()(const Replace& r) const { return "replace_" + to_string(r.kind); }
    std::string operator()(const Stochastic& s) const { return "stochastic_" + to_string(s.kind); }
    std::string operator()(const Cofa&) const { return "cofa"; }
  };
  return std::visit(Namer{}, strategy);
}

std::pair<FeatureKind, std::vector<float>> select_feature(const AugmentationStrategy& strategy,
                                                          const std::string& viewpoint_id,
                                                          const FeatureStore& store, double draw) {
  validate_strategy(strategy);
  struct Chooser {
    const std::string& viewpoint_id;
    double draw;
    FeatureKind operator()(const Original&) const { return FeatureKind::ori; }
    FeatureKind operator()(const Replace& r) const { return r.kind; }
    FeatureKind operator()(const Stochastic& s) const {
      return draw > 0.5 ? s.kind : FeatureKind::ori;
    }
    FeatureKind operator()(const Cofa& c) const { return c.table.final_kind(viewpoint_id); }
  };
  const FeatureKind kind = std::visit(Chooser{viewpoint_id, draw}, strategy);
  return {kind, store.get(viewpoint_id, kind)};
}

}  // namespace cofa
