#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gsim/gsim.hpp"

namespace gsim::testing {

inline std::unique_ptr<TableModel> model_from(const std::string& json_text) {
  return TableModel::from_json(nlohmann::json::parse(json_text));
}

/// One process variable r with dr/dt = a*r + b and no transitions.
inline std::unique_ptr<TableModel> scalar_ode(double a, double b, double r0 = 1.0,
                                              double mission = 100.0) {
  nlohmann::json doc = {
      {"name", "scalar_ode"},
      {"mission_time", mission},
      {"components", {{{"name", "c"}, {"states", {"only"}}}}},
      {"process", {{{"name", "r"}, {"unit", "1"}, {"initial", r0}, {"range", {-10.0, 10.0}}}}},
      {"drift", {{{"variable", "r"}, {"constant", b}, {"linear", {{"r", a}}}}}}};
  return TableModel::from_json(doc);
}

/// Single component ok -> failed at `rate`; failed is Target("failure").
inline std::unique_ptr<TableModel> single_rate(double rate, double mission = 10.0) {
  nlohmann::json doc = {
      {"name", "single_rate"},
      {"mission_time", mission},
      {"components", {{{"name", "unit"}, {"states", {"ok", "failed"}}}}},
      {"rates", {{{"component", "unit"}, {"from", "ok"}, {"to", "failed"}, {"rate", rate}}}},
      {"end_states",
       {{{"class", "target"}, {"label", "failure"}, {"config", {{"unit", "failed"}}}}}}};
  return TableModel::from_json(doc);
}

/// Components a and b; in each unit step each fails independently with
/// probability 0.1, both may fail in the same step. Both failed is
/// Target("both_failed"). Realized with competing rates whose one-step
/// branch probabilities at dt = 1 are exactly 0.81 / 0.09 / 0.09 / 0.01.
class DiscreteStepFixture final : public SystemModel {
 public:
  DiscreteStepFixture()
      : SystemModel("discrete_step",
                    {{"a", {"ok", "failed"}, 0}, {"b", {"ok", "failed"}, 0}}, {}, 2.0) {}

  std::vector<double> derivative(const SystemState&) const override { return {}; }

  std::vector<TransitionCandidate> transitions(const SystemState& s) const override {
    const double both_ok = -std::log(0.81);
    const double one_ok = -std::log(0.9);
    const auto& c = s.config;
    if (c[0] == 0 && c[1] == 0)
      return {{{1, 0}, both_ok * 0.09 / 0.19},
              {{0, 1}, both_ok * 0.09 / 0.19},
              {{1, 1}, both_ok * 0.01 / 0.19}};
    if (c[0] == 0) return {{{1, 1}, one_ok}};
    if (c[1] == 0) return {{{1, 1}, one_ok}};
    return {};
  }

  EndStateClass classify(const SystemState& s) const override {
    if (s.config[0] == 1 && s.config[1] == 1) return EndStateClass::target("both_failed");
    return EndStateClass::ongoing();
  }

  std::vector<EndStateClass> end_classes() const override {
    return {EndStateClass::target("both_failed")};
  }

  std::optional<std::string> process_dependence() const override { return std::nullopt; }
  std::string content_hash() const override { return "discrete-step-fixture"; }
};

/// The exact both-failed probability of DiscreteStepFixture over 2 steps.
inline constexpr double kBothFailedTwoSteps = 0.0361;

}  // namespace gsim::testing
