#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsim/errors.hpp"
#include "gsim/state.hpp"

namespace gsim {

struct Component {
  std::string name;
  std::vector<std::string> states;
  int initial = 0;
};

struct ProcessVariable {
  std::string name;
  std::string unit;
  double initial = 0.0;
  // Declared range, used for value-table binning.
  double lower = 0.0;
  double upper = 1.0;
};

/// Contract for a hybrid stochastic system: deterministic drift between
/// jumps, state-dependent jump rates, and an end-state classifier.
///
/// Implementations must be pure: every virtual is const, holds no mutable
/// evaluation state, and may be called concurrently.
class SystemModel {
 public:
  SystemModel(std::string name, std::vector<Component> components,
              std::vector<ProcessVariable> process, double mission_time,
              double max_substep = 0.1)
      : name_(std::move(name)),
        components_(std::move(components)),
        process_(std::move(process)),
        mission_time_(mission_time),
        max_substep_(max_substep) {
    if (components_.empty()) throw ConfigError("model has no components");
    for (const auto& c : components_) {
      if (c.states.empty() || c.states.size() > 255)
        throw ConfigError("component '" + c.name +
                          "' must have between 1 and 255 states");
      if (c.initial < 0 || c.initial >= static_cast<int>(c.states.size()))
        throw ConfigError("component '" + c.name + "' has invalid initial state");
    }
    if (!(mission_time_ > 0.0) || !std::isfinite(mission_time_))
      throw ConfigError("mission_time must be positive and finite");
    if (!(max_substep_ > 0.0) || !std::isfinite(max_substep_))
      throw ConfigError("max_substep must be positive and finite");
  }

  virtual ~SystemModel() = default;
  SystemModel(const SystemModel&) = delete;
  SystemModel& operator=(const SystemModel&) = delete;

  const std::string& name() const noexcept { return name_; }
  const std::vector<Component>& components() const noexcept { return components_; }
  const std::vector<ProcessVariable>& process_variables() const noexcept { return process_; }
  std::size_t component_count() const noexcept { return components_.size(); }
  std::size_t process_dimension() const noexcept { return process_.size(); }
  int cardinality(std::size_t component) const {
    return static_cast<int>(components_.at(component).states.size());
  }
  double mission_time() const noexcept { return mission_time_; }
  double max_substep() const noexcept { return max_substep_; }

  SystemState initial_state() const {
    SystemState s;
    for (const auto& c : components_) s.config.push_back(c.initial);
    for (const auto& p : process_) s.process.push_back(p.initial);
    return s;
  }

  /// Raw dr/dt. Prefer the checked free function gsim::drift.
  virtual std::vector<double> derivative(const SystemState& state) const = 0;

  /// Jump candidates out of state.config; empty means absorbing.
  virtual std::vector<TransitionCandidate> transitions(const SystemState& state) const = 0;

  virtual EndStateClass classify(const SystemState& state) const = 0;

  /// Every end class this model can produce, in declaration order.
  virtual std::vector<EndStateClass> end_classes() const = 0;

  /// Describes the first rate that depends on process variables, or
  /// nullopt when all rates depend on the configuration only.
  virtual std::optional<std::string> process_dependence() const {
    if (process_dimension() == 0) return std::nullopt;
    return "model '" + name_ + "' does not declare rate independence";
  }

  /// Short hex digest identifying the model content.
  virtual std::string content_hash() const = 0;

 private:
  std::string name_;
  std::vector<Component> components_;
  std::vector<ProcessVariable> process_;
  double mission_time_;
  double max_substep_;
};

inline void validate_config(const SystemModel& model, const Config& config) {
  if (config.size() != model.component_count())
    throw UsageError("config has " + std::to_string(config.size()) +
                     " entries, model declares " +
                     std::to_string(model.component_count()));
  for (std::size_t i = 0; i < config.size(); ++i)
    if (config[i] < 0 || config[i] >= model.cardinality(i))
      throw UsageError("config entry " + std::to_string(i) + " out of range");
}

inline void validate_state(const SystemModel& model, const SystemState& state) {
  validate_config(model, state.config);
  if (state.process.size() != model.process_dimension())
    throw UsageError("process vector has wrong length");
  for (std::size_t i = 0; i < state.process.size(); ++i)
    if (!std::isfinite(state.process[i]))
      throw UsageError("process entry " + std::to_string(i) + " is not finite");
  if (!std::isfinite(state.time) || state.time < 0.0)
    throw UsageError("state time must be finite and nonnegative");
}

/// Checked drift: f(config, process, t).
inline std::vector<double> drift(const SystemModel& model, const SystemState& state) {
  validate_state(model, state);
  auto d = model.derivative(state);
  if (d.size() != model.process_dimension())
    throw ModelError("drift returned " + std::to_string(d.size()) +
                     " entries, expected " + std::to_string(model.process_dimension()));
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!std::isfinite(d[i]))
      throw ModelError("drift component " + std::to_string(i) + " (" +
                       model.process_variables()[i].name + ") is not finite");
  return d;
}

/// Advances the continuous part over dt with fixed-step classical RK4.
/// Substep h = dt / ceil(dt / max_substep). Configuration is untouched.
inline SystemState integrate_segment(const SystemModel& model, SystemState state, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("integrate_segment requires dt > 0");
  validate_state(model, state);
  const std::size_t dim = model.process_dimension();
  if (dim > 0) {
    const auto n = static_cast<long>(std::ceil(dt / model.max_substep() - 1e-9));
    const long steps = std::max(1L, n);
    const double h = dt / static_cast<double>(steps);
    const double t0 = state.time;

    SystemState probe = state;
    auto eval = [&](const std::vector<double>& r, double t) {
      probe.process = r;
      probe.time = t;
      auto d = model.derivative(probe);
      if (d.size() != dim) throw ModelError("drift returned wrong length");
      for (double v : d)
        if (!std::isfinite(v))
          throw IntegrationError("non-finite drift at t=" + std::to_string(t), t);
      return d;
    };

    std::vector<double> r = state.process, tmp(dim);
    for (long k = 0; k < steps; ++k) {
      const double t = t0 + static_cast<double>(k) * h;
      const auto k1 = eval(r, t);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = r[i] + 0.5 * h * k1[i];
      const auto k2 = eval(tmp, t + 0.5 * h);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = r[i] + 0.5 * h * k2[i];
      const auto k3 = eval(tmp, t + 0.5 * h);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = r[i] + h * k3[i];
      const auto k4 = eval(tmp, t + h);
      for (std::size_t i = 0; i < dim; ++i) {
        r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!std::isfinite(r[i]))
          throw IntegrationError("non-finite process value at t=" + std::to_string(t + h),
                                 t + h);
      }
    }
    state.process = std::move(r);
  }
  state.time += dt;
  return state;
}

struct Branch {
  Config config;
  double probability = 0.0;
};

/// Competing-risks branch distribution over one interval with rates frozen
/// at the segment start. Entry 0 is always "stay"; jumps follow, sorted by
/// (first changed component, target configuration). Zero-rate candidates
/// are dropped and duplicate targets are merged.
inline std::vector<Branch> branch_distribution(const SystemModel& model,
                                               const SystemState& state, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("branch_distribution requires dt > 0");
  validate_state(model, state);
  auto cands = model.transitions(state);

  struct Keyed {
    std::size_t first_changed;
    TransitionCandidate cand;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(cands.size());
  for (auto& c : cands) {
    if (!std::isfinite(c.rate) || c.rate < 0.0)
      throw ModelError("model '" + model.name() + "' returned invalid rate " +
                       std::to_string(c.rate));
    if (c.target_config.size() != state.config.size())
      throw ModelError("transition target has wrong length");
    std::size_t first = c.target_config.size();
    for (std::size_t i = 0; i < c.target_config.size(); ++i) {
      if (c.target_config[i] < 0 || c.target_config[i] >= model.cardinality(i))
        throw ModelError("transition target entry " + std::to_string(i) + " out of range");
      if (first == c.target_config.size() && c.target_config[i] != state.config[i]) first = i;
    }
    if (first == c.target_config.size())
      throw ModelError("transition target equals the source configuration");
    if (c.rate == 0.0) continue;
    keyed.push_back({first, std::move(c)});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.first_changed != b.first_changed) return a.first_changed < b.first_changed;
    return a.cand.target_config < b.cand.target_config;
  });
  std::vector<Keyed> merged;
  for (auto& k : keyed) {
    if (!merged.empty() && merged.back().cand.target_config == k.cand.target_config)
      merged.back().cand.rate += k.cand.rate;
    else
      merged.push_back(std::move(k));
  }

  double total = 0.0;
  for (const auto& k : merged) total += k.cand.rate;

  std::vector<Branch> out;
  out.reserve(merged.size() + 1);
  if (total == 0.0) {
    out.push_back({state.config, 1.0});
    return out;
  }
  const double jump = -std::expm1(-total * dt);
  out.push_back({state.config, std::exp(-total * dt)});
  for (auto& k : merged)
    out.push_back({std::move(k.cand.target_config), k.cand.rate / total * jump});
  return out;
}

/// Human-readable label for the jump from -> to: "stay" when equal,
/// otherwise "name:old->new" per changed component, comma separated.
inline std::string event_label(const SystemModel& model, const Config& from, const Config& to) {
  std::string out;
  for (std::size_t i = 0; i < from.size() && i < to.size(); ++i) {
    if (from[i] == to[i]) continue;
    const auto& c = model.components()[i];
    if (!out.empty()) out += ',';
    out += c.name + ':' + c.states.at(from[i]) + "->" + c.states.at(to[i]);
  }
  return out.empty() ? std::string("stay") : out;
}

/// Applies a jump at segment start, then integrates the continuous part.
inline SystemState advance(const SystemModel& model, const SystemState& state,
                           const Config& successor, double dt) {
  SystemState next = state;
  next.config = successor;
  return integrate_segment(model, std::move(next), dt);
}

}  // namespace gsim
