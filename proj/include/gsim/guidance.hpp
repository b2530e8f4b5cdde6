#pragma once

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gsim/errors.hpp"
#include "gsim/model.hpp"
#include "gsim/rng.hpp"
#include "gsim/tree.hpp"

namespace gsim {

/// Floor added to lookahead and value scores so no node starves.
inline constexpr double kScoreFloor = 1e-6;

struct UniformPolicy {};

/// Multipliers keyed by glob patterns over atomic event labels
/// ("component:from->to"). A label's multiplier is the product of every
/// matching pattern's multiplier.
struct PlanBiasPolicy {
  std::vector<std::pair<std::string, double>> weights;
};

struct EntropyLookaheadPolicy {
  int horizon = 2;
};

struct TDValuePolicy {
  double alpha = 0.3;
  double gamma = 0.95;
  double epsilon = 0.1;
  // Per process variable; empty means 16 bins for every variable.
  std::vector<int> bins;
};

using GuidancePolicy =
    std::variant<UniformPolicy, PlanBiasPolicy, EntropyLookaheadPolicy, TDValuePolicy>;

inline void validate_policy(const GuidancePolicy& policy) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PlanBiasPolicy>) {
          for (const auto& [pattern, m] : p.weights)
            if (!(m > 0.0) || !std::isfinite(m))
              throw DomainError("plan multiplier for '" + pattern + "' must be positive");
        } else if constexpr (std::is_same_v<P, EntropyLookaheadPolicy>) {
          if (p.horizon < 1) throw DomainError("lookahead horizon must be at least 1");
        } else if constexpr (std::is_same_v<P, TDValuePolicy>) {
          if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
          if (!(p.gamma > 0.0 && p.gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1]");
          if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0))
            throw DomainError("epsilon must lie in [0, 1]");
          for (int b : p.bins)
            if (b < 1) throw DomainError("bin counts must be positive");
        }
      },
      policy);
}

inline std::string policy_name(const GuidancePolicy& policy) {
  static constexpr const char* names[] = {"uniform", "plan", "entropy", "td"};
  return names[policy.index()];
}

inline nlohmann::ordered_json policy_params(const GuidancePolicy& policy) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PlanBiasPolicy>) {
          nlohmann::ordered_json w = nlohmann::ordered_json::object();
          for (const auto& [pattern, m] : p.weights) w[pattern] = m;
          j["weights"] = w;
        } else if constexpr (std::is_same_v<P, EntropyLookaheadPolicy>) {
          j["horizon"] = p.horizon;
        } else if constexpr (std::is_same_v<P, TDValuePolicy>) {
          j["alpha"] = p.alpha;
          j["gamma"] = p.gamma;
          j["epsilon"] = p.epsilon;
          j["bins"] = p.bins;
        }
      },
      policy);
  return j;
}

/// Reads {"weights": {"<glob>": multiplier, ...}}. Patterns keep file order.
inline PlanBiasPolicy load_plan_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan weight file: " + path.string());
  PlanBiasPolicy p;
  try {
    const auto doc = nlohmann::ordered_json::parse(in);
    for (const auto& [pattern, m] : doc.at("weights").items()) {
      if (!m.is_number()) throw ConfigError("multiplier for '" + pattern + "' is not a number");
      p.weights.emplace_back(pattern, m.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("plan weight file " + path.string() + ": " + e.what());
  }
  try {
    validate_policy(p);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

inline double plan_multiplier(const PlanBiasPolicy& plan, std::string_view label) {
  double m = 1.0;
  std::size_t start = 0;
  while (start <= label.size()) {
    const auto end = std::min(label.find(',', start), label.size());
    const std::string part(label.substr(start, end - start));
    for (const auto& [pattern, w] : plan.weights)
      if (::fnmatch(pattern.c_str(), part.c_str(), 0) == 0) m *= w;
    start = end + 1;
  }
  return m;
}

/// Maps a state to a table key: configuration followed by one uniform bin
/// index per process variable over its declared range.
class Discretizer {
 public:
  Discretizer() = default;
  Discretizer(const SystemModel& model, std::vector<int> bins) : bins_(std::move(bins)) {
    const auto& vars = model.process_variables();
    if (bins_.empty()) bins_.assign(vars.size(), 16);
    if (bins_.size() != vars.size())
      throw DomainError("need one bin count per process variable");
    for (const auto& v : vars) {
      lower_.push_back(v.lower);
      upper_.push_back(v.upper);
    }
  }

  std::vector<int> key(const SystemState& s) const {
    std::vector<int> k(s.config);
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      const double frac = (s.process[i] - lower_[i]) / (upper_[i] - lower_[i]);
      const double b = std::floor(frac * bins_[i]);
      k.push_back(static_cast<int>(std::clamp(b, 0.0, static_cast<double>(bins_[i] - 1))));
    }
    return k;
  }

  const std::vector<int>& bins() const noexcept { return bins_; }

 private:
  std::vector<int> bins_;
  std::vector<double> lower_, upper_;
};

/// Tabular state-value function; unseen keys read as 0.
class ValueTable {
 public:
  using Key = std::vector<int>;

  ValueTable() = default;
  explicit ValueTable(Discretizer d) : disc_(std::move(d)) {}

  Key key(const SystemState& s) const { return disc_.key(s); }
  double get(const Key& k) const {
    auto it = values_.find(k);
    return it == values_.end() ? 0.0 : it->second;
  }
  double value(const SystemState& s) const { return get(key(s)); }
  void set(const Key& k, double v) { values_[k] = v; }

  std::size_t size() const noexcept { return values_.size(); }
  const std::map<Key, double>& entries() const noexcept { return values_; }
  const Discretizer& discretizer() const noexcept { return disc_; }

  bool within_unit_interval() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](const auto& kv) { return kv.second >= 0.0 && kv.second <= 1.0; });
  }

 private:
  Discretizer disc_;
  std::map<Key, double> values_;
};

/// Shannon entropy in bits, with 0 log 0 = 0.
inline double shannon_entropy(std::span<const double> p) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("probabilities must be nonnegative");
    total += x;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DomainError("probabilities must sum to 1");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return std::max(0.0, h);
}

namespace detail {

inline double target_within(const SystemModel& model, const SystemState& s, double dt, int d) {
  if (d == 0) return 0.0;
  double p = 0.0;
  for (const auto& b : branch_distribution(model, s, dt)) {
    const auto next = advance(model, s, b.config, dt);
    const auto cls = model.classify(next);
    if (cls.is_target())
      p += b.probability;
    else if (cls.is_ongoing())
      p += b.probability * target_within(model, next, dt, d - 1);
  }
  return p;
}

}  // namespace detail

/// Probability of hitting a Target state within d segments, by exact
/// expansion of the d-step subtree.
inline double lookahead_score(const SystemModel& model, const SystemState& state, double dt,
                              int d) {
  if (d < 1) throw DomainError("lookahead depth must be at least 1");
  const auto cls = model.classify(state);
  if (cls.is_target()) return 1.0;
  if (!cls.is_ongoing()) return 0.0;
  return detail::target_within(model, state, dt, d);
}

inline double lookahead_score(const TreeNode& node, const SystemModel& model, double dt, int d) {
  return lookahead_score(model, node.state, dt, d);
}

/// Guidance weight of a tree node computed from scratch; score = path_prob
/// times this weight.
inline double node_weight(const GuidancePolicy& policy, const ScenarioTree& tree, NodeId id,
                          const SystemModel& model, const ValueTable* table, double dt) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, UniformPolicy>) {
          return 1.0;
        } else if constexpr (std::is_same_v<P, PlanBiasPolicy>) {
          std::vector<NodeId> path;
          for (std::optional<NodeId> c = id; c; c = tree.parent(*c)) path.push_back(*c);
          double w = 1.0;
          for (auto it = path.rbegin() + 1; it != path.rend(); ++it)
            w *= plan_multiplier(p, tree.event_label(*it));
          return w;
        } else if constexpr (std::is_same_v<P, EntropyLookaheadPolicy>) {
          return lookahead_score(model, tree.state(id), dt, p.horizon) + kScoreFloor;
        } else {
          return (table ? table->value(tree.state(id)) : 0.0) + kScoreFloor;
        }
      },
      policy);
}

struct RankedNode {
  NodeId id;
  double score;
};

/// Scores the frontier and orders it by descending score, ties by id.
inline std::vector<RankedNode> rank_frontier(const GuidancePolicy& policy, const ScenarioTree& tree,
                                             std::span<const NodeId> frontier,
                                             const SystemModel& model, const ValueTable* table,
                                             double dt) {
  if (frontier.empty()) throw UsageError("cannot rank an empty frontier");
  std::vector<RankedNode> out;
  out.reserve(frontier.size());
  for (NodeId id : frontier)
    out.push_back({id, tree.path_prob(id) * node_weight(policy, tree, id, model, table, dt)});
  std::sort(out.begin(), out.end(), [](const RankedNode& a, const RankedNode& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

/// One backward temporal-difference sweep along the trajectory.
inline void td_update(ValueTable& table, const Trajectory& traj, double reward, double alpha,
                      double gamma) {
  if (traj.steps.empty()) throw UsageError("td_update needs a non-empty trajectory");
  if (!(reward >= 0.0 && reward <= 1.0)) throw DomainError("reward must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1]");
  auto next_key = table.key(traj.steps.back().state);
  table.set(next_key, reward);
  for (std::size_t i = traj.steps.size() - 1; i-- > 0;) {
    auto k = table.key(traj.steps[i].state);
    const double v = table.get(k);
    table.set(k, v + alpha * (gamma * table.get(next_key) - v));
    next_key = std::move(k);
  }
}

struct BiasedChoice {
  std::size_t index;
  double likelihood_ratio;
};

struct BiasedBranch {
  double q;                 // sampling probability p_i w_i / sum_j p_j w_j
  double likelihood_ratio;  // p_i / q_i
};

/// The sampling law behind select_branch_biased, for exhaustive checks.
inline std::vector<BiasedBranch> biased_distribution(std::span<const double> base,
                                                     std::span<const double> weights) {
  if (base.size() != weights.size() || base.empty())
    throw UsageError("base probabilities and weights must have equal, nonzero length");
  double norm = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw DomainError("branch weights must be positive");
    if (!(base[i] >= 0.0)) throw DomainError("base probabilities must be nonnegative");
    norm += base[i] * weights[i];
  }
  if (!(norm > 0.0)) throw DomainError("all weighted branch probabilities are zero");
  std::vector<BiasedBranch> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    out[i] = {base[i] * weights[i] / norm, norm / weights[i]};
  return out;
}

/// Samples i with probability p_i w_i / sum_j p_j w_j and returns the
/// likelihood ratio p_i / q_i that keeps estimates unbiased.
inline BiasedChoice select_branch_biased(std::span<const double> base,
                                         std::span<const double> weights, Rng& rng) {
  const auto dist = biased_distribution(base, weights);
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t pick = base.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i].q <= 0.0) continue;
    cum += dist[i].q;
    pick = i;
    if (u < cum) break;
  }
  return {pick, dist[pick].likelihood_ratio};
}

}  // namespace gsim
