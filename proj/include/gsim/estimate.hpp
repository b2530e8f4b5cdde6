#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gsim/errors.hpp"
#include "gsim/state.hpp"
#include "gsim/summation.hpp"
#include "gsim/tree.hpp"

namespace gsim {

struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
};

/// Per-class probability masses of one run. In tree mode the true
/// probability of class c lies in [mass(c), mass(c) + truncated + frontier].
struct EstimateReport {
  std::string mode = "tree";
  std::map<std::string, double> class_mass;
  std::map<std::string, std::size_t> leaf_count;
  double truncated_mass = 0.0;
  double frontier_mass = 0.0;
  std::map<std::string, McEstimate> mc_estimates;
  std::string stop_reason;
  std::size_t expansion_count = 0;
  std::uint64_t seed = 0;
  std::string model_hash;

  double mass(const std::string& key) const {
    auto it = class_mass.find(key);
    return it == class_mass.end() ? 0.0 : it->second;
  }

  std::pair<double, double> bracket(const std::string& key) const {
    const double m = mass(key);
    return {m, m + truncated_mass + frontier_mass};
  }

  double target_mass() const {
    double s = 0.0;
    for (const auto& [k, v] : class_mass)
      if (k.rfind("target:", 0) == 0) s += v;
    return s;
  }

  std::size_t target_hits() const {
    std::size_t s = 0;
    for (const auto& [k, v] : leaf_count)
      if (k.rfind("target:", 0) == 0) s += v;
    return s;
  }
};

/// Sums leaf path probabilities by end class. `classes` pre-seeds zero
/// entries so absent classes still appear in the report.
inline EstimateReport aggregate_tree(const ScenarioTree& tree,
                                     std::span<const EndStateClass> classes = {}) {
  EstimateReport r;
  std::map<std::string, CompensatedSum> sums;
  for (const auto& c : classes) {
    sums[c.key()];
    r.leaf_count[c.key()] = 0;
  }
  CompensatedSum trunc, open;
  for (NodeId id = 0; id < tree.size(); ++id) {
    switch (tree.status(id)) {
      case NodeStatus::Leaf: {
        const auto key = tree.end_class(id).key();
        sums[key].add(tree.path_prob(id));
        ++r.leaf_count[key];
        break;
      }
      case NodeStatus::Truncated: trunc.add(tree.path_prob(id)); break;
      case NodeStatus::Open: open.add(tree.path_prob(id)); break;
      case NodeStatus::Expanded: break;
    }
  }
  CompensatedSum total;
  for (const auto& [k, s] : sums) {
    r.class_mass[k] = s.value();
    total.add(s.value());
  }
  r.truncated_mass = trunc.value();
  r.frontier_mass = open.value();
  total.add(r.truncated_mass);
  total.add(r.frontier_mass);
  if (!(std::fabs(total.value() - 1.0) <= 1e-9))
    throw ConsistencyError("class masses sum to " + std::to_string(total.value()) +
                           ", expected 1");
  r.stop_reason = tree.stop_reason();
  r.expansion_count = tree.expansion_count();
  return r;
}

/// Importance-weighted frequency of the filtered class with its standard
/// error (sample standard deviation, n - 1 denominator, over sqrt n).
inline McEstimate mc_estimate(std::span<const Trajectory> trajectories, const ClassFilter& filter) {
  const std::size_t n = trajectories.size();
  if (n < 2) throw UsageError("mc_estimate needs at least two trajectories");
  CompensatedSum sum;
  for (const auto& t : trajectories)
    if (filter.matches(t.end_class)) sum.add(t.importance_weight);
  const double mean = sum.value() / static_cast<double>(n);
  CompensatedSum sq;
  for (const auto& t : trajectories) {
    const double x = filter.matches(t.end_class) ? t.importance_weight : 0.0;
    sq.add((x - mean) * (x - mean));
  }
  const double var = sq.value() / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n)), n};
}

/// Monte Carlo report: one estimate per class in `classes` plus success.
inline EstimateReport aggregate_montecarlo(std::span<const Trajectory> trajectories,
                                           std::span<const EndStateClass> classes) {
  EstimateReport r;
  r.mode = "montecarlo";
  r.frontier_mass = 0.0;
  std::vector<EndStateClass> all(classes.begin(), classes.end());
  if (std::find(all.begin(), all.end(), EndStateClass::success()) == all.end())
    all.push_back(EndStateClass::success());
  for (const auto& t : trajectories) ++r.leaf_count[t.end_class.key()];
  if (trajectories.size() >= 2)
    for (const auto& c : all)
      r.mc_estimates[c.key()] =
          mc_estimate(trajectories, ClassFilter{c.kind(), c.label()});
  r.stop_reason = "rollouts complete";
  r.expansion_count = 0;
  return r;
}

struct EfficiencyRow {
  std::string label;
  std::size_t target_hits = 0;
  double target_mass = 0.0;
  std::size_t expansions = 0;
};

struct EfficiencyComparison {
  EfficiencyRow a, b;
  double delta_target_mass = 0.0;  // b - a
  long long delta_target_hits = 0;
  std::optional<double> mass_ratio;  // b / a when a > 0
};

/// Side-by-side Target discovery of two runs on the same model.
inline EfficiencyComparison compare_efficiency(const EstimateReport& ra, const std::string& label_a,
                                               const EstimateReport& rb, const std::string& label_b) {
  if (ra.model_hash != rb.model_hash)
    throw UsageError("cannot compare runs on different models (" + ra.model_hash + " vs " +
                     rb.model_hash + ")");
  EfficiencyComparison c;
  c.a = {label_a, ra.target_hits(), ra.target_mass(), ra.expansion_count};
  c.b = {label_b, rb.target_hits(), rb.target_mass(), rb.expansion_count};
  c.delta_target_mass = c.b.target_mass - c.a.target_mass;
  c.delta_target_hits =
      static_cast<long long>(c.b.target_hits) - static_cast<long long>(c.a.target_hits);
  if (c.a.target_mass > 0.0) c.mass_ratio = c.b.target_mass / c.a.target_mass;
  return c;
}

struct RunMetadata {
  std::string tool_version;
  std::string model_name;
  std::string policy;
  nlohmann::ordered_json policy_params = nlohmann::ordered_json::object();
  double dt = 0.0;
  double mission_time = 0.0;
  double trunc_threshold = 0.0;
  std::size_t rollouts = 0;
  unsigned threads = 1;
  std::optional<std::string> warning;
};

/// report.json document; field names are listed in docs/formats.md.
inline nlohmann::ordered_json report_to_json(const EstimateReport& r, const RunMetadata& meta) {
  nlohmann::ordered_json j;
  j["tool_version"] = meta.tool_version;
  j["mode"] = r.mode;
  j["model"] = meta.model_name;
  j["model_hash"] = r.model_hash;
  j["seed"] = r.seed;
  j["policy"] = meta.policy;
  j["policy_params"] = meta.policy_params;
  j["dt"] = meta.dt;
  j["mission_time"] = meta.mission_time;
  j["trunc_threshold"] = meta.trunc_threshold;
  j["threads"] = meta.threads;
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.class_mass) classes[k] = v;
  j["class_mass"] = classes;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.leaf_count) counts[k] = v;
  j["leaf_count"] = counts;
  j["truncated_mass"] = r.truncated_mass;
  j["frontier_mass"] = r.frontier_mass;
  if (!r.mc_estimates.empty()) {
    nlohmann::ordered_json mc = nlohmann::ordered_json::object();
    for (const auto& [k, e] : r.mc_estimates)
      mc[k] = {{"mean", e.mean}, {"standard_error", e.standard_error}, {"n", e.n}};
    j["mc_estimates"] = mc;
    j["rollouts"] = meta.rollouts;
  }
  j["stop_reason"] = r.stop_reason;
  j["expansion_count"] = r.expansion_count;
  if (meta.warning) j["warning"] = *meta.warning;
  return j;
}

}  // namespace gsim
