#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "gsim/errors.hpp"
#include "gsim/guidance.hpp"
#include "gsim/model.hpp"
#include "gsim/parallel.hpp"
#include "gsim/tree.hpp"

namespace gsim {

namespace stop_reason {
inline constexpr const char* exhausted = "exhausted";
inline constexpr const char* node_budget = "node budget";
inline constexpr const char* expansion_budget = "expansion budget";
inline constexpr const char* target_hits = "target hits";
}  // namespace stop_reason

struct TreeRunOptions {
  // Nodes expanded concurrently per step. 1 gives bit-reproducible trees.
  unsigned threads = 1;
  // Frozen value table for the TD policy; all-zero when absent.
  const ValueTable* table = nullptr;
  // Called after every commit; used by tests to check step invariants.
  std::function<void(const ScenarioTree&)> on_commit;
};

/// Number of whole segments of length dt in `span`; throws if dt does not
/// divide it within 1e-9.
inline std::size_t segment_count(double span, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("dt must be positive");
  const double n = std::round(span / dt);
  if (n < 1.0 || std::fabs(n * dt - span) > 1e-9)
    throw UsageError("dt must divide the mission time");
  return static_cast<std::size_t>(n);
}

namespace detail {

inline double child_weight(const GuidancePolicy& policy, const SystemModel& model,
                           const ValueTable* table, double dt, double parent_weight,
                           const ChildSpec& child) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, UniformPolicy>) {
          return 1.0;
        } else if constexpr (std::is_same_v<P, PlanBiasPolicy>) {
          return parent_weight * plan_multiplier(p, child.event_label);
        } else if constexpr (std::is_same_v<P, EntropyLookaheadPolicy>) {
          if (!child.end_class.is_ongoing()) return kScoreFloor;
          return lookahead_score(model, child.state, dt, p.horizon) + kScoreFloor;
        } else {
          return (table ? table->value(child.state) : 0.0) + kScoreFloor;
        }
      },
      policy);
}

struct FrontierEntry {
  double score;
  NodeId id;
  // priority_queue pops the largest: highest score, then lowest id.
  friend bool operator<(const FrontierEntry& a, const FrontierEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id > b.id;
  }
};

}  // namespace detail

/// Grows a scenario tree best-first under the given policy until a stopping
/// criterion fires. Ranking scores are path_prob times the node's guidance
/// weight; ties go to the lower id. New Open children below the truncation
/// threshold are truncated as soon as they are committed.
inline ScenarioTree run_tree(const SystemModel& model, const GuidancePolicy& policy,
                             const StoppingCriteria& stop, double dt, std::uint64_t seed,
                             const TreeRunOptions& options = {}) {
  (void)seed;  // tree growth draws no random numbers; kept for the run record
  validate_policy(policy);
  stop.validate();
  segment_count(stop.mission_time, dt);
  const double horizon = stop.mission_time;

  const auto root_state = model.initial_state();
  validate_state(model, root_state);
  const auto root_class = classify_at(model, root_state, horizon);
  double root_weight = 1.0;
  if (root_class.is_ongoing()) {
    ChildSpec probe{root_state, 1.0, "", root_class, 1.0};
    root_weight = detail::child_weight(policy, model, options.table, dt, 1.0, probe);
  }
  ScenarioTree tree(model.component_count(), model.process_dimension(), root_state, root_class,
                    root_weight);

  std::priority_queue<detail::FrontierEntry> frontier;
  if (tree.status(tree.root()) == NodeStatus::Open)
    frontier.push({tree.path_prob(0) * tree.guidance_weight(0), 0});
  std::size_t target_leaves = root_class.is_target() ? 1 : 0;

  std::vector<NodeId> batch;
  std::vector<std::vector<ChildSpec>> results;
  while (true) {
    if (frontier.empty()) {
      tree.set_stop_reason(stop_reason::exhausted);
      break;
    }
    if (stop.target_hits && target_leaves >= *stop.target_hits) {
      tree.set_stop_reason(stop_reason::target_hits);
      break;
    }
    if (tree.size() >= stop.max_nodes) {
      tree.set_stop_reason(stop_reason::node_budget);
      break;
    }
    std::size_t k = std::max(1u, options.threads);
    if (stop.max_expansions) {
      if (tree.expansion_count() >= *stop.max_expansions) {
        tree.set_stop_reason(stop_reason::expansion_budget);
        break;
      }
      k = std::min(k, *stop.max_expansions - tree.expansion_count());
    }

    batch.clear();
    while (batch.size() < k && !frontier.empty()) {
      batch.push_back(frontier.top().id);
      frontier.pop();
    }
    results.assign(batch.size(), {});
    parallel_for(batch.size(), options.threads, [&](std::size_t i) {
      const NodeId id = batch[i];
      auto kids = compute_children(model, tree.state(id), dt, horizon);
      const double pw = tree.guidance_weight(id);
      for (auto& c : kids) c.guidance_weight = detail::child_weight(policy, model, options.table, dt, pw, c);
      results[i] = std::move(kids);
    });

    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (NodeId c : tree.commit_children(batch[i], std::move(results[i]))) {
        if (tree.status(c) == NodeStatus::Leaf) {
          if (tree.end_class(c).is_target()) ++target_leaves;
        } else if (tree.path_prob(c) < stop.trunc_threshold) {
          tree.mark_truncated(c);
        } else {
          frontier.push({tree.path_prob(c) * tree.guidance_weight(c), c});
        }
      }
    }
    if (options.on_commit) options.on_commit(tree);
  }
  if (tree.expansion_count() == 0 && tree.stop_reason() != stop_reason::exhausted)
    tree.set_warning("budget exhausted before any expansion");
  return tree;
}

}  // namespace gsim
