#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <type_traits>
#include <variant>
#include <vector>

#include "gsim/errors.hpp"
#include "gsim/guidance.hpp"
#include "gsim/model.hpp"
#include "gsim/parallel.hpp"
#include "gsim/rng.hpp"
#include "gsim/summation.hpp"
#include "gsim/tree.hpp"

namespace gsim {

/// Rollouts per TD training batch. Rollouts inside a batch read the same
/// frozen table; updates are applied in rollout order after the batch, so
/// results do not depend on the thread count.
inline constexpr std::size_t kTdBatch = 32;

namespace detail {

inline bool needs_child_states(const GuidancePolicy& policy) {
  return std::holds_alternative<EntropyLookaheadPolicy>(policy) ||
         std::holds_alternative<TDValuePolicy>(policy);
}

}  // namespace detail

/// Sampling weights w_i for the branches out of `state`, so that branch i is
/// drawn with probability proportional to p_i w_i. `next` holds the
/// successor states (needed by the lookahead and value policies only).
inline std::vector<double> rollout_weights(const GuidancePolicy& policy, const SystemModel& model,
                                           const ValueTable* table, double dt,
                                           const SystemState& state,
                                           const std::vector<Branch>& branches,
                                           const std::vector<SystemState>& next) {
  std::vector<double> weights;
  weights.reserve(branches.size());
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, UniformPolicy>) {
          weights.assign(branches.size(), 1.0);
        } else if constexpr (std::is_same_v<P, PlanBiasPolicy>) {
          for (const auto& b : branches)
            weights.push_back(plan_multiplier(p, event_label(model, state.config, b.config)));
        } else if constexpr (std::is_same_v<P, EntropyLookaheadPolicy>) {
          for (const auto& s : next) weights.push_back(lookahead_score(model, s, dt, p.horizon) + kScoreFloor);
        } else {
          for (const auto& s : next) weights.push_back((table ? table->value(s) : 0.0) + kScoreFloor);
          // Epsilon-greedy as a mixture: q = eps*p + (1-eps)*p*w/S, which is
          // again of the form p*w' with sum p*w' = 1.
          double norm = 0.0;
          for (std::size_t i = 0; i < branches.size(); ++i) norm += branches[i].probability * weights[i];
          for (auto& w : weights) w = p.epsilon + (1.0 - p.epsilon) * w / norm;
        }
      },
      policy);
  return weights;
}

/// Samples one trajectory from the initial state under the policy's branch
/// weights. total_prob is the product of true branch probabilities and
/// importance_weight the product of likelihood ratios.
inline Trajectory rollout(const SystemModel& model, const GuidancePolicy& policy,
                          const ValueTable* table, double dt, double horizon, Rng& rng) {
  Trajectory t;
  SystemState state = model.initial_state();
  t.end_class = classify_at(model, state, horizon);
  t.steps.push_back({state, 1.0, ""});

  const bool child_states = detail::needs_child_states(policy);
  std::vector<double> base;
  std::vector<SystemState> next;
  while (t.end_class.is_ongoing()) {
    if (state.time + dt > horizon + 1e-9) throw UsageError("horizon is not a multiple of dt");
    const auto branches = branch_distribution(model, state, dt);
    base.clear();
    next.clear();
    for (const auto& b : branches) base.push_back(b.probability);
    if (child_states)
      for (const auto& b : branches) next.push_back(advance(model, state, b.config, dt));
    const auto weights = rollout_weights(policy, model, table, dt, state, branches, next);

    const auto choice = select_branch_biased(base, weights, rng);
    SystemState succ = child_states ? std::move(next[choice.index])
                                    : advance(model, state, branches[choice.index].config, dt);
    const double bp = branches[choice.index].probability;
    t.steps.push_back({succ, bp, event_label(model, state.config, succ.config)});
    t.total_prob *= bp;
    t.importance_weight *= choice.likelihood_ratio;
    t.end_class = classify_at(model, succ, horizon);
    state = std::move(succ);
  }
  return t;
}

/// E_q[likelihood ratio x 1{end in filter}] summed over every path of the
/// biased sampling law, without sampling. Equals the true class probability
/// whenever the estimator is unbiased.
inline double exhaustive_weighted_mass(const SystemModel& model, const GuidancePolicy& policy,
                                       const ValueTable* table, double dt, double horizon,
                                       const ClassFilter& filter) {
  CompensatedSum total;
  std::function<void(const SystemState&, double, double)> walk =
      [&](const SystemState& s, double q, double ratio) {
        const auto cls = classify_at(model, s, horizon);
        if (!cls.is_ongoing()) {
          if (filter.matches(cls)) total.add(q * ratio);
          return;
        }
        const auto branches = branch_distribution(model, s, dt);
        std::vector<double> base;
        std::vector<SystemState> next;
        for (const auto& b : branches) {
          base.push_back(b.probability);
          next.push_back(advance(model, s, b.config, dt));
        }
        const auto dist = biased_distribution(base, rollout_weights(policy, model, table, dt, s, branches, next));
        for (std::size_t i = 0; i < dist.size(); ++i)
          if (dist[i].q > 0.0) walk(next[i], q * dist[i].q, ratio * dist[i].likelihood_ratio);
      };
  walk(model.initial_state(), 1.0, 1.0);
  return total.value();
}

struct MonteCarloConfig {
  double dt = 1.0;
  double horizon = 0.0;
  std::size_t rollouts = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // TD policy only: update the table from completed rollouts.
  bool learn = true;
  // Called with the table after each training batch.
  std::function<void(const ValueTable&)> on_batch;
};

struct MonteCarloResult {
  std::vector<Trajectory> trajectories;
  std::optional<ValueTable> table;

  double hit_rate(const ClassFilter& filter = ClassFilter::any_target()) const {
    if (trajectories.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& t : trajectories) hits += filter.matches(t.end_class) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(trajectories.size());
  }
};

/// Runs independent rollouts; rollout i draws from substream (seed, i).
/// With the TD policy the value table starts from `initial` (or empty) and,
/// when cfg.learn is set, is trained batch by batch with reward 1 for a
/// Target end state and 0 otherwise.
inline MonteCarloResult run_montecarlo(const SystemModel& model, const GuidancePolicy& policy,
                                       const MonteCarloConfig& cfg,
                                       std::optional<ValueTable> initial = std::nullopt) {
  validate_policy(policy);
  if (!(cfg.horizon > 0.0)) throw UsageError("Monte Carlo horizon must be positive");
  MonteCarloResult out;
  out.trajectories.resize(cfg.rollouts);

  const auto* td = std::get_if<TDValuePolicy>(&policy);
  if (td) out.table = initial ? std::move(*initial) : ValueTable(Discretizer(model, td->bins));

  const std::size_t batch = td && cfg.learn ? kTdBatch : std::max<std::size_t>(cfg.rollouts, 1);
  for (std::size_t start = 0; start < cfg.rollouts; start += batch) {
    const std::size_t n = std::min(batch, cfg.rollouts - start);
    const ValueTable* snapshot = out.table ? &*out.table : nullptr;
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      Rng rng(cfg.seed, start + i);
      out.trajectories[start + i] = rollout(model, policy, snapshot, cfg.dt, cfg.horizon, rng);
    });
    if (td && cfg.learn)
      for (std::size_t i = 0; i < n; ++i) {
        const auto& t = out.trajectories[start + i];
        td_update(*out.table, t, t.end_class.is_target() ? 1.0 : 0.0, td->alpha, td->gamma);
      }
    if (out.table && cfg.on_batch) cfg.on_batch(*out.table);
  }
  return out;
}

}  // namespace gsim
