#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsim/errors.hpp"
#include "gsim/model.hpp"
#include "gsim/summation.hpp"

// Ground-truth solvers that share no code with the tree engine beyond the
// model contract, branch_distribution and integrate_segment.

namespace gsim {

/// Dense CTMC generator over all discrete configurations of a model.
class RateMatrix {
 public:
  RateMatrix() = default;
  RateMatrix(std::vector<double> entries, std::size_t n, std::vector<Config> configs = {})
      : q_(std::move(entries)), n_(n), configs_(std::move(configs)) {
    if (q_.size() != n_ * n_) throw DomainError("rate matrix must be square");
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return q_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return q_[i * n_ + j]; }
  const std::vector<Config>& configs() const noexcept { return configs_; }

  std::size_t index_of(const Config& c) const {
    auto it = std::find(configs_.begin(), configs_.end(), c);
    if (it == configs_.end()) throw UsageError("configuration not in generator");
    return static_cast<std::size_t>(it - configs_.begin());
  }

  /// Throws DomainError unless off-diagonals are >= 0 and rows sum to 0.
  void validate(double tol = 1e-12) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = (*this)(i, j);
        if (!std::isfinite(v)) throw DomainError("generator entry is not finite");
        if (i != j && v < 0.0) throw DomainError("negative off-diagonal rate");
        row += v;
      }
      if (std::fabs(row) > tol * std::max(1.0, std::fabs((*this)(i, i))))
        throw DomainError("generator row " + std::to_string(i) + " does not sum to zero");
    }
  }

 private:
  std::vector<double> q_;
  std::size_t n_ = 0;
  std::vector<Config> configs_;
};

namespace detail {

inline std::vector<Config> all_configs(const SystemModel& model) {
  std::vector<Config> out;
  Config c(model.component_count(), 0);
  while (true) {
    out.push_back(c);
    std::size_t i = c.size();
    while (i > 0) {
      --i;
      if (++c[i] < model.cardinality(i)) break;
      c[i] = 0;
      if (i == 0) return out;
    }
  }
}

}  // namespace detail

/// Generator of the model's configuration chain. Configurations are
/// enumerated lexicographically. Only for process-independent rates.
/// When absorb_end_states is set, rows of configurations the classifier
/// marks as end states are zeroed (first-passage semantics).
inline RateMatrix model_to_generator(const SystemModel& model, bool absorb_end_states = false) {
  if (auto why = model.process_dependence())
    throw UnsupportedModelError("generator needs process-independent rates: " + *why);
  const auto configs = detail::all_configs(model);
  const std::size_t n = configs.size();
  if (n > 4096) throw GuardError("generator would have " + std::to_string(n) + " states", n);
  std::map<Config, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[configs[i]] = i;

  RateMatrix q(std::vector<double>(n * n, 0.0), n, configs);
  const auto init = model.initial_state();
  for (std::size_t i = 0; i < n; ++i) {
    SystemState s{configs[i], init.process, 0.0};
    if (absorb_end_states && !model.classify(s).is_ongoing()) continue;
    for (const auto& cand : model.transitions(s)) {
      if (!std::isfinite(cand.rate) || cand.rate < 0.0)
        throw ModelError("invalid rate in configuration " + std::to_string(i));
      auto it = index.find(cand.target_config);
      if (it == index.end() || it->second == i) throw ModelError("invalid transition target");
      q(i, it->second) += cand.rate;
    }
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row += q(i, j);
    q(i, i) = -row;
  }
  q.validate();
  return q;
}

/// Transient distribution p(t) = p0 exp(Qt) by uniformization with
/// Lambda = 1.05 max|Q_ii| and Poisson tail below 1e-12. Long horizons are
/// split into chunks with Lambda*t <= 50 to keep e^{-Lambda t} representable.
inline std::vector<double> ctmc_transient(const RateMatrix& q, std::span<const double> p0, double t) {
  q.validate();
  const std::size_t n = q.size();
  if (p0.size() != n) throw DomainError("initial distribution has wrong length");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("time must be finite and nonnegative");
  double mass = 0.0;
  for (double x : p0) {
    if (!(x >= 0.0)) throw DomainError("initial distribution has a negative entry");
    mass += x;
  }
  if (std::fabs(mass - 1.0) > 1e-9) throw DomainError("initial distribution must sum to 1");

  std::vector<double> p(p0.begin(), p0.end());
  double max_exit = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_exit = std::max(max_exit, -q(i, i));
  if (t == 0.0 || max_exit == 0.0) return p;

  const double lambda = 1.05 * max_exit;
  // Stochastic matrix P = I + Q / lambda.
  std::vector<double> P(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) P[i * n + j] = (i == j ? 1.0 : 0.0) + q(i, j) / lambda;

  const auto chunks = static_cast<std::size_t>(std::ceil(lambda * t / 50.0));
  const double tau = t / static_cast<double>(chunks);
  const double lt = lambda * tau;
  std::vector<double> term(n), next(n), acc(n);
  for (std::size_t c = 0; c < chunks; ++c) {
    term = p;
    double w = std::exp(-lt);
    double cum = w;
    for (std::size_t i = 0; i < n; ++i) acc[i] = w * term[i];
    for (std::size_t k = 1; 1.0 - cum >= 1e-12; ++k) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (term[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) next[j] += term[i] * P[i * n + j];
      }
      term.swap(next);
      w *= lt / static_cast<double>(k);
      cum += w;
      for (std::size_t i = 0; i < n; ++i) acc[i] += w * term[i];
      if (k > 10000) break;
    }
    p = acc;
  }
  return p;
}

/// Exact end-class probabilities of a CTMC-representable model at time t,
/// treating end-state configurations as absorbing. Configurations still
/// Ongoing at t count as success.
inline std::map<std::string, double> ctmc_class_masses(const SystemModel& model, double t) {
  const auto q = model_to_generator(model, true);
  const auto init = model.initial_state();
  std::vector<double> p0(q.size(), 0.0);
  p0[q.index_of(init.config)] = 1.0;
  const auto p = ctmc_transient(q, p0, t);
  std::map<std::string, CompensatedSum> sums;
  for (const auto& c : model.end_classes()) sums[c.key()];
  sums[EndStateClass::success().key()];
  for (std::size_t i = 0; i < q.size(); ++i) {
    auto cls = model.classify(SystemState{q.configs()[i], init.process, t});
    if (cls.is_ongoing()) cls = EndStateClass::success();
    sums[cls.key()].add(p[i]);
  }
  std::map<std::string, double> out;
  for (const auto& [k, s] : sums) out[k] = s.value();
  return out;
}

struct EnumerationResult {
  std::map<std::string, double> class_mass;
  std::size_t path_nodes = 0;

  double mass(const std::string& key) const {
    auto it = class_mass.find(key);
    return it == class_mass.end() ? 0.0 : it->second;
  }
  double target_mass() const {
    double s = 0.0;
    for (const auto& [k, v] : class_mass)
      if (k.rfind("target:", 0) == 0) s += v;
    return s;
  }
};

inline constexpr std::size_t kEnumerationGuard = 1'000'000;

/// Exact class masses of the full discrete-time tree over `steps` segments
/// from `start`, computed layer by layer with identical states merged.
/// States still Ongoing after the last segment count as success.
inline EnumerationResult enumerate_exact(const SystemModel& model, const SystemState& start,
                                         double dt, std::size_t steps,
                                         std::size_t guard = kEnumerationGuard) {
  validate_state(model, start);
  if (!(dt > 0.0)) throw UsageError("dt must be positive");

  // Identical (config, process bits) states are merged within a layer.
  using Key = std::pair<Config, std::vector<std::uint64_t>>;
  auto key_of = [](const SystemState& s) {
    std::vector<std::uint64_t> bits;
    bits.reserve(s.process.size());
    for (double x : s.process) bits.push_back(std::bit_cast<std::uint64_t>(x));
    return Key{s.config, std::move(bits)};
  };

  EnumerationResult res;
  std::map<std::string, CompensatedSum> sums;
  for (const auto& c : model.end_classes()) sums[c.key()];
  sums[EndStateClass::success().key()];

  const auto first = model.classify(start);
  if (!first.is_ongoing() || steps == 0) {
    sums[first.is_ongoing() ? EndStateClass::success().key() : first.key()].add(1.0);
  } else {
    std::map<Key, std::pair<SystemState, double>> layer;
    layer.emplace(key_of(start), std::make_pair(start, 1.0));
    for (std::size_t step = 1; step <= steps && !layer.empty(); ++step) {
      std::map<Key, std::pair<SystemState, double>> next;
      for (const auto& [key, entry] : layer) {
        const auto& [state, mass] = entry;
        for (const auto& b : branch_distribution(model, state, dt)) {
          if (++res.path_nodes > guard)
            throw GuardError("enumeration exceeds " + std::to_string(guard) +
                                 " path nodes (step " + std::to_string(step) + " of " +
                                 std::to_string(steps) + ", layer width " +
                                 std::to_string(layer.size()) + ")",
                             res.path_nodes);
          SystemState child = state;
          child.config = b.config;
          child = integrate_segment(model, std::move(child), dt);
          const double m = mass * b.probability;
          auto cls = model.classify(child);
          if (!cls.is_ongoing()) {
            sums[cls.key()].add(m);
            continue;
          }
          if (step == steps) {
            sums[EndStateClass::success().key()].add(m);
            continue;
          }
          auto [it, inserted] = next.try_emplace(key_of(child), child, 0.0);
          it->second.second += m;
        }
      }
      layer = std::move(next);
    }
  }
  for (const auto& [k, s] : sums) res.class_mass[k] = s.value();
  return res;
}

inline EnumerationResult enumerate_exact(const SystemModel& model, double dt, std::size_t steps,
                                         std::size_t guard = kEnumerationGuard) {
  return enumerate_exact(model, model.initial_state(), dt, steps, guard);
}

}  // namespace gsim
