#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "gsim/gsim.hpp"

namespace gsim {
namespace {

TEST(ShannonEntropy, AnalyticCases) {
  EXPECT_NEAR(shannon_entropy(std::vector<double>{0.5, 0.5}), 1.0, 1e-12);
  EXPECT_NEAR(shannon_entropy(std::vector<double>{1.0}), 0.0, 1e-12);
  EXPECT_NEAR(shannon_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 2.0, 1e-12);
  EXPECT_NEAR(shannon_entropy(std::vector<double>{1.0, 0.0, 0.0}), 0.0, 1e-12);
}

TEST(ShannonEntropy, BoundsProperty) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 9;
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& x : p) s += (x = u(gen) * (u(gen) < 0.2 ? 0.0 : 1.0));
    if (s == 0.0) p[0] = s = 1.0;
    for (auto& x : p) x /= s;
    const double h = shannon_entropy(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(static_cast<double>(n)) + 1e-12);
  }
}

TEST(ShannonEntropy, DomainErrors) {
  EXPECT_THROW(shannon_entropy(std::vector<double>{0.5, 0.6}), DomainError);
  EXPECT_THROW(shannon_entropy(std::vector<double>{1.5, -0.5}), DomainError);
  EXPECT_THROW(shannon_entropy(std::vector<double>{}), DomainError);
}

TEST(LookaheadScore, OneStep) {
  auto m = testing::single_rate(0.1);
  EXPECT_NEAR(lookahead_score(*m, m->initial_state(), 1.0, 1), 0.0951626, 1e-7);
  EXPECT_NEAR(lookahead_score(*m, m->initial_state(), 1.0, 1), 1.0 - std::exp(-0.1), 1e-9);
}

TEST(LookaheadScore, TwoSteps) {
  auto m = build_benchmark("two_state");
  EXPECT_NEAR(lookahead_score(*m, m->initial_state(), 1.0, 2), 1.0 - std::exp(-0.2), 1e-9);
  EXPECT_NEAR(lookahead_score(*m, m->initial_state(), 1.0, 2), 0.1812692, 1e-7);
}

TEST(LookaheadScore, ZeroRatesScoreZero) {
  auto m = testing::single_rate(0.0);
  for (int d = 1; d <= 4; ++d) EXPECT_EQ(lookahead_score(*m, m->initial_state(), 1.0, d), 0.0);
}

TEST(LookaheadScore, TreeNodeOverload) {
  auto m = build_benchmark("cascade3");
  ScenarioTree tree(3, 0, m->initial_state());
  EXPECT_EQ(lookahead_score(tree.node(0), *m, 1.0, 2), lookahead_score(*m, m->initial_state(), 1.0, 2));
  EXPECT_THROW(lookahead_score(*m, m->initial_state(), 1.0, 0), DomainError);
}

TEST(LookaheadScore, MatchesEnumeration) {
  for (auto name : benchmark_names) {
    auto m = build_benchmark(name);
    StoppingCriteria stop;
    stop.mission_time = m->mission_time();
    stop.max_expansions = 40;
    const auto tree = run_tree(*m, UniformPolicy{}, stop, 1.0, 0);
    for (NodeId id : tree.open_nodes()) {
      const auto s = tree.state(id);
      for (int d = 1; d <= 3; ++d)
        EXPECT_NEAR(lookahead_score(*m, s, 1.0, d),
                    enumerate_exact(*m, s, 1.0, static_cast<std::size_t>(d)).target_mass(), 1e-9)
            << name << " node " << id << " d=" << d;
    }
  }
}

// Two Open children of the root with equal path_prob 0.3; one carries a
// pump failure event.
ScenarioTree pump_tree() {
  ScenarioTree tree(2, 0, SystemState{{0, 0}, {}, 0.0});
  std::vector<ChildSpec> kids = {
      {{{0, 0}, {}, 1.0}, 0.4, "stay", EndStateClass::success(), 1.0},
      {{{0, 1}, {}, 1.0}, 0.3, "valve:ok->stuck", EndStateClass::ongoing(), 1.0},
      {{{1, 0}, {}, 1.0}, 0.3, "pump:ok->failed", EndStateClass::ongoing(), 1.0},
  };
  tree.commit_children(0, kids);
  return tree;
}

TEST(RankFrontier, UniformOrdersByMass) {
  ScenarioTree tree(1, 0, SystemState{{0}, {}, 0.0});
  auto at = SystemState{{0}, {}, 1.0};
  tree.commit_children(0, {{at, 0.1, "c", {}, 1.0}, {at, 0.6, "a", {}, 1.0}, {at, 0.3, "b", {}, 1.0}});
  auto m = testing::single_rate(0.1);
  const std::vector<NodeId> f{1, 2, 3};
  const auto r = rank_frontier(UniformPolicy{}, tree, f, *m, nullptr, 1.0);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].id, 2u);
  EXPECT_EQ(r[1].id, 3u);
  EXPECT_EQ(r[2].id, 1u);
  EXPECT_DOUBLE_EQ(r[0].score, 0.6);
}

TEST(RankFrontier, PlanBiasFavoursPumpHistory) {
  const auto tree = pump_tree();
  auto m = testing::single_rate(0.1);
  const std::vector<NodeId> f{2, 3};
  const auto r = rank_frontier(PlanBiasPolicy{{{"pump:*->failed", 10.0}}}, tree, f, *m, nullptr, 1.0);
  EXPECT_EQ(r[0].id, 3u);
  EXPECT_NEAR(r[0].score, 3.0, 1e-12);
  EXPECT_NEAR(r[1].score, 0.3, 1e-12);
}

TEST(RankFrontier, TiesGoToLowerId) {
  const auto tree = pump_tree();
  auto m = testing::single_rate(0.1);
  const std::vector<NodeId> f{3, 2};
  const auto r = rank_frontier(UniformPolicy{}, tree, f, *m, nullptr, 1.0);
  EXPECT_EQ(r[0].id, 2u);
  EXPECT_EQ(r[1].id, 3u);
}

TEST(RankFrontier, EmptyFrontierIsUsageError) {
  const auto tree = pump_tree();
  auto m = testing::single_rate(0.1);
  EXPECT_THROW(rank_frontier(UniformPolicy{}, tree, std::vector<NodeId>{}, *m, nullptr, 1.0),
               UsageError);
}

TEST(RankFrontier, ScoresArePositive) {
  auto m = build_benchmark("holdup_tank");
  StoppingCriteria stop;
  stop.mission_time = m->mission_time();
  stop.max_expansions = 60;
  const auto tree = run_tree(*m, UniformPolicy{}, stop, 1.0, 0);
  const auto open = tree.open_nodes();
  ValueTable table(Discretizer(*m, {}));
  for (const GuidancePolicy& p :
       {GuidancePolicy{UniformPolicy{}}, GuidancePolicy{EntropyLookaheadPolicy{}},
        GuidancePolicy{TDValuePolicy{}}, GuidancePolicy{PlanBiasPolicy{{{"*", 0.5}}}}})
    for (const auto& r : rank_frontier(p, tree, open, *m, &table, 1.0)) EXPECT_GT(r.score, 0.0);
}

// Scaling every multiplier by c scales a score by c^k, k = matches along the
// history, so the order is only invariant when k is shared. Here the
// patterns partition the events and the frontier is one full layer.
TEST(RankFrontier, ArgmaxInvariantUnderCommonScale) {
  auto m = build_benchmark("cascade3");
  ScenarioTree tree(3, 0, m->initial_state());
  std::vector<NodeId> open{0};
  for (int depth = 0; depth < 3; ++depth) {
    std::vector<NodeId> next;
    for (NodeId id : open)
      for (NodeId c : expand_node(tree, id, *m, 1.0))
        if (tree.status(c) == NodeStatus::Open) next.push_back(c);
    open = next;
  }
  PlanBiasPolicy base{{{"stay", 1.0}, {"a:*", 4.0}, {"b:*", 2.5}, {"c:*", 0.7}}};
  auto order = [&](const PlanBiasPolicy& p) {
    std::vector<NodeId> ids;
    for (const auto& r : rank_frontier(p, tree, open, *m, nullptr, 1.0)) ids.push_back(r.id);
    return ids;
  };
  const auto ref = order(base);
  for (double c : {0.5, 2.0, 16.0}) {
    PlanBiasPolicy scaled = base;
    for (auto& [pat, w] : scaled.weights) w *= c;
    const auto got = order(scaled);
    EXPECT_EQ(got.front(), ref.front()) << c;
    EXPECT_EQ(got, ref) << c;
  }
}

TEST(PlanMultiplier, ProductOverAtomicEventsAndPatterns) {
  PlanBiasPolicy p{{{"*:ok->failed", 10.0}, {"a:*", 2.0}}};
  EXPECT_EQ(plan_multiplier(p, "stay"), 1.0);
  EXPECT_EQ(plan_multiplier(p, "b:ok->failed"), 10.0);
  EXPECT_EQ(plan_multiplier(p, "a:ok->failed"), 20.0);
  EXPECT_EQ(plan_multiplier(p, "a:ok->failed,b:ok->failed"), 200.0);
}

TEST(PlanWeights, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "gsim_plan_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "w.json") << R"({"weights": {"*:ok->failed": 10, "pump1:*": 0.5}})";
    std::ofstream(dir / "bad.json") << R"({"weights": {"*": -1}})";
  }
  const auto p = load_plan_weights(dir / "w.json");
  ASSERT_EQ(p.weights.size(), 2u);
  EXPECT_EQ(p.weights[0].first, "*:ok->failed");
  EXPECT_EQ(p.weights[1].second, 0.5);
  EXPECT_THROW(load_plan_weights(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_plan_weights(dir / "missing.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(ValidatePolicy, Ranges) {
  EXPECT_NO_THROW(validate_policy(TDValuePolicy{}));
  EXPECT_THROW(validate_policy(TDValuePolicy{0.0, 0.9, 0.1, {}}), DomainError);
  EXPECT_THROW(validate_policy(TDValuePolicy{0.5, 1.1, 0.1, {}}), DomainError);
  EXPECT_THROW(validate_policy(TDValuePolicy{0.5, 0.9, -0.1, {}}), DomainError);
  EXPECT_THROW(validate_policy(EntropyLookaheadPolicy{0}), DomainError);
  EXPECT_THROW(validate_policy(PlanBiasPolicy{{{"*", 0.0}}}), DomainError);
}

// One-step trajectory from s to a terminal state t.
struct OneStep {
  std::unique_ptr<TableModel> model = testing::single_rate(0.1);
  ValueTable table{Discretizer(*model, {})};
  Trajectory traj;
  OneStep() {
    traj.steps.push_back({SystemState{{0}, {}, 0.0}, 1.0, ""});
    traj.steps.push_back({SystemState{{1}, {}, 1.0}, 0.1, "unit:ok->failed"});
  }
  double v0() const { return table.value(traj.steps[0].state); }
};

TEST(TdUpdate, OneStepHalf) {
  OneStep f;
  td_update(f.table, f.traj, 1.0, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(f.v0(), 0.5);
  EXPECT_DOUBLE_EQ(f.table.value(f.traj.steps[1].state), 1.0);
}

TEST(TdUpdate, ZeroRewardFixedPoint) {
  OneStep f;
  td_update(f.table, f.traj, 0.0, 0.5, 1.0);
  for (const auto& [k, v] : f.table.entries()) EXPECT_EQ(v, 0.0);
}

TEST(TdUpdate, GeometricConvergence) {
  OneStep f;
  for (int k = 1; k <= 20; ++k) {
    td_update(f.table, f.traj, 1.0, 0.5, 1.0);
    EXPECT_NEAR(f.v0(), 1.0 - std::pow(2.0, -k), 1e-15) << k;
  }
}

TEST(TdUpdate, Errors) {
  OneStep f;
  EXPECT_THROW(td_update(f.table, f.traj, 1.5, 0.5, 1.0), DomainError);
  EXPECT_THROW(td_update(f.table, f.traj, 1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(td_update(f.table, Trajectory{}, 1.0, 0.5, 1.0), UsageError);
}

TEST(TdUpdate, ValuesStayInUnitInterval) {
  auto m = build_benchmark("holdup_tank");
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ValueTable table(Discretizer(*m, {4}));
  for (std::size_t i = 0; i < 200; ++i) {
    Rng rng(5, i);
    const auto t = rollout(*m, UniformPolicy{}, nullptr, 1.0, 30.0, rng);
    const double alpha = 0.01 + 0.99 * u(gen);
    const double gamma = 0.01 + 0.99 * u(gen);
    td_update(table, t, u(gen), alpha, gamma);
    ASSERT_TRUE(table.within_unit_interval());
  }
}

TEST(Discretizer, BinsClampToRange) {
  auto m = build_benchmark("holdup_tank");
  Discretizer d(*m, {10});
  EXPECT_EQ(d.key({{0, 0, 0}, {0.0}, 0.0}), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(d.key({{0, 0, 0}, {5.5}, 0.0}), (std::vector<int>{0, 0, 0, 5}));
  EXPECT_EQ(d.key({{0, 0, 0}, {10.0}, 0.0}), (std::vector<int>{0, 0, 0, 9}));
  EXPECT_EQ(d.key({{1, 0, 1}, {-3.0}, 0.0}), (std::vector<int>{1, 0, 1, 0}));
  EXPECT_EQ(Discretizer(*m, {}).bins(), std::vector<int>{16});
  EXPECT_THROW(Discretizer(*m, {4, 4}), DomainError);
}

TEST(SelectBranchBiased, EqualWeightsGiveUnitRatio) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  const std::vector<double> w{3.0, 3.0, 3.0};
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(1, s);
    EXPECT_DOUBLE_EQ(select_branch_biased(p, w, rng).likelihood_ratio, 1.0);
  }
}

// Collects the ratio returned for each index over many draws.
std::vector<double> observed_ratios(const std::vector<double>& p, const std::vector<double>& w,
                                    std::vector<std::size_t>* counts = nullptr, int draws = 4000) {
  std::vector<double> ratio(p.size(), std::nan(""));
  if (counts) counts->assign(p.size(), 0);
  for (int s = 0; s < draws; ++s) {
    Rng rng(9, static_cast<std::uint64_t>(s));
    const auto c = select_branch_biased(p, w, rng);
    ratio[c.index] = c.likelihood_ratio;
    if (counts) ++(*counts)[c.index];
  }
  return ratio;
}

TEST(SelectBranchBiased, HalfHalfTwoToOne) {
  std::vector<std::size_t> counts;
  const auto r = observed_ratios({0.5, 0.5}, {2.0, 1.0}, &counts, 30000);
  EXPECT_NEAR(r[0], 0.75, 1e-15);
  EXPECT_NEAR(r[1], 1.5, 1e-15);
  EXPECT_NEAR(counts[0] / 30000.0, 2.0 / 3.0, 0.01);
}

TEST(SelectBranchBiased, ExhaustiveIdentities) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 4;
    std::vector<double> p(n), w(n), f(n);
    double s = 0.0;
    for (auto& x : p) s += (x = u(gen));
    for (auto& x : p) x /= s;
    for (auto& x : w) x = std::exp(3.0 * (u(gen) - 0.5));
    for (auto& x : f) x = u(gen);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += p[i] * w[i];

    const auto ratio = observed_ratios(p, w);
    double sum_q_ratio = 0.0, eq = 0.0, ep = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_FALSE(std::isnan(ratio[i])) << "index " << i << " never drawn";
      const double q = p[i] * w[i] / norm;
      EXPECT_NEAR(ratio[i], p[i] / q, 1e-12 * ratio[i]);
      sum_q_ratio += q * ratio[i];
      eq += q * ratio[i] * f[i];
      ep += p[i] * f[i];
    }
    EXPECT_NEAR(sum_q_ratio, 1.0, 1e-12);
    EXPECT_NEAR(eq, ep, 1e-12);
  }
}

TEST(SelectBranchBiased, ZeroBaseBranchesNeverChosen) {
  const auto r = observed_ratios({0.0, 1.0, 0.0}, {100.0, 1.0, 100.0});
  EXPECT_TRUE(std::isnan(r[0]));
  EXPECT_DOUBLE_EQ(r[1], 1.0);
  EXPECT_TRUE(std::isnan(r[2]));
}

TEST(SelectBranchBiased, Errors) {
  Rng rng(0, 0);
  EXPECT_THROW(select_branch_biased(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}, rng),
               DomainError);
  EXPECT_THROW(select_branch_biased(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}, rng),
               DomainError);
  EXPECT_THROW(select_branch_biased(std::vector<double>{1.0}, std::vector<double>{1.0, 1.0}, rng),
               UsageError);
}

}  // namespace
}  // namespace gsim
