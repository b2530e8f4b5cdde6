#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "gsim/gsim.hpp"

namespace gsim {
namespace {

RateMatrix two_state_chain(double lambda, double mu) {
  return RateMatrix({-lambda, lambda, mu, -mu}, 2);
}

TEST(Generator, TwoState) {
  const auto q = model_to_generator(*build_benchmark("two_state"));
  ASSERT_EQ(q.size(), 2u);
  EXPECT_DOUBLE_EQ(q(0, 0), -0.1);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.1);
  EXPECT_EQ(q(1, 0), 0.0);
  EXPECT_EQ(q(1, 1), 0.0);
}

TEST(Generator, CascadeEightStates) {
  const auto q = model_to_generator(*build_benchmark("cascade3"));
  ASSERT_EQ(q.size(), 8u);
  EXPECT_NO_THROW(q.validate());
  const auto all = q.index_of({1, 1, 1});
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(q(all, j), 0.0);
  const auto none = q.index_of({0, 0, 0});
  EXPECT_NEAR(q(none, none), -0.15, 1e-15);
  EXPECT_NEAR(q(q.index_of({1, 0, 0}), q.index_of({1, 1, 0})), 0.1, 1e-15);
  EXPECT_NEAR(q(q.index_of({1, 1, 0}), all), 0.2, 1e-15);
}

TEST(Generator, ProcessDependentModelIsUnsupported) {
  try {
    model_to_generator(*build_benchmark("holdup_tank"));
    FAIL() << "expected UnsupportedModelError";
  } catch (const UnsupportedModelError& e) {
    EXPECT_NE(std::string(e.what()).find("level"), std::string::npos) << e.what();
  }
}

TEST(Generator, AbsorbingEndStates) {
  auto m = testing::model_from(R"({"name":"repair","mission_time":10,
    "components":[{"name":"u","states":["ok","failed"]}],
    "rates":[{"component":"u","from":"ok","to":"failed","rate":0.2},
             {"component":"u","from":"failed","to":"ok","rate":1.0}],
    "end_states":[{"class":"target","label":"down","config":{"u":"failed"}}]})");
  EXPECT_DOUBLE_EQ(model_to_generator(*m)(1, 0), 1.0);
  EXPECT_EQ(model_to_generator(*m, true)(1, 0), 0.0);
}

TEST(RateMatrix, ValidateRejectsBadGenerators) {
  EXPECT_THROW(RateMatrix({-1.0, 1.0, 0.5, -0.4}, 2).validate(), DomainError);
  EXPECT_THROW(RateMatrix({1.0, -1.0, 0.0, 0.0}, 2).validate(), DomainError);
  EXPECT_THROW(RateMatrix({0.0, 0.0, 0.0}, 2), DomainError);
}

TEST(CtmcTransient, TimeZeroIsIdentity) {
  const auto q = two_state_chain(1.0, 1.0);
  const std::vector<double> p0{0.3, 0.7};
  EXPECT_EQ(ctmc_transient(q, p0, 0.0), p0);
}

TEST(CtmcTransient, TwoStateClosedForm) {
  const auto q = two_state_chain(1.0, 1.0);
  const auto p = ctmc_transient(q, std::vector<double>{1.0, 0.0}, 1.0);
  EXPECT_NEAR(p[1], 0.5 * (1.0 - std::exp(-2.0)), 1e-9);
  EXPECT_NEAR(p[1], 0.4323324, 1e-7);
}

TEST(CtmcTransient, Stationary) {
  const auto q = two_state_chain(1.0, 1.0);
  const auto p = ctmc_transient(q, std::vector<double>{1.0, 0.0}, 100.0);
  EXPECT_NEAR(p[0], 0.5, 1e-9);
  EXPECT_NEAR(p[1], 0.5, 1e-9);
}

TEST(CtmcTransient, AsymmetricClosedForm) {
  const double l = 0.7, mu = 2.3;
  const auto q = two_state_chain(l, mu);
  for (double t : {0.1, 1.0, 5.0, 80.0}) {
    const auto p = ctmc_transient(q, std::vector<double>{1.0, 0.0}, t);
    EXPECT_NEAR(p[1], l / (l + mu) * (1.0 - std::exp(-(l + mu) * t)), 1e-10) << t;
  }
}

TEST(CtmcTransient, NormalizesOnRandomGenerators) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 7;
    std::vector<double> e(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && u(gen) < 0.6) row += (e[i * n + j] = 5.0 * u(gen));
      e[i * n + i] = -row;
    }
    const RateMatrix q(e, n);
    std::vector<double> p0(n);
    for (auto& x : p0) x = u(gen);
    const double s = std::accumulate(p0.begin(), p0.end(), 0.0);
    for (auto& x : p0) x /= s;
    const double t = 50.0 * u(gen);
    const auto p = ctmc_transient(q, p0, t);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-10);
    for (double x : p) EXPECT_GE(x, 0.0);
  }
}

TEST(CtmcTransient, DomainErrors) {
  const auto q = two_state_chain(1.0, 1.0);
  EXPECT_THROW(ctmc_transient(q, std::vector<double>{1.0}, 1.0), DomainError);
  EXPECT_THROW(ctmc_transient(q, std::vector<double>{0.5, 0.6}, 1.0), DomainError);
  EXPECT_THROW(ctmc_transient(q, std::vector<double>{1.0, 0.0}, -1.0), DomainError);
  EXPECT_THROW(ctmc_transient(RateMatrix({1.0, -1.0, 0.0, 0.0}, 2), std::vector<double>{1.0, 0.0}, 1.0),
               DomainError);
}

TEST(CtmcClassMasses, TwoStateFailure) {
  const auto m = ctmc_class_masses(*build_benchmark("two_state"), 10.0);
  EXPECT_NEAR(m.at("target:failure"), 1.0 - std::exp(-1.0), 1e-10);
  EXPECT_NEAR(m.at("success"), std::exp(-1.0), 1e-10);
}

TEST(EnumerateExact, TwoStateFailure) {
  const auto r = enumerate_exact(*build_benchmark("two_state"), 1.0, 10);
  EXPECT_NEAR(r.mass("target:failure"), 1.0 - std::exp(-1.0), 1e-9);
}

TEST(EnumerateExact, ZeroRatesKeepInitialClass) {
  const auto r = enumerate_exact(*testing::single_rate(0.0), 1.0, 10);
  EXPECT_EQ(r.mass("success"), 1.0);
  EXPECT_EQ(r.mass("target:failure"), 0.0);
}

TEST(EnumerateExact, DiscreteFixture) {
  testing::DiscreteStepFixture m;
  const auto r = enumerate_exact(m, 1.0, 2);
  EXPECT_NEAR(r.mass("target:both_failed"), testing::kBothFailedTwoSteps, 1e-15);
  EXPECT_NEAR(r.mass("success"), 1.0 - testing::kBothFailedTwoSteps, 1e-15);
}

TEST(EnumerateExact, GuardRefusesWithSize) {
  try {
    enumerate_exact(*build_benchmark("holdup_tank"), 1.0, 100, 1000);
    FAIL() << "expected GuardError";
  } catch (const GuardError& e) {
    EXPECT_GT(e.size(), 1000u);
    EXPECT_NE(std::string(e.what()).find("1000"), std::string::npos) << e.what();
  }
}

TEST(EnumerateExact, OneStepEqualsBranchDistribution) {
  for (auto name : benchmark_names) {
    auto m = build_benchmark(name);
    const double T = m->mission_time();
    const auto r = enumerate_exact(*m, T, 1);
    std::map<std::string, double> expect;
    for (const auto& b : branch_distribution(*m, m->initial_state(), T)) {
      const auto s = advance(*m, m->initial_state(), b.config, T);
      expect[classify_at(*m, s, T).key()] += b.probability;
    }
    for (const auto& [k, v] : expect) EXPECT_NEAR(r.mass(k), v, 1e-15) << name << " " << k;
  }
}

// First-order discretization: halving dt roughly halves the error against
// the CTMC. two_state has one constant-rate transition, so every dt is
// already exact there and the ratio is undefined.
TEST(Convergence, HalvingDtHalvesError) {
  auto cascade = build_benchmark("cascade3");
  const double truth = ctmc_class_masses(*cascade, 20.0).at("target:all_failed");
  std::vector<double> err;
  for (double dt : {1.0, 0.5, 0.25}) {
    const auto steps = segment_count(20.0, dt);
    err.push_back(std::fabs(enumerate_exact(*cascade, dt, steps).target_mass() - truth));
  }
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double ratio = err[i - 1] / err[i];
    EXPECT_GE(ratio, 1.5) << i;
    EXPECT_LE(ratio, 2.5) << i;
  }

  auto two = build_benchmark("two_state");
  const double t2 = ctmc_class_masses(*two, 10.0).at("target:failure");
  for (double dt : {1.0, 0.5, 0.25})
    EXPECT_NEAR(enumerate_exact(*two, dt, segment_count(10.0, dt)).target_mass(), t2, 1e-12);
}

}  // namespace
}  // namespace gsim
