#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "fxcor/config.hpp"
#include "fxcor/graph.hpp"
#include "fxcor/observer.hpp"

namespace fxcor {
namespace {

const ObserverParams kParams{7.5, 7, 11, 0.7, 1.45};
const AttackBudget kBudget{0.2, 4.9};
const GainMatrixK kBenchK{Vector(5, 1.78), 0.0};

ObserverCertificate benchmark_constants() { return compute_constants(kParams, kBenchK, 5, 2, 0.2); }

ObserverCertificate benchmark_certificate() {
  return certify_observer(kParams, kBenchK, 5, 2, 0.2, kBudget, 0.0);
}

TEST(ObserverParams, ExponentOrdering) {
  EXPECT_NO_THROW(kParams.check_exponents());
  for (const ObserverParams& bad : {ObserverParams{1, 1, 1, 0.0, 2}, ObserverParams{1, 1, 1, 1.0, 2},
                                    ObserverParams{1, 1, 1, 0.7, 1.4}}) {
    try {
      bad.check_exponents();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidExponents);
    }
  }
}

TEST(ObserverConstants, BenchmarkValues) {
  const ObserverCertificate c = benchmark_constants();
  const double rel = 5e-4;
  EXPECT_NEAR(c.c1, 21.4662, 21.4662 * rel);
  EXPECT_NEAR(c.c2, 10.3531, 10.3531 * rel);
  EXPECT_NEAR(c.c3, 21.8649, 21.8649 * rel);
  EXPECT_NEAR(c.c4, 10.2899, 10.2899 * rel);
  EXPECT_NEAR(c.c5, 0.5727, 0.5727 * rel);
  EXPECT_NEAR(c.hat_c1, 0.0736, 0.0736 * 2e-3);
  EXPECT_NEAR(c.hat_c2, 0.1011, 0.1011 * 2e-3);
  EXPECT_NEAR(c.tilde_c1, 0.0762, 0.0762 * 2e-3);
  EXPECT_NEAR(c.tilde_c2, 0.1052, 0.1052 * 2e-3);
  EXPECT_NEAR(c.ks_norm, 0.356, 1e-12);
}

TEST(ObserverConstants, DegenerateExosystem) {
  const ObserverCertificate c =
      compute_constants({1, 1, 1, 0.5, 2.5}, GainMatrixK{Vector{1.0}, 0.0}, 1, 1, 0.0);
  EXPECT_EQ(c.c5, 0.0);
  EXPECT_DOUBLE_EQ(c.c1, 0.5);
}

TEST(ObserverConstants, GainGate) {
  try {
    compute_constants({0.3, 7, 11, 0.7, 1.45}, kBenchK, 5, 2, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGainTooSmall);
  }
}

TEST(ObserverConditions, BenchmarkBudgetSatisfiesAllThree) {
  const ObserverCertificate c = benchmark_certificate();
  EXPECT_TRUE(c.all_conditions_hold());
  EXPECT_GT(c.conditions[0].slack, 0.0);
  EXPECT_LT(c.conditions[1].slack, 0.0);
  EXPECT_LE(c.conditions[2].slack, 0.0);
}

TEST(ObserverConditions, LimitingBudgets) {
  const ObserverCertificate c = benchmark_constants();
  EXPECT_FALSE(condition_one(c, {0.2, 1.0 + 1e-6}).holds);
  const ConditionResult two = condition_two(c, {1e3, 4.9});
  EXPECT_FALSE(two.holds);
  EXPECT_GT(two.slack, 0.0);
  try {
    compute_settling_certificate(c, {1e3, 4.9}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConditionFailed);
  }
}

TEST(SettlingCertificate, BenchmarkTimes) {
  const ObserverCertificate c = benchmark_certificate();
  EXPECT_NEAR(c.t_o, 79.5692, 79.5692 * 1e-3);
  EXPECT_NEAR(c.bar_t_o, 29.90, 0.1);
  EXPECT_NEAR(c.t_o - c.bar_t_o, 49.60, 0.1);
  EXPECT_NEAR(c.bar_t_o, c.bar_t_o_bisect, 1e-8);
  EXPECT_NEAR(c.t_o, c.t_o_bisect, 1e-8);
  EXPECT_GE(c.t_o, c.bar_t_o);
  EXPECT_GE(c.bar_t_o, c.t0);
}

TEST(SettlingCertificate, ClosedFormsFromConstants) {
  const ObserverCertificate c = benchmark_certificate();
  const double pd = kBudget.p_d, nu = kBudget.nu_d;
  const double bar = pd * (std::log(1 + c.c3 / c.c2) + (c.tilde_c1 + c.tilde_c2) * nu) /
                     (c.tilde_c1 * (pd - 1) - c.tilde_c2);
  EXPECT_NEAR(c.bar_t_o, bar, 1e-12 * bar);
  const double second = pd / c.hat_c2 * (std::log(c.hat_c1 * (pd - 1) / c.hat_c2) - c.hat_c2 * nu);
  EXPECT_NEAR(c.t_o, bar + second, 1e-12 * c.t_o);
}

TEST(SettlingCertificate, StartTimeShiftsBothBounds) {
  const ObserverCertificate a = benchmark_certificate();
  const ObserverCertificate b = certify_observer(kParams, kBenchK, 5, 2, 0.2, kBudget, 10.0);
  EXPECT_NEAR(b.bar_t_o - a.bar_t_o, 10.0, 1e-9);
  EXPECT_NEAR(b.t_o - a.t_o, 10.0, 1e-9);
}

TEST(SettlingCertificate, VanishingOffsetsCollapseTheFirstStage) {
  ObserverCertificate c = benchmark_constants();
  c.c3 = 1e-14;
  const ObserverCertificate s = compute_settling_certificate(c, {1e-14, 4.9}, 3.0);
  EXPECT_NEAR(s.bar_t_o, 3.0, 1e-9);
}

TEST(SettlingCertificate, RecomputationIsBitIdentical) {
  const ObserverCertificate a = benchmark_certificate();
  const ObserverCertificate b = benchmark_certificate();
  const double va[] = {a.c1, a.c2, a.c3, a.c4, a.c5, a.hat_c1, a.hat_c2,
                       a.tilde_c1, a.tilde_c2, a.bar_t_o, a.t_o};
  const double vb[] = {b.c1, b.c2, b.c3, b.c4, b.c5, b.hat_c1, b.hat_c2,
                       b.tilde_c1, b.tilde_c2, b.bar_t_o, b.t_o};
  EXPECT_EQ(std::memcmp(va, vb, sizeof va), 0);
}

DirectedGraph single_agent() {
  const std::vector<Edge> e{{0, 1, 1.0}};
  return DirectedGraph::from_edges(1, e);
}

TEST(ObserverRhs, SingleAgentHandEvaluation) {
  const auto d = observer_rhs({Vector{4.0}}, Vector{0.0}, single_agent(), 1, {1, 1, 1, 0.5, 2},
                              Matrix{{0}});
  EXPECT_DOUBLE_EQ(d[0][0], -22.0);
}

TEST(ObserverRhs, AttackLeavesOnlyTheExosystemCopy) {
  const ScenarioConfig cfg = benchmark_scenario();
  const DirectedGraph g = DirectedGraph::from_edges(5, cfg.edges);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Vector> eta(5, Vector(2));
  for (auto& e : eta) e = {u(rng), u(rng)};
  const auto d = observer_rhs(eta, Vector{1.0, 2.0}, g, 0, kParams, cfg.s);
  for (std::size_t i = 0; i < 5; ++i) {
    const Vector expected = cfg.s * eta[i];
    EXPECT_EQ(d[i], expected);
  }
}

TEST(ObserverRhs, ConsensusManifoldIsInvariant) {
  const ScenarioConfig cfg = benchmark_scenario();
  const DirectedGraph g = DirectedGraph::from_edges(5, cfg.edges);
  const Vector v{1.7, -2.3};
  const auto d = observer_rhs(std::vector<Vector>(5, v), v, g, 1, kParams, cfg.s);
  const Vector sv = cfg.s * v;
  for (const Vector& di : d) EXPECT_EQ(di, sv);
}

TEST(ObserverRhs, DimensionMismatch) {
  try {
    observer_rhs({Vector{1.0, 2.0}}, Vector{0.0}, single_agent(), 1, kParams, Matrix{{0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

// ς_i = Σ_j a_ij(η_i − η_j) + a_i0(η_i − v) written directly on the graph.
TEST(ConsensusErrors, MatchGraphNeighbourSums) {
  const ScenarioConfig cfg = benchmark_scenario();
  const DirectedGraph g = DirectedGraph::from_edges(5, cfg.edges);
  const CouplingMatrix h = build_h_matrix(g);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector v{u(rng), u(rng)};
    Vector eta(10), err(10);
    for (std::size_t k = 0; k < 10; ++k) {
      eta[k] = u(rng);
      err[k] = eta[k] - v[k % 2];
    }
    const Vector sigma = consensus_errors(h, err, 2);
    for (std::size_t i = 1; i <= 5; ++i)
      for (std::size_t r = 0; r < 2; ++r) {
        double s = g.weight(i, 0) * (eta[(i - 1) * 2 + r] - v[r]);
        for (std::size_t j = 1; j <= 5; ++j)
          s += g.weight(i, j) * (eta[(i - 1) * 2 + r] - eta[(j - 1) * 2 + r]);
        EXPECT_NEAR(sigma[(i - 1) * 2 + r], s, 1e-12);
      }
  }
}

TEST(LyapunovV, Examples) {
  EXPECT_EQ(lyapunov_v(Vector(10, 0.0), kBenchK, kParams), 0.0);
  const ObserverParams p{2, 3, 4, 0.5, 2.5};
  EXPECT_DOUBLE_EQ(lyapunov_v(Vector{1.0}, GainMatrixK{Vector{1.0}, 0.0}, p),
                   2.0 / 2 + 3.0 / 1.5 + 4.0 / 3.5);
  EXPECT_DOUBLE_EQ(lyapunov_v(Vector{-1.0}, GainMatrixK{Vector{2.0}, 0.0}, p),
                   2.0 * (2.0 / 2 + 3.0 / 1.5 + 4.0 / 3.5));
}

TEST(LyapunovV, PositiveAwayFromZero) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5, 5);
  std::uniform_int_distribution<int> which(0, 9);
  for (int trial = 0; trial < 2000; ++trial) {
    Vector sigma(10, 0.0);
    sigma[static_cast<std::size_t>(which(rng))] = u(rng) * std::pow(10.0, -(trial % 8));
    if (trial % 3 == 0)
      for (double& s : sigma) s = u(rng);
    if (std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 0.0; })) continue;
    EXPECT_GT(lyapunov_v(sigma, kBenchK, kParams), 0.0);
  }
}

}  // namespace
}  // namespace fxcor
