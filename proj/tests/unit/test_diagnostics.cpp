#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "wmflow/diagnostics.hpp"

using namespace wmflow;

namespace {

const double pi = std::numbers::pi;

Density smooth_random(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a = U(rng), b = U(rng), c = U(rng);
  return Density::sample(g, [&](double x) {
    return 0.5 + 0.2 * a * std::cos(pi * x) + 0.1 * b * std::cos(2 * pi * x) + 0.05 * c * std::cos(5 * pi * x);
  });
}

Trajectory constant_trajectory(const Grid& g, const ProblemSpec& spec, std::size_t steps) {
  Trajectory tr;
  tr.tau = 1e-3;
  const auto u = Density::constant(g, spec.s0());
  for (std::size_t n = 0; n <= steps; ++n) {
    tr.iterates.push_back(u);
    StepRecord r;
    r.energy = energy(u, spec);
    r.entropy = entropy_functional(u, spec);
    tr.records.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(LaplaceBounds, EqualityInOneDimension) {
  const Grid g(50, 1.0);
  EXPECT_TRUE(check_laplace_bounds(Density::constant(g, 0.2)).passed);
  EXPECT_EQ(check_laplace_bounds(Density::constant(g, 0.2)).lhs, 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    CellField v(g.n_cells());
    for (auto& x : v) x = U(rng);
    const auto r = check_laplace_bounds(Density(g, v));
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.lhs, r.rhs, 1e-12 * r.lhs);
  }
}

TEST(LionsVillani, ConstantAndQuadraticProfile) {
  const Grid g0(10, 1.0);
  const auto c = check_lions_villani(Density::constant(g0, 0.4));
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_EQ(c.rhs, 0.0);
  EXPECT_TRUE(c.passed);

  // u = x^2: sqrt(u) = x, so 16 int |D sqrt(u)|^4 = 16; int (u'')^2 = 4.
  double prev = kInf;
  for (std::size_t n : {50u, 100u, 200u}) {
    const Grid g(n, 1.0);
    const auto r = check_lions_villani(Density::sample(g, [](double x) { return x * x; }));
    EXPECT_TRUE(r.passed);
    EXPECT_GE(r.rhs, 36.0);
    const double err = std::abs(r.lhs - 16.0);
    EXPECT_LT(err, prev);
    EXPECT_LT(err, 20.0 / static_cast<double>(n));
    prev = err;
  }

  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) EXPECT_TRUE(check_lions_villani(smooth_random(Grid(64, 1.0), rng)).passed);
}

TEST(FlowInterchange, ConstantIteratesAndQuotientConvergence) {
  const Grid g(32, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u = Density::constant(g, 0.5);
  const auto r = check_flow_interchange(u, u, 1e-3, ch);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);

  std::mt19937_64 rng(3);
  const auto v = smooth_random(g, rng);
  const double rate = heat_dissipation_rate(v, ch).rate;
  const auto q = heat_quotients(v, ch, {1e-4, 1e-5, 1e-6});
  const double e1 = std::abs(q[0] - rate), e2 = std::abs(q[1] - rate), e3 = std::abs(q[2] - rate);
  EXPECT_NEAR(e1 / e2, 10.0, 1.0);
  EXPECT_NEAR(e2 / e3, 10.0, 1.0);
  const auto rep = check_flow_interchange(v, v, 1e-3, ch);
  EXPECT_NEAR(rep.context.at("quotient_limit"), rate, 1e-8 * std::abs(rate));
}

TEST(FlowInterchange, HoldsAlongCahnHilliardSteps) {
  const Grid g(32, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u0 = Density::sample(g, [](double x) { return 0.5 + 0.4 * std::tanh((x - 0.5) / 0.1); });
  JkoConfig cfg;
  cfg.tau = 1e-3;
  cfg.T_final = 2e-2;
  cfg.backend = MetricBackend::dynamic(4);
  const auto tr = run(u0, cfg, ch);
  for (const auto& r : check_flow_interchange(tr, ch)) EXPECT_EQ(r.status, CheckStatus::Pass);
  for (const auto& r : check_entropy_dissipation(tr, ch)) EXPECT_TRUE(r.passed);
  EXPECT_TRUE(check_h2_budget(tr, ch).passed);
}

TEST(WeakResidual, TrivialCases) {
  const Grid g(16, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u0 = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x); });
  JkoConfig cfg;
  cfg.tau = 1e-2;
  cfg.T_final = 0.5;
  cfg.backend = MetricBackend::frozen();
  const auto tr = run(u0, cfg, ch);
  const auto z = check_weak_residual(tr, TimeTest::zero(), TestPotential::cosine(g, 1), ch);
  EXPECT_EQ(z.lhs, 0.0);
  EXPECT_EQ(z.rhs, 0.0);
  const auto c = check_weak_residual(tr, TimeTest::bump(0.1, 0.4), TestPotential::constant(g, 1.0), ch);
  EXPECT_NEAR(c.lhs, 0.0, 1e-10);
  EXPECT_NEAR(c.rhs, 0.0, 1e-12);
}

TEST(TimeTest, BumpDerivative) {
  const auto b = TimeTest::bump(0.1, 0.4);
  EXPECT_EQ(b.psi(0.05), 0.0);
  EXPECT_EQ(b.psi(0.4), 0.0);
  EXPECT_NEAR(b.psi(0.25), 1.0, 1e-15);
  for (double t : {0.12, 0.2, 0.31, 0.38}) {
    const double fd = (b.psi(t + 1e-6) - b.psi(t - 1e-6)) / 2e-6;
    EXPECT_NEAR(b.dpsi(t), fd, 1e-6 * (1.0 + std::abs(fd)));
  }
}

TEST(EntropyDissipation, ConstantTrajectory) {
  const Grid g(16, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto tr = constant_trajectory(g, ch, 5);
  for (const auto& r : check_entropy_dissipation(tr, ch)) {
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_GT(r.rhs, 0.0);
  }
  EXPECT_NEAR(h2_budget(tr), 5e-3 * 0.25, 1e-15);
}
