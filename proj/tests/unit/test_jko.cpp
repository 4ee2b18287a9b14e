#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "wmflow/flows.hpp"
#include "wmflow/jko.hpp"

using namespace wmflow;

namespace {

const double pi = std::numbers::pi;

Density tanh_profile(const Grid& g) {
  return Density::sample(g, [](double x) { return 0.5 + 0.4 * std::tanh((x - 0.5) / 0.1); });
}

double l2_diff(const Density& a, const Density& b) {
  CellField d(a.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = a[j] - b[j];
  return norm_l2(a.grid, d);
}

JkoConfig config(double tau, double T, MetricBackend b = MetricBackend::dynamic()) {
  JkoConfig c;
  c.tau = tau;
  c.T_final = T;
  c.backend = b;
  return c;
}

}  // namespace

TEST(JkoStep, MinimizerIsFixedPoint) {
  const Grid g(24, 1.0);
  for (const auto& spec : {ProblemSpec(mobility::quadratic(1.0), free_energy::quadratic(2.0), 0.4, 1.0),
                           ProblemSpec(mobility::wasserstein(), free_energy::zero(), 0.7, 1.0)}) {
    const auto u = Density::constant(g, spec.s0());
    for (auto b : {MetricBackend::dynamic(4), MetricBackend::frozen()}) {
      const auto s = jko_step(u, config(1e-2, 1e-2, b), spec);
      for (std::size_t j = 0; j < g.n_cells(); ++j) EXPECT_NEAR(s.u_next[j], u[j], 1e-10);
      EXPECT_LE(s.record.energy.total, energy(u, spec).total);
    }
  }
}

TEST(JkoStep, FrozenBiharmonicMatchesDenseSolve) {
  // m = 1, G = 0: the step solves (I + tau Delta_h^2) v = u.
  const std::size_t n = 20;
  const Grid g(n, 1.0);
  const ProblemSpec bi(mobility::constant(1.0), free_energy::zero(), 0.5, 1.0, false);
  const auto u = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x) + 0.1 * std::cos(2 * pi * x); });
  const double tau = 1e-4;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const double h2 = g.h() * g.h();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    L(j, j) -= 1.0 / h2;
    L(j + 1, j + 1) -= 1.0 / h2;
    L(j, j + 1) += 1.0 / h2;
    L(j + 1, j) += 1.0 / h2;
  }
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + tau * L * L;
  const Eigen::VectorXd v = A.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(u.values.data(), n));
  const auto s = jko_step(u, config(tau, tau, MetricBackend::frozen()), bi);
  for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(s.u_next[j], v(j), 1e-9);
}

TEST(JkoStep, CahnHilliardStepCertificates) {
  const Grid g(64, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u = tanh_profile(g);
  for (auto b : {MetricBackend::dynamic(), MetricBackend::frozen()}) {
    const auto s = jko_step(u, config(1e-3, 1e-3, b), ch);
    EXPECT_LT(s.record.energy.total, energy(u, ch).total);
    EXPECT_LE(s.record.psi, energy(u, ch).total);
    EXPECT_NEAR(s.u_next.mass(), u.mass(), 1e-12 * u.mass());
    EXPECT_GT(s.u_next.min(), 0.0);
    EXPECT_LT(s.u_next.max(), 1.0);
    EXPECT_FALSE(s.record.fallback);
    EXPECT_EQ(s.record.solver.quality, SolveQuality::Converged);
  }
}

TEST(JkoStep, SmallStepAgreesWithDirectSolver) {
  const Grid g(48, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x); });
  const double tau = 1e-5;
  const auto j = jko_step(u, config(tau, tau), ch).u_next;
  const auto d = direct_pde_solve(u, ch, tau, tau).iterates.back();
  EXPECT_LT(l2_diff(j, d), 0.02 * l2_diff(j, u));
}

TEST(JkoRun, ConvexEnergyRelaxesToConstant) {
  const Grid g(32, 1.0);
  const ProblemSpec spec(mobility::quadratic(1.0), free_energy::quadratic(1.0), 0.5, 1.0);
  const auto u0 = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x); });
  const auto tr = run(u0, config(1e-3, 0.2, MetricBackend::dynamic(4)), spec);
  ASSERT_EQ(tr.steps(), 200u);
  const double floor = g.length() * spec.energy()(0.5);
  for (std::size_t n = 1; n < tr.records.size(); ++n) {
    EXPECT_LE(tr.records[n].energy.total, tr.records[n - 1].energy.total);
    EXPECT_GE(tr.records[n].energy.total, floor - 1e-14);
  }
  EXPECT_LT(tr.iterates.back().max() - tr.iterates.back().min(), 0.05 * (u0.max() - u0.min()));
  EXPECT_TRUE(energy_estimate_check(tr).passed);
}

TEST(JkoRun, HolderCertificate) {
  const Grid g(32, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto tr = run(tanh_profile(g), config(2e-3, 0.04), ch);
  for (const auto& r : holder_certificate(tr, ch, 6)) EXPECT_TRUE(r.passed) << r.lhs << " > " << r.rhs;
}

TEST(JkoRun, TimeStepRefinementIsFirstOrder) {
  const Grid g(32, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u0 = tanh_profile(g);
  std::vector<Density> ends;
  for (double tau : {4e-3, 2e-3, 1e-3}) ends.push_back(run(u0, config(tau, 0.04, MetricBackend::dynamic(4)), ch).iterates.back());
  const double d1 = l2_diff(ends[0], ends[1]), d2 = l2_diff(ends[1], ends[2]);
  EXPECT_LT(d2, d1);
  EXPECT_NEAR(d1 / d2, 2.0, 0.5);
}

TEST(JkoRun, InterpolantConvention) {
  const Grid g(16, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto tr = run(tanh_profile(g), config(1e-3, 3e-3, MetricBackend::frozen()), ch);
  ASSERT_EQ(tr.steps(), 3u);
  EXPECT_EQ(tr.interpolant(0.0).values, tr.iterates[0].values);
  EXPECT_EQ(tr.interpolant(0.5e-3).values, tr.iterates[1].values);
  EXPECT_EQ(tr.interpolant(1e-3).values, tr.iterates[1].values);
  EXPECT_EQ(tr.interpolant(1.5e-3).values, tr.iterates[2].values);
  EXPECT_EQ(tr.interpolant(3e-3).values, tr.iterates[3].values);
  EXPECT_THROW(tr.interpolant(4e-3), Error);
  EXPECT_THROW(tr.interpolant(-1e-3), Error);
}

TEST(JkoRun, RegularizedMobilityRoute) {
  const Grid g(32, 1.0);
  const ProblemSpec tf(mobility::power(0.75), free_energy::thin_film(0.0, 1.0, 0.75), 0.25, 1.0);
  const auto u0 = Density::sample(g, [](double x) {
    const double z = (x - 0.3) / 0.25;
    return std::abs(z) < 1.0 ? 0.5 * std::pow(std::cos(pi * z / 2.0), 2) : 0.0;
  });
  auto cfg = config(1e-3, 1e-2, MetricBackend::dynamic(4));
  cfg.delta = 1e-3;
  const auto tr = run(u0, cfg, ProblemSpec(mobility::power(0.75), free_energy::zero(), u0.mass(), 1.0));
  for (std::size_t n = 1; n < tr.records.size(); ++n) {
    EXPECT_LE(tr.records[n].energy.total, tr.records[n - 1].energy.total);
    EXPECT_GE(tr.iterates[n].min(), 0.0);
    EXPECT_NEAR(tr.iterates[n].mass(), u0.mass(), 1e-12);
  }
  (void)tf;
}

TEST(JkoConfig, Validation) {
  const Grid g(8, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto u = Density::constant(g, 0.5);
  EXPECT_THROW(jko_step(u, config(0.0, 1.0), ch), Error);
  EXPECT_THROW(jko_step(u, config(1e-2, 1e-3), ch), Error);
  EXPECT_EQ(config(1e-3, 0.0105).steps(), 11u);
  auto bad = u;
  bad.values[0] = 1.5;
  EXPECT_THROW(run(bad, config(1e-3, 1e-3), ch), Error);
}
