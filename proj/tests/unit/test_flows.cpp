#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "wmflow/flows.hpp"

using namespace wmflow;

namespace {

const double pi = std::numbers::pi;

Density random_interior(const Grid& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  CellField v(g.n_cells());
  double s = U(rng);
  for (auto& x : v) {
    s = 0.6 * s + 0.4 * U(rng);
    x = s;
  }
  return Density(g, v);
}

Eigen::MatrixXd dense_laplacian(const Grid& g) {
  const std::size_t n = g.n_cells();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const double h2 = g.h() * g.h();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    L(j, j) -= 1.0 / h2;
    L(j + 1, j + 1) -= 1.0 / h2;
    L(j, j + 1) += 1.0 / h2;
    L(j + 1, j) += 1.0 / h2;
  }
  return L;
}

}  // namespace

TEST(HeatStep, ConstantAndTwoCellExample) {
  const Grid g(9, 1.0);
  const auto c = heat_step(Density::constant(g, 0.3), 0.1);
  for (double x : c.values) EXPECT_NEAR(x, 0.3, 1e-15);

  const Grid two(2, 2.0);
  const auto v = heat_step(Density(two, {2.0, 0.0}), 0.5);
  EXPECT_NEAR(v[0], 1.5, 1e-15);
  EXPECT_NEAR(v[1], 0.5, 1e-15);
  EXPECT_THROW(heat_step(Density(two, {2.0, 0.0}), 0.0), Error);
}

TEST(HeatStep, CosineModesDecayByDiscreteEigenvalue) {
  const Grid g(32, 1.5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-dense_laplacian(g));
  const double ds = 3e-3;
  for (int k : {1, 2, 5}) {
    const auto v = Density::sample(g, [&](double x) { return std::cos(k * pi * x / 1.5); });
    const auto w = heat_step(v, ds);
    // sampled cosines are exact eigenvectors of the Neumann stencil
    const double lambda = es.eigenvalues()(k);
    for (std::size_t j = 0; j < g.n_cells(); ++j) EXPECT_NEAR(w[j], v[j] / (1.0 + ds * lambda), 1e-12);
  }
}

TEST(HeatStep, MassMaxPrincipleAndEntropyDecay) {
  const Grid g(40, 1.0);
  std::mt19937_64 rng(1);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  for (int t = 0; t < 20; ++t) {
    auto v = random_interior(g, rng, 0.05, 0.95);
    const auto w = heat_step(v, 1e-3);
    EXPECT_NEAR(w.mass(), v.mass(), 1e-15);
    EXPECT_GE(w.min(), v.min() - 1e-12);
    EXPECT_LE(w.max(), v.max() + 1e-12);
    const ProblemSpec s(ch.mobility(), ch.energy(), v.mass(), 1.0, false);
    EXPECT_LE(entropy_functional(w, s), entropy_functional(v, s) + 1e-10);
  }
}

TEST(HeatDissipation, TermsAndFiniteDifferenceLimit) {
  const Grid g(32, 1.0);
  const ProblemSpec z(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto v = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x) + 0.1 * std::cos(3 * pi * x); });
  const auto lap = laplacian_neumann(v);
  EXPECT_NEAR(heat_dissipation_rate(v, z).rate, -inner(g, lap, lap), 1e-10);
  EXPECT_EQ(heat_dissipation_rate(v, z).g_term, 0.0);
  EXPECT_EQ(heat_dissipation_rate(Density::constant(g, 0.5), ch).rate, 0.0);

  const double rate = heat_dissipation_rate(v, ch).rate;
  std::vector<double> err;
  for (double s : {1e-4, 5e-5, 2.5e-5}) {
    const double q = energy_difference(v, heat_step(v, s), ch) / s;
    err.push_back(std::abs(q - rate));
  }
  EXPECT_NEAR(err[0] / err[1], 2.0, 0.1);
  EXPECT_NEAR(err[1] / err[2], 2.0, 0.1);

  auto edge = v;
  edge.values[0] = 0.0;
  EXPECT_THROW(heat_dissipation_rate(edge, ch), Error);
}

TEST(ViscousClaw, ConstantPotentialIsHeatFlow) {
  const Grid g(24, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(2);
  const auto v = random_interior(g, rng, 0.1, 0.9);
  const double eps = 0.3, ds = 1e-4;
  const auto a = viscous_claw_step(v, TestPotential::constant(g, 2.0), eps, ds, ch);
  const auto b = heat_step(v, eps * ds);
  for (std::size_t j = 0; j < g.n_cells(); ++j) EXPECT_NEAR(a[j], b[j], 1e-15);
  EXPECT_THROW(viscous_claw_step(v, TestPotential::constant(g, 2.0), eps, 1.0, ch), Error);
  try {
    viscous_claw_step(v, TestPotential::constant(g, 2.0), eps, 1.0, ch);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CflViolation);
  }
}

TEST(ViscousClaw, StationaryProfileIsPreserved) {
  const Grid g(40, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  const auto V = TestPotential::cosine(g, 1, 0.5);
  const double eps = 0.5;
  const auto vs = stationary_claw_profile(V, eps, 0.2, ch);
  // U'(vs) + V / eps is constant
  for (std::size_t j = 1; j < g.n_cells(); ++j)
    EXPECT_NEAR(ch.entropy().d1(vs[j]) + V.V[j] / eps, ch.entropy().d1(vs[0]) + V.V[0] / eps, 1e-10);
  const double ds = g.h() * g.h() / 8.0;
  const auto next = viscous_claw_step(vs, V, eps, ds, ch);
  CellField d(g.n_cells());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = next[j] - vs[j];
  EXPECT_LE(norm_l2(g, d), 1e-6 * ds);
}

TEST(ViscousClaw, MassContractionAndRegularizedPotentialDecay) {
  const Grid g(32, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  const auto V = TestPotential::cosine(g, 2, 0.8);
  const double eps = 0.2, ds = g.h() * g.h() / 8.0;
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto a = random_interior(g, rng, 0.1, 0.9), b = random_interior(g, rng, 0.1, 0.9);
    const double shift = (a.mass() - b.mass()) / g.length();
    for (auto& x : b.values) x += shift;
    const ProblemSpec s(ch.mobility(), ch.energy(), a.mass(), 1.0, false);
    double l1 = 0.0;
    for (std::size_t j = 0; j < g.n_cells(); ++j) l1 += g.h() * std::abs(a[j] - b[j]);
    for (int k = 0; k < 20; ++k) {
      const auto a2 = viscous_claw_step(a, V, eps, ds, s), b2 = viscous_claw_step(b, V, eps, ds, s);
      EXPECT_NEAR(a2.mass(), a.mass(), 1e-14);
      EXPECT_LE(regularized_potential(a2, V, eps, s), regularized_potential(a, V, eps, s) + 1e-8);
      double l1n = 0.0;
      for (std::size_t j = 0; j < g.n_cells(); ++j) l1n += g.h() * std::abs(a2[j] - b2[j]);
      EXPECT_LE(l1n, l1 + 1e-8);
      l1 = l1n;
      a = a2;
      b = b2;
    }
  }
}

TEST(DirectSolver, ConstantStaysConstantAndMassIsConserved) {
  const Grid g(32, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::double_well(1.0), 0.5, 1.0);
  const auto c = direct_pde_solve(Density::constant(g, 0.5), ch, 1e-4, 1e-2);
  for (double x : c.iterates.back().values) EXPECT_NEAR(x, 0.5, 1e-11);
  const auto u0 = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x) + 0.05 * std::cos(4 * pi * x); });
  const auto tr = direct_pde_solve(u0, ch, 1e-5, 2e-3);
  ASSERT_EQ(tr.steps(), 200u);
  for (const auto& u : tr.iterates) EXPECT_NEAR(u.mass(), u0.mass(), 1e-13);
}

TEST(DirectSolver, BiharmonicMatchesCosineSeries) {
  const Grid g(128, 1.0);
  const ProblemSpec bi(mobility::constant(1.0), free_energy::zero(), 0.5, 1.0, false);
  const auto u0 = Density::sample(g, [](double x) { return 0.5 + 0.3 * std::cos(pi * x) + 0.1 * std::cos(2 * pi * x); });
  const double T = 5e-3;
  const auto tr = direct_pde_solve(u0, bi, 1e-5, T);
  const auto exact = Density::sample(g, [&](double x) {
    return 0.5 + 0.3 * std::exp(-std::pow(pi, 4) * T) * std::cos(pi * x) +
           0.1 * std::exp(-std::pow(2 * pi, 4) * T) * std::cos(2 * pi * x);
  });
  for (std::size_t j = 0; j < g.n_cells(); ++j) EXPECT_NEAR(tr.iterates.back()[j], exact[j], 1e-3);
}

TEST(DirectSolver, ReportsPositivityLoss) {
  const Grid g(64, 1.0);
  const ProblemSpec tf(mobility::power(0.75), free_energy::zero(), 0.2, 1.0, false);
  auto u0 = Density::sample(g, [](double x) {
    const double z = (x - 0.5) / 0.15;
    return 1e-3 + (std::abs(z) < 1.0 ? std::pow(std::cos(pi * z / 2.0), 2) : 0.0);
  });
  bool lost = false;
  try {
    direct_pde_solve(u0, tf.with_mobility(tf.mobility(), false), 1e-5, 1e-2);
  } catch (const PositivityLossError& e) {
    lost = true;
    EXPECT_EQ(e.kind(), ErrorKind::PositivityLoss);
    EXPECT_LT(e.min_value(), 0.0);
    EXPECT_GT(e.time(), 0.0);
  }
  EXPECT_TRUE(lost);
  u0.values[3] = 0.0;
  EXPECT_THROW(direct_pde_solve(u0, tf, 1e-5, 1e-2), Error);
}
