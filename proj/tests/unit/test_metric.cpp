#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "wmflow/metric.hpp"

using namespace wmflow;

namespace {

const double pi = std::numbers::pi;

Density random_interior(const Grid& g, std::mt19937_64& rng, double M, double mass, double floor = 0.05) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double mean = mass / g.length();
  CellField v(g.n_cells());
  for (auto& x : v) x = U(rng) * (std::isfinite(M) ? M : 3.0 * mean);
  auto p = project_admissible(g, v, M, mass);
  for (auto& x : p.values) x = (1.0 - floor) * x + floor * mean;
  return p;
}

Density bump(const Grid& g, double center, double width) {
  auto u = Density::sample(g, [&](double x) {
    const double z = (x - center) / width;
    return std::abs(z) < 1.0 ? std::pow(std::cos(pi * z / 2.0), 2) : 0.0;
  });
  const double m = u.mass();
  for (auto& x : u.values) x /= m;
  return u;
}

// W_2 between piecewise constant densities from their quantile functions.
double quantile_w2(const Density& a, const Density& b) {
  const Grid& g = a.grid;
  auto cdf = [&](const Density& u) {
    std::vector<double> F(g.n_faces(), 0.0);
    for (std::size_t j = 0; j < g.n_cells(); ++j) F[j + 1] = F[j] + g.h() * u[j];
    return F;
  };
  const auto Fa = cdf(a), Fb = cdf(b);
  auto quantile = [&](const std::vector<double>& F, const Density& u, double t) {
    std::size_t j = 0;
    while (j + 1 < g.n_cells() && F[j + 1] < t) ++j;
    while (u[j] == 0.0 && j + 1 < g.n_cells()) ++j;
    return g.face(j) + (t - F[j]) / u[j];
  };
  const int N = 200000;
  double s = 0.0;
  for (int i = 0; i < N; ++i) {
    const double t = (i + 0.5) / N * Fa.back();
    const double d = quantile(Fa, a, t) - quantile(Fb, b, t);
    s += d * d;
  }
  return std::sqrt(s * Fa.back() / N);
}

}  // namespace

TEST(DistanceDynamic, IdenticalDensitiesHaveZeroDistance) {
  const Grid g(10, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(1);
  const auto u = random_interior(g, rng, 1.0, 0.5);
  const auto r = distance_dynamic(u, u, 4, ch);
  EXPECT_EQ(r.value, 0.0);
  for (const auto& q : r.path.momentum)
    for (double x : q) EXPECT_EQ(x, 0.0);
}

TEST(DistanceDynamic, PathSatisfiesContinuityAndBounds) {
  const Grid g(12, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.4, 1.0);
  std::mt19937_64 rng(2);
  const auto a = random_interior(g, rng, 1.0, 0.4, 0.0), b = random_interior(g, rng, 1.0, 0.4, 0.0);
  const std::size_t K = 5;
  const auto r = distance_dynamic(a, b, K, ch);
  ASSERT_EQ(r.path.rho.size(), K + 1);
  EXPECT_EQ(r.path.rho.front(), a.values);
  for (std::size_t j = 0; j < g.n_cells(); ++j) EXPECT_NEAR(r.path.rho.back()[j], b[j], 1e-12);
  for (std::size_t k = 0; k < K; ++k) {
    const auto div = divergence(g, r.path.momentum[k]);
    for (std::size_t j = 0; j < g.n_cells(); ++j)
      EXPECT_NEAR((r.path.rho[k + 1][j] - r.path.rho[k][j]) * K + div[j], 0.0, 1e-9);
    EXPECT_EQ(r.path.momentum[k].front(), 0.0);
    EXPECT_EQ(r.path.momentum[k].back(), 0.0);
  }
  for (const auto& s : r.path.rho) {
    EXPECT_NEAR(Density(g, s).mass(), 0.4, 1e-13);
    for (double x : s) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_NEAR(r.value * r.value, r.path.action, 1e-15);
  EXPECT_EQ(r.stats.quality, SolveQuality::Converged);
}

TEST(DistanceDynamic, WassersteinMatchesQuantileFormula) {
  const ProblemSpec w(mobility::wasserstein(), free_energy::zero(), 1.0, 1.0);
  const Grid g(48, 1.0);
  const auto a = bump(g, 0.35, 0.1), b = bump(g, 0.6, 0.1);
  const double oracle = quantile_w2(a, b);
  EXPECT_NEAR(oracle, 0.25, 2e-3);
  const double v = distance_dynamic(a, b, 16, w).value;
  EXPECT_NEAR(v / oracle, 1.0, 1e-2);
}

TEST(DistanceDynamic, Symmetry) {
  const Grid g(10, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 8; ++t) {
    const auto a = random_interior(g, rng, 1.0, 0.5, 0.0), b = random_interior(g, rng, 1.0, 0.5, 0.0);
    const double ab = distance_dynamic(a, b, 4, ch).value, ba = distance_dynamic(b, a, 4, ch).value;
    EXPECT_LE(std::abs(ab - ba), 1e-6 * (1.0 + ab));
  }
}

TEST(DistanceDynamic, TriangleInequality) {
  const Grid g(8, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_interior(g, rng, 1.0, 0.5, 0.0), b = random_interior(g, rng, 1.0, 0.5, 0.0),
               c = random_interior(g, rng, 1.0, 0.5, 0.0);
    const double ac = distance_dynamic(a, c, 4, ch).value;
    const double ab = distance_dynamic(a, b, 4, ch).value, bc = distance_dynamic(b, c, 4, ch).value;
    EXPECT_LE(ac, ab + bc + 1e-6);
  }
}

TEST(DistanceDynamic, RegularizedMobilityGivesLargerDistance) {
  const Grid g(10, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  const auto md = regularize_mobility(ch.mobility(), 1e-2);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 6; ++t) {
    const auto a = random_interior(g, rng, 1.0, 0.5), b = random_interior(g, rng, 1.0, 0.5);
    const double w = distance_dynamic(a, b, 4, ch).value;
    const double wd = distance_dynamic(a, b, 4, md, 1.0).value;
    EXPECT_LE(w, wd + 1e-8);
  }
}

TEST(DistanceDynamic, DegenerateEndpointsAndMassMismatch) {
  const Grid g(16, 1.0);
  const ProblemSpec w(mobility::wasserstein(), free_energy::zero(), 1.0, 1.0);
  const auto a = bump(g, 0.3, 0.15), b = bump(g, 0.7, 0.15);
  const auto r = distance_dynamic(a, b, 4, w);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_GT(r.value, 0.3);
  auto c = b;
  c.values[3] += 0.1;
  EXPECT_THROW(distance_dynamic(a, c, 4, w), Error);
  try {
    distance_dynamic(a, c, 4, w);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MassMismatch);
  }
}

TEST(DistanceFrozen, ConstantWeightMatchesDensePseudoinverse) {
  const std::size_t n = 14;
  const Grid g(n, 2.0);
  const ProblemSpec c(mobility::constant(3.0), free_energy::zero(), 1.0, 2.0, false);
  std::mt19937_64 rng(6);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const double h2 = g.h() * g.h();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    L(j, j) -= 1.0 / h2;
    L(j + 1, j + 1) -= 1.0 / h2;
    L(j, j + 1) += 1.0 / h2;
    L(j + 1, j) += 1.0 / h2;
  }
  const Eigen::MatrixXd pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(-L).pseudoInverse();
  for (int t = 0; t < 5; ++t) {
    const auto a = random_interior(g, rng, kInf, 1.0), b = random_interior(g, rng, kInf, 1.0);
    Eigen::VectorXd v(n);
    for (std::size_t j = 0; j < n; ++j) v(j) = b[j] - a[j];
    const double oracle = std::sqrt(g.h() * v.dot(pinv * v) / 3.0);
    EXPECT_NEAR(distance_frozen(a, a, b, c), oracle, 1e-10 * oracle);
    EXPECT_NEAR(distance_frozen(a, a, b, c), distance_frozen(a, b, a, c), 1e-14);
  }
  EXPECT_EQ(distance_frozen(Density::constant(g, 0.5), Density::constant(g, 0.5), Density::constant(g, 0.5), c), 0.0);
}

TEST(DistanceFrozen, MatchesDynamicForNearbyDensities) {
  const Grid g(16, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(7);
  const auto a = random_interior(g, rng, 1.0, 0.5, 0.3);
  CellField pert(g.n_cells());
  for (std::size_t j = 0; j < pert.size(); ++j) pert[j] = 1e-3 * std::cos(pi * g.center(j)) + 5e-4 * std::cos(3 * pi * g.center(j));
  Density b(g, a.values);
  for (std::size_t j = 0; j < pert.size(); ++j) b.values[j] += pert[j];
  const double dyn = distance_dynamic(a, b, 8, ch).value;
  const double fro = distance_frozen(a, a, b, ch);
  EXPECT_NEAR(dyn / fro, 1.0, 1e-2);
}

TEST(DistanceOracle, AgreesWithDynamicOnTinyInstances) {
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 6; ++t) {
    const Grid g(3 + t % 3, 1.0);
    const std::size_t K = 2 + t % 3;
    const auto a = random_interior(g, rng, 1.0, 0.5, 0.1), b = random_interior(g, rng, 1.0, 0.5, 0.1);
    EXPECT_NEAR(distance_oracle_small(a, b, K, ch), distance_dynamic(a, b, K, ch).value, 1e-6);
  }
  const Grid g(4, 1.0);
  const auto a = random_interior(g, rng, 1.0, 0.5);
  EXPECT_EQ(distance_oracle_small(a, a, 3, ch), 0.0);
  EXPECT_THROW(distance_oracle_small(Density::constant(Grid(6, 1.0), 0.5), Density::constant(Grid(6, 1.0), 0.5), 2, ch),
               Error);
}

// Refining the time grid does not nest the discrete paths: interpolating a
// coarse path between slices raises its action by convexity of 1/m. The value
// increases with K and settles at second order.
TEST(DistanceDynamic, TimeRefinementIncreasesValueAtSecondOrder) {
  const Grid g(8, 1.0);
  const ProblemSpec ch(mobility::quadratic(1.0), free_energy::zero(), 0.5, 1.0);
  std::mt19937_64 rng(9);
  const auto a = random_interior(g, rng, 1.0, 0.5, 0.0), b = random_interior(g, rng, 1.0, 0.5, 0.0);
  std::vector<double> w;
  for (std::size_t K : {1u, 2u, 4u, 8u, 16u}) w.push_back(distance_dynamic(a, b, K, ch).value);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_LE(w[i - 1], w[i] + 1e-10);
  EXPECT_GT((w[2] - w[1]) / (w[3] - w[2]), 3.0);
  EXPECT_GT((w[3] - w[2]) / (w[4] - w[3]), 3.0);
}
