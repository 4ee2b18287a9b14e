#pragma once

// Auxiliary flows: the Neumann heat semigroup, the viscous conservation law
// d_s v = div(m(v) DV) + eps Delta v, and a classical semi-implicit solver for
// d_t u = -div(m(u) D Delta u) + Delta P(u) used as an independent oracle.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>

#include "wmflow/functionals.hpp"
#include "wmflow/jko.hpp"

namespace wmflow {

namespace detail {

// (I - c Delta_h) x = rhs with zero-flux boundaries.
inline CellField implicit_diffusion(const Grid& g, std::span<const double> rhs, double c) {
  const std::size_t n = g.n_cells();
  const double r = c / (g.h() * g.h());
  std::vector<double> a(n, -r), b(n, 1.0 + 2.0 * r), cc(n, -r), d(rhs.begin(), rhs.end());
  b.front() = 1.0 + r;
  b.back() = 1.0 + r;
  a.front() = 0.0;
  cc.back() = 0.0;
  return solve_tridiagonal(a, b, cc, d);
}

}  // namespace detail

/// Implicit Euler step (I - ds Delta_h) v_next = v.
inline Density heat_step(const Density& v, double ds) {
  if (!(ds > 0.0)) throw Error(ErrorKind::InvalidArgument, "heat_step needs ds > 0");
  return Density(v.grid, detail::implicit_diffusion(v.grid, v.values, ds));
}

struct DissipationRate {
  double rate = 0.0;
  double h2_term = 0.0;  // -||Delta_h v||^2
  double g_term = 0.0;   // -h sum D(G'(v)) Dv, the discrete -int G''(v)|Dv|^2
};

/// d/ds E[v(s)] at s = 0 along the semi-discrete heat flow d_s v = Delta_h v.
inline DissipationRate heat_dissipation_rate(const Density& v, const ProblemSpec& spec) {
  for (double x : v.values)
    if (!(x > 0.0 && x < spec.ceiling())) throw Error(ErrorKind::DegenerateState, "state touches 0 or M");
  const Grid& g = v.grid;
  const auto lap = laplacian_neumann(v);
  DissipationRate r;
  r.h2_term = -inner(g, lap, lap);
  CellField dG(g.n_cells());
  for (std::size_t j = 0; j < dG.size(); ++j) dG[j] = spec.energy().d1(v[j]);
  r.g_term = -face_inner(g, gradient_face(g, dG), gradient_face(v));
  r.rate = r.h2_term + r.g_term;
  return r;
}

/// Face mobility (v_R - v_L) / (U'(v_R) - U'(v_L)); it makes the discrete
/// stationary states U'(v) + V / eps = const exact.
inline FaceField entropic_face_mobility(const Density& v, const ProblemSpec& spec) {
  const Grid& g = v.grid;
  const auto& U = spec.entropy();
  const auto& m = spec.mobility();
  FaceField mf(g.n_faces(), 0.0);
  for (std::size_t f = 1; f < g.n_cells(); ++f) {
    const double a = v[f - 1], b = v[f];
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    if (std::abs(b - a) <= 1e-9 * scale) {
      mf[f] = std::max(m(0.5 * (a + b)), 0.0);
      continue;
    }
    const double dU = U.d1(b) - U.d1(a);
    mf[f] = std::isfinite(dU) && dU != 0.0 ? std::max((b - a) / dU, 0.0) : 0.0;
  }
  return mf;
}

/// Time-split step: explicit transport div(m DV), then implicit eps Delta.
inline Density viscous_claw_step(const Density& v, const TestPotential& V, double eps, double ds,
                                 const ProblemSpec& spec) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "viscous_claw_step needs eps > 0");
  const Grid& g = v.grid;
  const double limit = g.h() * g.h() * std::min(1.0 / eps, 1.0) / 4.0;
  if (!(ds > 0.0) || ds > limit)
    throw Error(ErrorKind::CflViolation, "ds=" + std::to_string(ds) + " exceeds " + std::to_string(limit));
  const auto mf = entropic_face_mobility(v, spec);
  FaceField flux(g.n_faces(), 0.0);
  for (std::size_t f = 1; f < g.n_cells(); ++f) flux[f] = mf[f] * V.grad[f];
  const auto div = divergence(g, flux);
  CellField star(g.n_cells());
  for (std::size_t j = 0; j < star.size(); ++j) star[j] = v[j] + ds * div[j];
  return Density(g, detail::implicit_diffusion(g, star, eps * ds));
}

/// Stationary profile of the viscous flow: U'(v) = c - V / eps, solved cell
/// by cell by bisection on the increasing function U'.
inline Density stationary_claw_profile(const TestPotential& V, double eps, double c, const ProblemSpec& spec) {
  const auto& U = spec.entropy();
  const double M = spec.ceiling();
  CellField out(V.V.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double target = c - V.V[j] / eps;
    double lo = 1e-300, hi = std::isfinite(M) ? M : 1.0;
    if (!std::isfinite(M))
      while (U.d1(hi) < target) hi *= 2.0;
    if (std::isfinite(M)) hi = std::nextafter(M, 0.0);
    out[j] = quad::bisect_root([&](double s) { return U.d1(s) - target; }, lo, hi);
  }
  return Density(V.grid, std::move(out));
}

struct DirectSolveOptions {
  std::size_t record_every = 1;
};

/// Semi-implicit scheme (I + tau div(mhat D Delta_h)) u^{k+1} = u^k + tau Delta_h P(u^k)
/// with mhat = m(face average of u^k). Throws PositivityLossError when an
/// iterate leaves [0, M].
inline Trajectory direct_pde_solve(const Density& u0, const ProblemSpec& spec, double tau, double T,
                                   const DirectSolveOptions& opt = {}) {
  if (!(tau > 0.0) || !(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau and T must be positive");
  const Grid& g = u0.grid;
  const std::size_t n = g.n_cells();
  const double h = g.h(), M = spec.ceiling();
  for (double x : u0.values)
    if (!(x > 0.0 && x < M)) throw Error(ErrorKind::InvalidArgument, "direct solver needs u0 strictly inside (0, M)");

  Trajectory tr;
  tr.tau = tau * static_cast<double>(opt.record_every);
  tr.iterates.push_back(u0);
  tr.records.push_back(detail::describe(u0, spec));

  // Delta_h as a sparse matrix
  Eigen::SparseMatrix<double> lap(n, n);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t j = 0; j < n; ++j) {
      const int i = static_cast<int>(j);
      if (j > 0) {
        t.emplace_back(i, i - 1, 1.0 / (h * h));
        t.emplace_back(i, i, -1.0 / (h * h));
      }
      if (j + 1 < n) {
        t.emplace_back(i, i + 1, 1.0 / (h * h));
        t.emplace_back(i, i, -1.0 / (h * h));
      }
    }
    lap.setFromTriplets(t.begin(), t.end());
  }
  Eigen::SparseMatrix<double> I(n, n);
  I.setIdentity();

  const auto N = static_cast<std::size_t>(std::ceil(T / tau - 1e-9));
  Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(u0.values.data(), static_cast<int>(n));
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  for (std::size_t k = 1; k <= N; ++k) {
    // div(mhat D .) as a sparse matrix
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t f = 1; f < n; ++f) {
      const double w = spec.mobility()(0.5 * (u(f - 1) + u(f))) / (h * h);
      const int a = static_cast<int>(f - 1), b = static_cast<int>(f);
      t.emplace_back(a, a, -w);
      t.emplace_back(a, b, w);
      t.emplace_back(b, b, -w);
      t.emplace_back(b, a, w);
    }
    Eigen::SparseMatrix<double> divm(n, n);
    divm.setFromTriplets(t.begin(), t.end());
    Eigen::SparseMatrix<double> A = I + tau * (divm * lap);
    Eigen::VectorXd P(n);
    for (std::size_t j = 0; j < n; ++j) P(j) = spec.pressure(u(j));
    const Eigen::VectorXd rhs = u + tau * (lap * P);
    if (!analyzed) {
      lu.analyzePattern(A);
      analyzed = true;
    }
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, "sparse LU failed");
    u = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !u.allFinite()) throw Error(ErrorKind::LinearSolveFailure, "sparse solve failed");
    const double lo = u.minCoeff(), hi = u.maxCoeff();
    if (lo < 0.0) throw PositivityLossError(tau * static_cast<double>(k), k, lo);
    if (hi > M) throw PositivityLossError(tau * static_cast<double>(k), k, hi);
    if (k % opt.record_every == 0 || k == N) {
      Density d(g, CellField(u.data(), u.data() + n));
      tr.records.push_back(detail::describe(d, spec));
      tr.iterates.push_back(std::move(d));
    }
  }
  return tr;
}

}  // namespace wmflow
