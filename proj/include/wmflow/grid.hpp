#pragma once

// Uniform cell-centered discretization of (0, L) with homogeneous Neumann
// calculus. Cell j covers [j h, (j+1) h]; face f sits at f h, faces 0 and n
// are the boundary and always carry zero flux.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "wmflow/errors.hpp"

namespace wmflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using CellField = std::vector<double>;
using FaceField = std::vector<double>;

class Grid {
 public:
  Grid(std::size_t n_cells, double length) : n_(n_cells), length_(length) {
    if (n_cells < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least 2 cells");
    if (!(length > 0.0) || !std::isfinite(length))
      throw Error(ErrorKind::InvalidArgument, "grid length must be positive and finite");
    h_ = length / static_cast<double>(n_cells);
  }

  std::size_t n_cells() const noexcept { return n_; }
  std::size_t n_faces() const noexcept { return n_ + 1; }
  double length() const noexcept { return length_; }
  double h() const noexcept { return h_; }

  double center(std::size_t j) const noexcept { return (static_cast<double>(j) + 0.5) * h_; }
  double face(std::size_t f) const noexcept { return static_cast<double>(f) * h_; }

  CellField centers() const {
    CellField x(n_);
    for (std::size_t j = 0; j < n_; ++j) x[j] = center(j);
    return x;
  }

  bool operator==(const Grid& other) const noexcept {
    return n_ == other.n_ && length_ == other.length_;
  }

 private:
  std::size_t n_;
  double length_;
  double h_;
};

/// Cell averages of a density on a grid. Box and mass constraints are not
/// enforced here; use `is_admissible` or `project_admissible`.
struct Density {
  Grid grid;
  CellField values;

  Density(Grid g, CellField v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n_cells())
      throw Error(ErrorKind::InvalidArgument, "density size does not match grid");
  }

  static Density constant(const Grid& g, double c) { return Density(g, CellField(g.n_cells(), c)); }

  template <class F>
  static Density sample(const Grid& g, F&& f) {
    CellField v(g.n_cells());
    for (std::size_t j = 0; j < g.n_cells(); ++j) v[j] = f(g.center(j));
    return Density(g, std::move(v));
  }

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t j) const noexcept { return values[j]; }

  double mass() const noexcept {
    return grid.h() * std::accumulate(values.begin(), values.end(), 0.0);
  }

  double min() const { return *std::min_element(values.begin(), values.end()); }
  double max() const { return *std::max_element(values.begin(), values.end()); }
};

inline double cell_sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

/// Discrete L2 inner product h * sum a_j b_j.
inline double inner(const Grid& g, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return g.h() * s;
}

inline double norm_l2(const Grid& g, std::span<const double> a) { return std::sqrt(inner(g, a, a)); }

/// Face-weighted inner product h * sum over interior faces.
inline double face_inner(const Grid& g, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t f = 1; f + 1 < a.size(); ++f) s += a[f] * b[f];
  return g.h() * s;
}

inline FaceField gradient_face(const Grid& g, std::span<const double> u) {
  const std::size_t n = g.n_cells();
  FaceField out(n + 1, 0.0);
  for (std::size_t f = 1; f < n; ++f) out[f] = (u[f] - u[f - 1]) / g.h();
  return out;
}

inline FaceField gradient_face(const Density& u) { return gradient_face(u.grid, u.values); }

/// div_h of a face field; boundary face values are ignored (treated as 0).
inline CellField divergence(const Grid& g, std::span<const double> q) {
  const std::size_t n = g.n_cells();
  CellField out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double right = (j + 1 < n) ? q[j + 1] : 0.0;
    const double left = (j > 0) ? q[j] : 0.0;
    out[j] = (right - left) / g.h();
  }
  return out;
}

inline CellField laplacian_neumann(const Grid& g, std::span<const double> u) {
  return divergence(g, gradient_face(g, u));
}

inline CellField laplacian_neumann(const Density& u) { return laplacian_neumann(u.grid, u.values); }

/// Arithmetic mean of adjacent cells at interior faces, boundary faces copy
/// the adjacent cell.
inline FaceField face_average(const Grid& g, std::span<const double> u) {
  const std::size_t n = g.n_cells();
  FaceField out(n + 1);
  out[0] = u[0];
  out[n] = u[n - 1];
  for (std::size_t f = 1; f < n; ++f) out[f] = 0.5 * (u[f - 1] + u[f]);
  return out;
}

namespace detail {

/// Thomas algorithm for a tridiagonal system with sub-diagonal a (a[0]
/// unused), diagonal b, super-diagonal c (c[n-1] unused).
inline std::vector<double> solve_tridiagonal(std::vector<double> a, std::vector<double> b,
                                             std::vector<double> c, std::vector<double> d) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (b[i - 1] == 0.0) throw Error(ErrorKind::LinearSolveFailure, "zero pivot in tridiagonal solve");
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  if (b[n - 1] == 0.0) throw Error(ErrorKind::LinearSolveFailure, "zero pivot in tridiagonal solve");
  std::vector<double> x(n);
  x[n - 1] = d[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

}  // namespace detail

/// Solves div_h(weight * grad_h phi) = -w with zero boundary flux.
/// The returned potential has zero mean.
inline CellField neumann_solve(const Grid& g, std::span<const double> w, std::span<const double> weight) {
  const std::size_t n = g.n_cells();
  if (w.size() != n || weight.size() != n + 1)
    throw Error(ErrorKind::InvalidArgument, "neumann_solve: size mismatch");
  double total = 0.0, scale = 0.0;
  for (double x : w) {
    total += x;
    scale += std::abs(x);
  }
  if (std::abs(g.h() * total) > 1e-10 * std::max(1.0, g.h() * scale))
    throw Error(ErrorKind::IncompatibleRhs, "right-hand side has nonzero mass");
  for (std::size_t f = 1; f < n; ++f)
    if (!(weight[f] > 0.0)) throw Error(ErrorKind::SingularWeight, "interior face weight must be positive");

  // Rows 1..n-1 of -h^2 * div(weight grad .) with phi_0 pinned to zero; the
  // dropped row 0 holds by compatibility.
  const std::size_t m = n - 1;
  std::vector<double> a(m, 0.0), b(m, 0.0), c(m, 0.0), d(m, 0.0);
  const double h2 = g.h() * g.h();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + 1;
    const double wl = weight[j];
    const double wr = (j + 1 < n) ? weight[j + 1] : 0.0;
    b[i] = wl + wr;
    if (i > 0) a[i] = -wl;
    if (i + 1 < m) c[i] = -wr;
    d[i] = h2 * w[j];
  }
  const auto sol = detail::solve_tridiagonal(a, b, c, d);
  CellField phi(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) phi[i + 1] = sol[i];
  const double mean = cell_sum(phi) / static_cast<double>(n);
  for (double& x : phi) x -= mean;
  return phi;
}

/// Euclidean projection onto {0 <= u <= M, h sum u = mass}; `ceiling` may be
/// +infinity.
inline Density project_admissible(const Grid& g, std::span<const double> v, double ceiling, double mass) {
  const std::size_t n = g.n_cells();
  const double h = g.h();
  if (v.size() != n) throw Error(ErrorKind::InvalidArgument, "project_admissible: size mismatch");
  if (!(mass >= 0.0)) throw Error(ErrorKind::InfeasibleConstraint, "mass must be non-negative");
  const bool bounded = std::isfinite(ceiling);
  if (bounded && mass > ceiling * g.length() * (1.0 + 1e-14))
    throw Error(ErrorKind::InfeasibleConstraint, "mass exceeds ceiling * length");

  auto clamp = [&](double x) { return std::clamp(x, 0.0, ceiling); };
  auto mass_at = [&](double lambda) {
    double s = 0.0;
    for (double x : v) s += clamp(x + lambda);
    return h * s;
  };

  const auto [vmin_it, vmax_it] = std::minmax_element(v.begin(), v.end());
  double lo = -*vmax_it;
  double hi = bounded ? ceiling - *vmin_it : mass / g.length() - *vmin_it;
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mass_at(mid) < mass) lo = mid;
    else hi = mid;
  }
  CellField u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = clamp(v[j] + 0.5 * (lo + hi));

  // Bisection leaves an O(eps) mass defect; spread it over the free cells.
  for (int pass = 0; pass < 4; ++pass) {
    const double defect = mass - h * cell_sum(u);
    if (std::abs(defect) <= 1e-15 * std::max(mass, 1e-300)) break;
    std::size_t free = 0;
    for (double x : u)
      if (x > 0.0 && x < ceiling) ++free;
    if (free == 0) break;
    const double shift = defect / (h * static_cast<double>(free));
    for (double& x : u)
      if (x > 0.0 && x < ceiling) x = clamp(x + shift);
  }
  return Density(g, std::move(u));
}

inline Density project_admissible(const Density& v, double ceiling, double mass) {
  return project_admissible(v.grid, v.values, ceiling, mass);
}

/// Box and mass membership test with the tolerances of the admissible set.
inline bool is_admissible(const Density& u, double ceiling, double mass, double rel_mass_tol = 1e-12) {
  for (double x : u.values)
    if (!(x >= 0.0) || x > ceiling) return false;
  return std::abs(u.mass() - mass) <= rel_mass_tol * std::max(mass, 1e-300);
}

}  // namespace wmflow
