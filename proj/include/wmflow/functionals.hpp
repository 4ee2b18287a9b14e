#pragma once

// Discrete energy, entropy and potential functionals on a grid, plus the
// explicit constants of the a priori estimates.

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>
#include <span>

#include "wmflow/grid.hpp"
#include "wmflow/physics/problem.hpp"
#include "wmflow/report.hpp"

namespace wmflow {

struct EnergyValue {
  double dirichlet = 0.0;
  double potential = 0.0;
  double total = 0.0;
};

inline double dirichlet_energy(const Grid& g, std::span<const double> u) {
  const double h = g.h();
  double s = 0.0;
  for (std::size_t f = 1; f < g.n_cells(); ++f) {
    const double d = (u[f] - u[f - 1]) / h;
    s += d * d;
  }
  return 0.5 * h * s;
}

/// E[u] = (h/2) sum |Du|^2 + h sum G(u). Returns +inf components when u leaves
/// [0, M] or G is not finite.
inline EnergyValue energy(const Density& u, const ProblemSpec& spec) {
  EnergyValue e;
  e.dirichlet = dirichlet_energy(u.grid, u.values);
  const double M = spec.ceiling();
  double p = 0.0;
  for (double x : u.values) {
    if (!(x >= 0.0 && x <= M)) {
      p = kInf;
      break;
    }
    p += spec.energy()(x);
  }
  e.potential = std::isfinite(p) ? u.grid.h() * p : kInf;
  e.total = e.dirichlet + e.potential;
  return e;
}

/// Energy with the potential normalized so that G(s0) = G'(s0) = 0; differs
/// from `energy` by the constant L G(s0) on admissible densities.
inline double normalized_energy(const Density& u, const ProblemSpec& spec) {
  return energy(u, spec).total - spec.length() * spec.energy()(spec.s0());
}

inline double entropy_functional(const Density& u, const ProblemSpec& spec) {
  const auto& U = spec.entropy();
  double s = 0.0;
  for (double x : u.values) s += U.value(x);
  return u.grid.h() * s;
}

namespace detail {

// G(b) - G(a) as the integral of G' along the segment, free of cancellation.
template <class Fn>
double segment_difference(Fn&& dphi, double a, double b) {
  if (a == b) return 0.0;
  const double d = b - a;
  return d * boost::math::quadrature::gauss<double, 10>::integrate([&](double t) { return dphi(a + t * d); }, 0.0, 1.0);
}

}  // namespace detail

/// E[v] - E[u] without the cancellation of subtracting two totals.
inline double energy_difference(const Density& u, const Density& v, const ProblemSpec& spec) {
  const Grid& g = u.grid;
  const double h = g.h();
  double dir = 0.0;
  for (std::size_t f = 1; f < g.n_cells(); ++f) {
    const double du = (u[f] - u[f - 1]) / h, dv = (v[f] - v[f - 1]) / h;
    dir += (dv - du) * (dv + du);
  }
  double pot = 0.0;
  const auto& G = spec.energy();
  for (std::size_t j = 0; j < g.n_cells(); ++j) {
    const double a = u[j], b = v[j];
    if (a == b) continue;
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (lo <= 0.0 || hi >= spec.ceiling()) pot += G(b) - G(a);
    else pot += detail::segment_difference([&](double s) { return G.d1(s); }, a, b);
  }
  return 0.5 * h * dir + h * pot;
}

/// U[v] - U[u], evaluated segment-wise through U' for closed-form entropies.
inline double entropy_difference(const Density& u, const Density& v, const ProblemSpec& spec) {
  const auto& U = spec.entropy();
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double a = u[j], b = v[j];
    if (a == b) continue;
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!U.closed_form() || lo <= 0.0 || hi >= spec.ceiling()) s += U.value(b) - U.value(a);
    else s += detail::segment_difference([&](double x) { return U.d1(x); }, a, b);
  }
  return u.grid.h() * s;
}

/// Samples of a smooth test potential V with zero normal derivative, plus
/// its discrete gradient and Laplacian.
struct TestPotential {
  Grid grid;
  CellField V;
  FaceField grad;
  CellField lap;

  TestPotential(const Grid& g, CellField values)
      : grid(g), V(std::move(values)), grad(gradient_face(g, V)), lap(laplacian_neumann(g, V)) {
    if (V.size() != g.n_cells()) throw Error(ErrorKind::InvalidArgument, "test potential size mismatch");
  }

  /// amplitude * cos(k pi x / L).
  static TestPotential cosine(const Grid& g, int k = 1, double amplitude = 1.0) {
    CellField v(g.n_cells());
    for (std::size_t j = 0; j < v.size(); ++j)
      v[j] = amplitude * std::cos(k * std::numbers::pi * g.center(j) / g.length());
    return TestPotential(g, std::move(v));
  }

  static TestPotential constant(const Grid& g, double c) { return TestPotential(g, CellField(g.n_cells(), c)); }
};

inline double potential_functional(const Density& u, const TestPotential& V) { return inner(u.grid, u.values, V.V); }

inline double regularized_potential(const Density& u, const TestPotential& V, double eps, const ProblemSpec& spec) {
  const double v = potential_functional(u, V);
  return eps == 0.0 ? v : v + eps * entropy_functional(u, spec);
}

/// N[u, V] = -int Delta u div(m(u) DV) + int P(u) Delta V with m at faces from
/// the arithmetic mean of adjacent cells.
inline double weak_form_N(const Density& u, const TestPotential& V, const ProblemSpec& spec) {
  const Grid& g = u.grid;
  const auto lap_u = laplacian_neumann(u);
  const auto ubar = face_average(g, u.values);
  FaceField flux(g.n_faces(), 0.0);
  for (std::size_t f = 1; f < g.n_cells(); ++f) flux[f] = spec.mobility()(ubar[f]) * V.grad[f];
  const auto div = divergence(g, flux);
  double a = 0.0, b = 0.0;
  for (std::size_t j = 0; j < g.n_cells(); ++j) {
    a += lap_u[j] * div[j];
    b += spec.pressure(u[j]) * V.lap[j];
  }
  return g.h() * (b - a);
}

/// Constants of the lower energy bound, the entropy bounds and the heat-flow
/// dissipation estimate, instantiated explicitly for a spec on (0, L).
struct EstimateConstants {
  double C1 = 2.0;            // Gagliardo-Nirenberg, d = 1
  double C2 = 0.0;            // sqrt(2 / L)
  double theta = 1.0 / 3.0;
  double C_conc = 0.0;        // G_conc >= -C_conc (1 + s^2)
  double E0 = 0.0;            // lower energy bound offset
  double C_entropy = 0.0;     // U[u] <= C_entropy (1 + ||u||^2)
  double C_entropy_energy = 0.0;  // U[u] <= C (E[u] + E0), normalized E
  double C_heat = 0.0;        // heat-flow dissipation constant
  double m0 = 0.0;            // m(s0)
  double s0 = 0.0;

  double C3(double eps) const { return std::pow(2.0 * C1 / eps, 1.0 / (1.0 - theta)) + C2; }
};

inline EstimateConstants estimate_constants(const ProblemSpec& spec) {
  EstimateConstants k;
  const double L = spec.length(), mass = spec.mass();
  const double M = spec.ceiling();
  k.C2 = std::sqrt(2.0 / L);
  k.s0 = spec.s0();
  k.m0 = spec.mobility()(k.s0);

  std::vector<double> samples;
  if (std::isfinite(M)) {
    for (int i = 0; i <= 400; ++i) samples.push_back(M * i / 400.0);
  } else {
    for (int i = 0; i <= 200; ++i) samples.push_back(4.0 * k.s0 * i / 200.0);
    for (double s = 4.0 * k.s0; s <= 1e4; s *= 1.25) samples.push_back(s);
  }
  for (double s : samples) {
    const double c = spec.split().conc(s);
    if (std::isfinite(c)) k.C_conc = std::max(k.C_conc, -c / (1.0 + s * s));
  }
  const double C = k.C_conc;
  const double tail = 0.25 * std::pow(k.C3(1.0 / std::sqrt(2.0)), 2) * mass * mass;
  if (C > 0.0) {
    const double c3 = k.C3(1.0 / (2.0 * std::sqrt(2.0 * C)));
    k.E0 = C * (L + 2.0 * c3 * c3 * mass * mass) + tail;
  } else {
    k.E0 = tail;
  }

  const double C0 = k.s0 * k.s0 / k.m0;
  const double CM = std::isfinite(M) ? (M - k.s0) * (M - k.s0) / k.m0 : 0.0;
  k.C_entropy = std::max(L * std::max(C0, CM), std::isfinite(M) ? 0.0 : 1.0 / (2.0 * k.m0));
  k.C_entropy_energy = k.C_entropy * (8.0 * L / (mass * mass) + 8.0);

  const double CG = spec.flags().C_G;
  const double energy_floor = mass * mass / (8.0 * L);  // E + E0 >= ||u||^2_{H^1} / 8
  if (std::isfinite(M)) {
    k.C_heat = 4.5 * L * std::pow(CG * M / k.m0, 2) / energy_floor;
  } else {
    k.C_heat = 4.5 * L * std::pow(CG * k.s0 / k.m0, 2) / energy_floor + 8.0 * CG * (1.0 + 1.0 / k.m0);
  }
  return k;
}

/// (1/8)||u||_{H^1}^2 + int G_conv(u) <= E[u] + E0 with the normalized energy.
inline CheckReport energy_lower_bound_check(const Density& u, const ProblemSpec& spec,
                                            const EstimateConstants& k, double tolerance = 1e-10) {
  const Grid& g = u.grid;
  const double l2 = inner(g, u.values, u.values);
  const double h1 = l2 + 2.0 * dirichlet_energy(g, u.values);
  double conv = 0.0;
  for (double x : u.values) conv += spec.split().conv(x);
  const double lhs = 0.125 * h1 + g.h() * conv;
  const double rhs = normalized_energy(u, spec) + k.E0;
  auto r = CheckReport::make("energy_lower_bound", lhs, rhs, tolerance);
  r.context["E0"] = k.E0;
  return r;
}

inline CheckReport energy_lower_bound_check(const Density& u, const ProblemSpec& spec) {
  return energy_lower_bound_check(u, spec, estimate_constants(spec));
}

}  // namespace wmflow
