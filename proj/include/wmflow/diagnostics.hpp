#pragma once

// Runtime checks of the inequalities behind the existence theory, evaluated on
// discrete iterates and flows.

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "wmflow/flows.hpp"
#include "wmflow/functionals.hpp"
#include "wmflow/jko.hpp"
#include "wmflow/report.hpp"

namespace wmflow {

namespace detail {

inline CheckReport equality_report(std::string name, double lhs, double rhs, double tol) {
  auto r = CheckReport::make(std::move(name), lhs, rhs, tol);
  r.passed = std::abs(rhs - lhs) <= tol;
  r.status = r.passed ? CheckStatus::Pass : CheckStatus::Fail;
  return r;
}

}  // namespace detail

/// int |D^2 u|^2 against int (Delta u)^2. In one dimension the Hessian is the
/// second difference of the face gradient, so both sides agree.
inline CheckReport check_laplace_bounds(const Density& u, double rel_tol = 1e-10) {
  const Grid& g = u.grid;
  const auto Du = gradient_face(u);
  CellField hess(g.n_cells());
  for (std::size_t j = 0; j < hess.size(); ++j) hess[j] = (Du[j + 1] - Du[j]) / g.h();
  const auto lap = laplacian_neumann(u);
  const double lhs = inner(g, hess, hess), rhs = inner(g, lap, lap);
  return detail::equality_report("laplace_bounds", lhs, rhs, rel_tol * (1.0 + lhs));
}

/// 16 int |D sqrt(u)|^4 <= 9 int (Delta u)^2.
inline CheckReport check_lions_villani(const Density& u, double rel_tol = 1e-8) {
  const Grid& g = u.grid;
  CellField r(g.n_cells());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = std::sqrt(std::max(u[j], 0.0));
  double q = 0.0;
  for (std::size_t f = 1; f < g.n_cells(); ++f) {
    if (u[f - 1] <= 0.0 && u[f] <= 0.0) continue;
    const double d = (r[f] - r[f - 1]) / g.h();
    q += d * d * d * d;
  }
  const auto lap = laplacian_neumann(u);
  const double lhs = 16.0 * g.h() * q, rhs = 9.0 * inner(g, lap, lap);
  return CheckReport::make("lions_villani", lhs, rhs, rel_tol * (1.0 + rhs));
}

/// E[u + d] - E[u] evaluated from the increment d, free of cancellation.
inline double energy_increment(const Density& u, std::span<const double> d, const ProblemSpec& spec) {
  const Grid& g = u.grid;
  const double h = g.h();
  double dir = 0.0;
  for (std::size_t f = 1; f < g.n_cells(); ++f) {
    const double du = (u[f] - u[f - 1]) / h, dd = (d[f] - d[f - 1]) / h;
    dir += du * dd + 0.5 * dd * dd;
  }
  double pot = 0.0;
  const auto& G = spec.energy();
  for (std::size_t j = 0; j < g.n_cells(); ++j) {
    if (d[j] == 0.0) continue;
    pot += d[j] * boost::math::quadrature::gauss<double, 10>::integrate(
                      [&](double t) { return G.d1(u[j] + t * d[j]); }, 0.0, 1.0);
  }
  return h * (dir + pot);
}

/// Quotients (E[S^s u] - E[u]) / s along the implicit heat flow for each s.
inline std::vector<double> heat_quotients(const Density& u, const ProblemSpec& spec, const std::vector<double>& ladder) {
  const auto lap = laplacian_neumann(u);
  std::vector<double> q;
  for (double s : ladder) {
    // (I - s Delta) v = u  <=>  (I - s Delta)(v - u) = s Delta u
    CellField rhs(lap.size());
    for (std::size_t j = 0; j < rhs.size(); ++j) rhs[j] = s * lap[j];
    const auto d = detail::implicit_diffusion(u.grid, rhs, s);
    q.push_back(energy_increment(u, d, spec) / s);
  }
  return q;
}

/// Flow interchange with the heat flow as the entropy's gradient flow:
/// U[u^n] - U[u^{n-1}] <= tau * lim (E[S^s u^n] - E[u^n]) / s. The limit is a
/// Richardson extrapolation over s = tau * {1e-2, ..., 1e-6}; a non-monotone
/// quotient ladder makes the check inconclusive.
inline CheckReport check_flow_interchange(const Density& u_prev, const Density& u, double tau, const ProblemSpec& spec,
                                          double tol = 1e-6) {
  std::vector<double> ladder;
  for (double f : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) ladder.push_back(f * tau);
  const auto q = heat_quotients(u, spec, ladder);
  const double r = ladder[ladder.size() - 2] / ladder.back();
  const double limit = (r * q.back() - q[q.size() - 2]) / (r - 1.0);
  const double dU = entropy_difference(u_prev, u, spec);
  auto rep = CheckReport::make("flow_interchange", dU, tau * limit, tol);
  rep.context["quotient_limit"] = limit;
  bool up = true, down = true;
  for (std::size_t i = 1; i < q.size(); ++i) {
    up &= q[i] >= q[i - 1];
    down &= q[i] <= q[i - 1];
  }
  bool interior = true;
  for (double x : u.values) interior &= (x > 0.0 && x < spec.ceiling());
  if (interior) rep.context["analytic_rate"] = heat_dissipation_rate(u, spec).rate;
  if (!(up || down) && !rep.passed) rep.status = CheckStatus::Inconclusive;
  return rep;
}

/// Per-step reports over a trajectory.
inline std::vector<CheckReport> check_flow_interchange(const Trajectory& tr, const ProblemSpec& spec, double tol = 1e-6) {
  std::vector<CheckReport> out;
  for (std::size_t n = 1; n < tr.iterates.size(); ++n) {
    auto r = check_flow_interchange(tr.iterates[n - 1], tr.iterates[n], tr.tau, spec, tol);
    r.context["step"] = static_cast<double>(n);
    out.push_back(std::move(r));
  }
  return out;
}

/// Smooth bump supported on (a, b) with its derivative.
struct TimeTest {
  std::function<double(double)> psi, dpsi;

  static TimeTest zero() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; }};
  }
  static TimeTest bump(double a, double b) {
    const double c = 0.5 * (a + b), w = 0.5 * (b - a);
    auto psi = [=](double t) {
      const double z = (t - c) / w;
      return std::abs(z) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z * z)) : 0.0;
    };
    auto dpsi = [=](double t) {
      const double z = (t - c) / w;
      if (std::abs(z) >= 1.0) return 0.0;
      const double s = 1.0 - z * z;
      return std::exp(1.0 - 1.0 / s) * (-2.0 * z / (s * s)) / w;
    };
    return {psi, dpsi};
  }
};

/// |-int psi' V[u] dt - int psi N[u, V] dt| by the trapezoid rule at the step
/// times of the piecewise constant interpolant.
inline CheckReport check_weak_residual(const Trajectory& tr, const TimeTest& psi, const TestPotential& V,
                                       const ProblemSpec& spec, double tol = kInf) {
  double lhs = 0.0, rhs = 0.0;
  const std::size_t N = tr.steps();
  for (std::size_t n = 0; n <= N; ++n) {
    const double w = (n == 0 || n == N) ? 0.5 * tr.tau : tr.tau;
    const double t = tr.time(n);
    const auto& u = tr.iterates[n];
    if (const double dp = psi.dpsi(t); dp != 0.0) lhs -= w * dp * potential_functional(u, V);
    if (const double p = psi.psi(t); p != 0.0) rhs += w * p * weak_form_N(u, V, spec);
  }
  auto r = detail::equality_report("weak_residual", lhs, rhs, tol);
  r.context["residual"] = std::abs(lhs - rhs);
  return r;
}

/// (tau/2) ||Delta u^n||^2 <= U[u^{n-1}] - U[u^n] + C tau (E0 + E[u^n]) per
/// step, with E normalized and C the explicit heat-flow constant.
inline std::vector<CheckReport> check_entropy_dissipation(const Trajectory& tr, const ProblemSpec& spec,
                                                          double rel_tol = 1e-8) {
  const auto k = estimate_constants(spec);
  std::vector<CheckReport> out;
  for (std::size_t n = 1; n < tr.iterates.size(); ++n) {
    const auto& u = tr.iterates[n];
    const auto lap = laplacian_neumann(u);
    const double lhs = 0.5 * tr.tau * inner(u.grid, lap, lap);
    const double drop = -entropy_difference(tr.iterates[n - 1], u, spec);
    const double budget = k.C_heat * tr.tau * (k.E0 + normalized_energy(u, spec));
    auto r = CheckReport::make("entropy_dissipation", lhs, drop + budget, rel_tol * (1.0 + std::abs(drop + budget)));
    r.context["step"] = static_cast<double>(n);
    r.context["C"] = k.C_heat;
    r.context["E0"] = k.E0;
    out.push_back(std::move(r));
  }
  return out;
}

inline double h2_norm_squared(const Density& u) {
  const Grid& g = u.grid;
  const auto lap = laplacian_neumann(u);
  return inner(g, u.values, u.values) + 2.0 * dirichlet_energy(g, u.values) + inner(g, lap, lap);
}

/// tau sum_{n>=1} ||u^n||_{H^2}^2.
inline double h2_budget(const Trajectory& tr) {
  double s = 0.0;
  for (std::size_t n = 1; n < tr.iterates.size(); ++n) s += h2_norm_squared(tr.iterates[n]);
  return tr.tau * s;
}

/// Summed entropy estimate with U >= 0 dropped at the end:
/// budget <= 2 U[u^0] + 2 C tau sum (E0 + E[u^n]) + tau sum (||u^n||^2 + ||Du^n||^2).
inline CheckReport check_h2_budget(const Trajectory& tr, const ProblemSpec& spec, double rel_tol = 1e-8) {
  const auto k = estimate_constants(spec);
  double lower = 0.0, extra = 0.0;
  for (std::size_t n = 1; n < tr.iterates.size(); ++n) {
    const auto& u = tr.iterates[n];
    lower += normalized_energy(u, spec) + k.E0;
    extra += inner(u.grid, u.values, u.values) + 2.0 * dirichlet_energy(u.grid, u.values);
  }
  const double rhs = 2.0 * tr.records.front().entropy + 2.0 * k.C_heat * tr.tau * lower + tr.tau * extra;
  auto r = CheckReport::make("h2_budget", h2_budget(tr), rhs, rel_tol * (1.0 + rhs));
  r.context["C"] = k.C_heat;
  return r;
}

}  // namespace wmflow
