#pragma once

// Minimizing-movement stepping u^{n+1} = argmin_v W(u^n, v)^2 / (2 tau) + E[v].

#include <cmath>
#include <random>
#include <vector>

#include "wmflow/functionals.hpp"
#include "wmflow/metric.hpp"

namespace wmflow {

struct JkoConfig {
  double tau = 1e-3;
  double T_final = 1e-3;
  MetricBackend backend = MetricBackend::dynamic();
  double eps_V = 0.0;  // entropy weight of the regularized test potential
  double delta = 0.0;  // mobility regularization, 0 = off

  void validate() const {
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
    if (!(T_final >= tau * (1.0 - 1e-12))) throw Error(ErrorKind::InvalidArgument, "T_final must be >= tau");
    if (backend.kind == MetricBackend::Kind::Dynamic && backend.K < 1)
      throw Error(ErrorKind::InvalidArgument, "dynamic backend needs K >= 1");
  }

  std::size_t steps() const {
    return static_cast<std::size_t>(std::ceil(T_final / tau - 1e-9));
  }
};

struct StepRecord {
  double W = 0.0;        // distance to the previous iterate (sqrt of the path action)
  EnergyValue energy;
  double entropy = 0.0;
  double psi = 0.0;      // W^2 / (2 tau) + E at the accepted iterate
  double psi_gain = 0.0; // Psi(u_next) - E[u_prev], <= 0 when certified
  bool certified = true;
  bool fallback = false; // solver output rejected, u_prev kept
  SolveStats solver;
};

struct StepResult {
  Density u_next;
  StepRecord record;
};

struct Trajectory {
  double tau = 0.0;
  std::vector<Density> iterates;  // u^0 ... u^N
  std::vector<StepRecord> records;  // records[0] describes u^0

  std::size_t steps() const { return iterates.empty() ? 0 : iterates.size() - 1; }
  double time(std::size_t n) const { return tau * static_cast<double>(n); }
  double T_final() const { return time(steps()); }

  /// Piecewise constant interpolant: u^n on ((n-1) tau, n tau], u^0 at t = 0.
  const Density& interpolant(double t) const {
    if (iterates.empty() || t < 0.0 || t > T_final() * (1.0 + 1e-12) + 1e-15)
      throw Error(ErrorKind::OutOfRange, "interpolant time outside [0, T]");
    if (t == 0.0) return iterates.front();
    auto n = static_cast<std::size_t>(std::ceil(t / tau - 1e-9));
    return iterates[std::min(std::max<std::size_t>(n, 1), steps())];
  }
};

inline ProblemSpec effective_spec(const ProblemSpec& spec, const JkoConfig& cfg) {
  if (cfg.delta <= 0.0) return spec;
  return spec.with_mobility(regularize_mobility(spec.mobility(), cfg.delta), false);
}

namespace detail {

inline StepRecord describe(const Density& u, const ProblemSpec& spec) {
  StepRecord r;
  r.energy = energy(u, spec);
  r.entropy = entropy_functional(u, spec);
  r.psi = r.energy.total;
  return r;
}

}  // namespace detail

/// One minimizing-movement step. The dynamic backend optimizes jointly over
/// the new density and the K-slice path; the frozen backend uses the metric
/// tensor at u_prev. An iterate that fails the descent certificate is
/// replaced by u_prev.
inline StepResult jko_step(const Density& u_prev, const JkoConfig& cfg, const ProblemSpec& spec) {
  cfg.validate();
  const Grid& g = u_prev.grid;
  const double M = spec.ceiling(), mass = u_prev.mass(), mean = mass / g.length();
  const auto E_prev = energy(u_prev, spec);
  if (!std::isfinite(E_prev.total)) throw Error(ErrorKind::InvalidArgument, "u_prev has infinite energy");

  const bool dynamic = cfg.backend.kind == MetricBackend::Kind::Dynamic;
  const std::size_t K = dynamic ? cfg.backend.K : 1;
  detail::PathProgram p(g, spec.mobility(), M, K);
  bool edge = false;
  for (double x : u_prev.values) edge |= !(x > 0.0 && x < M);
  const auto start = detail::lifted(u_prev.values, mean, edge ? cfg.backend.solver.lift : 0.0);
  p.set_slice(0, u_prev.values);
  for (std::size_t k = 1; k <= K; ++k) p.set_slice(k, start);
  p.pin_mass(mass);
  p.set_variables(1, K);
  p.set_action_weight(1.0 / (2.0 * cfg.tau));
  p.set_energy(&spec.energy());
  if (!dynamic) p.set_frozen_weights(frozen_face_weights(u_prev, spec.mobility(), spec.s0()));

  StepResult res{u_prev, detail::describe(u_prev, spec)};
  StepRecord& rec = res.record;
  rec.solver = p.solve(cfg.backend.solver);

  Density v(g, p.slice(K));
  const double action = p.action();
  const double gain = action / (2.0 * cfg.tau) + energy_difference(u_prev, v, spec);
  const auto E_v = energy(v, spec);
  const bool descent = std::isfinite(action) && gain <= 0.0 && E_v.total <= E_prev.total;
  if (!descent) {
    rec.fallback = true;
    rec.certified = true;  // v = u_prev has Psi = E[u_prev]
    return res;
  }
  res.u_next = std::move(v);
  rec.W = std::sqrt(action);
  rec.energy = E_v;
  rec.entropy = entropy_functional(res.u_next, spec);
  rec.psi = action / (2.0 * cfg.tau) + E_v.total;
  rec.psi_gain = gain;
  return res;
}

/// N = ceil(T_final / tau) steps from u0.
inline Trajectory run(const Density& u0, const JkoConfig& cfg, const ProblemSpec& spec) {
  cfg.validate();
  if (!is_admissible(u0, spec.ceiling(), u0.mass()))
    throw Error(ErrorKind::InvalidArgument, "initial density is not admissible");
  const ProblemSpec s = effective_spec(spec, cfg);
  Trajectory tr;
  tr.tau = cfg.tau;
  tr.iterates.push_back(u0);
  tr.records.push_back(detail::describe(u0, s));
  if (!std::isfinite(tr.records.back().energy.total))
    throw Error(ErrorKind::InvalidArgument, "initial density has infinite energy");
  const std::size_t N = cfg.steps();
  for (std::size_t n = 0; n < N; ++n) {
    auto step = jko_step(tr.iterates.back(), cfg, s);
    tr.iterates.push_back(std::move(step.u_next));
    tr.records.push_back(step.record);
  }
  return tr;
}

/// E_N + (1/(2 tau)) sum_{n<=N} W_n^2 <= E_0 for every prefix; the report
/// carries the worst prefix.
inline CheckReport energy_estimate_check(const Trajectory& tr, double rel_tol = 1e-8) {
  const double E0 = tr.records.front().energy.total;
  double acc = 0.0, worst_slack = kInf, worst_lhs = E0;
  std::size_t worst = 0;
  for (std::size_t n = 1; n < tr.records.size(); ++n) {
    acc += tr.records[n].W * tr.records[n].W / (2.0 * tr.tau);
    const double lhs = tr.records[n].energy.total + acc;
    if (E0 - lhs < worst_slack) {
      worst_slack = E0 - lhs;
      worst_lhs = lhs;
      worst = n;
    }
  }
  auto r = CheckReport::make("energy_estimate", worst_lhs, E0, rel_tol * (1.0 + std::abs(E0)));
  r.context["step"] = static_cast<double>(worst);
  return r;
}

/// W(u^i, u^j) <= sqrt(2 (E_0 - E_min)) |t_i - t_j|^(1/2) on random pairs of
/// step times, W by the dynamic backend.
inline std::vector<CheckReport> holder_certificate(const Trajectory& tr, const ProblemSpec& spec, std::size_t pairs,
                                                   std::size_t K = 8, unsigned seed = 11, double tol = 1e-6) {
  std::vector<CheckReport> out;
  if (tr.steps() == 0) return out;
  double Emin = kInf;
  for (const auto& r : tr.records) Emin = std::min(Emin, r.energy.total);
  const double c = std::sqrt(2.0 * std::max(tr.records.front().energy.total - Emin, 0.0));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, tr.steps());
  for (std::size_t i = 0; i < pairs; ++i) {
    std::size_t a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    if (a > b) std::swap(a, b);
    const double W = distance_dynamic(tr.iterates[a], tr.iterates[b], K, spec).value;
    auto r = CheckReport::make("holder", W, c * std::sqrt(tr.time(b) - tr.time(a)), tol);
    r.context["i"] = static_cast<double>(a);
    r.context["j"] = static_cast<double>(b);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace wmflow
