#pragma once

// Weighted transport distance W_m between densities on a 1D grid.
//
// The dynamic backend works with cumulative masses F_{k,f} = h sum_{j<f} rho_{k,j}
// at faces, on K+1 time slices. The discrete continuity equation then holds
// identically with face momenta q_{k,f} = -K (F_{k+1,f} - F_{k,f}), so the
// action sum_{k,f} h K (F_{k+1,f} - F_{k,f})^2 / m(rhohat) is minimized without
// equality constraints. rhohat is the mean of the four (slice, cell) densities
// around a space-time face.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wmflow/grid.hpp"
#include "wmflow/physics/problem.hpp"

namespace wmflow {

struct PathSolverOptions {
  double mu_start = 1e-4;
  double mu_end = 1e-12;
  double mu_factor = 0.1;
  int max_newton = 400;
  double lift = 1e-8;  // interior slices lifted by lift * mean density
};

enum class SolveQuality { Converged, Stalled };

inline const char* to_string(SolveQuality q) { return q == SolveQuality::Converged ? "converged" : "stalled"; }

struct SolveStats {
  SolveQuality quality = SolveQuality::Converged;
  int newton_iterations = 0;
  double decrement = 0.0;  // Newton decrement at exit
  double mu = 0.0;         // barrier parameter at exit
};

struct TransportPlanPath {
  std::vector<CellField> rho;       // K + 1 slices
  std::vector<FaceField> momentum;  // K slices of face momenta
  std::size_t K = 0;
  double action = 0.0;
};

struct DistanceResult {
  double value = 0.0;
  TransportPlanPath path;
  SolveStats stats;
};

namespace detail {

// Moves u a fraction t toward the mean density.
inline CellField lifted(std::span<const double> u, double mean, double t) {
  CellField v(u.begin(), u.end());
  for (double& x : v) x = (1.0 - t) * x + t * mean;
  return v;
}

inline std::vector<double> cumulative(const Grid& g, std::span<const double> rho) {
  std::vector<double> F(g.n_faces(), 0.0);
  for (std::size_t j = 0; j < g.n_cells(); ++j) F[j + 1] = F[j] + g.h() * rho[j];
  return F;
}

/// Barrier Newton solver over the cumulative masses of slices k_lo..k_hi.
/// Optional terms: a frozen face weight replacing m(rhohat), and the energy
/// of the last slice.
class PathProgram {
 public:
  PathProgram(const Grid& g, const Mobility& m, double ceiling, std::size_t K)
      : g_(g), m_(m), M_(ceiling), K_(K), F_(K + 1, g.n_faces()) {}

  std::size_t K() const { return K_; }
  Eigen::MatrixXd& F() { return F_; }
  const Eigen::MatrixXd& F() const { return F_; }

  void set_slice(std::size_t k, std::span<const double> rho) {
    const auto c = cumulative(g_, rho);
    for (std::size_t f = 0; f < c.size(); ++f) F_(k, f) = c[f];
  }
  // Total mass is pinned exactly on every slice.
  void pin_mass(double total) {
    for (std::size_t k = 0; k <= K_; ++k) {
      F_(k, 0) = 0.0;
      F_(k, g_.n_cells()) = total;
    }
  }

  void set_variables(std::size_t k_lo, std::size_t k_hi) {
    k_lo_ = k_lo;
    k_hi_ = k_hi;
  }
  void set_action_weight(double w) { action_weight_ = w; }
  void set_frozen_weights(std::vector<double> w) { frozen_ = std::move(w); }
  void set_energy(const FreeEnergy* G) { G_ = G; }

  CellField slice(std::size_t k) const {
    CellField r(g_.n_cells());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (F_(k, j + 1) - F_(k, j)) / g_.h();
    return r;
  }

  /// sum_{k,f} h K b^2 / m(rhohat) without the action weight.
  double action() const { return action_term(F_); }

  double energy_term() const { return G_ ? energy_of(F_) : 0.0; }

  SolveStats solve(const PathSolverOptions& opt) {
    SolveStats st;
    const std::size_t nv = num_vars();
    if (nv == 0) return st;
    Eigen::VectorXd grad(nv);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::SparseMatrix<double> H(nv, nv);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool analyzed = false;

    double mu = opt.mu_start;
    for (;;) {
      const bool last = mu <= opt.mu_end * (1.0 + 1e-9);
      for (;;) {
        if (st.newton_iterations >= opt.max_newton) {
          st.quality = SolveQuality::Stalled;
          st.mu = mu;
          return st;
        }
        const double f0 = evaluate(F_, mu, &grad, &trip);
        H.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
          ldlt.analyzePattern(H);
          analyzed = true;
        }
        Eigen::VectorXd d = newton_direction(H, grad, ldlt);
        const double dec = -grad.dot(d);
        ++st.newton_iterations;
        st.decrement = std::sqrt(std::max(dec, 0.0));
        const double stop = last ? 1e-15 * (1.0 + std::abs(f0)) : mu;
        if (!(dec > 0.0) || 0.5 * dec <= stop) break;

        double alpha = std::min(1.0, 0.99 * max_step(d));
        Eigen::MatrixXd trial = F_;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
          trial = F_;
          add_step(trial, d, alpha);
          const double f1 = evaluate(trial, mu, nullptr, nullptr);
          if (std::isfinite(f1) && f1 <= f0 - 1e-4 * alpha * dec) {
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!accepted) {
          // no representable decrease left at this barrier level
          if (last && st.decrement > 1e-8 * (1.0 + std::abs(f0))) st.quality = SolveQuality::Stalled;
          break;
        }
        F_ = trial;
      }
      st.mu = mu;
      if (last) break;
      mu = std::max(mu * opt.mu_factor, opt.mu_end);
    }
    return st;
  }

 private:
  std::size_t n() const { return g_.n_cells(); }
  std::size_t num_slices() const { return k_hi_ >= k_lo_ && k_lo_ <= K_ ? k_hi_ - k_lo_ + 1 : 0; }
  std::size_t num_vars() const { return num_slices() * (n() - 1); }
  bool is_var(std::size_t k, std::size_t f) const { return k >= k_lo_ && k <= k_hi_ && f >= 1 && f < n(); }
  // face-major ordering keeps the Hessian banded with bandwidth ~ 2K
  int idx(std::size_t k, std::size_t f) const {
    return static_cast<int>((f - 1) * num_slices() + (k - k_lo_));
  }

  struct Entry {
    std::size_t k, f;
    double c;
  };

  double action_term(const Eigen::MatrixXd& F) const {
    const double h = g_.h(), cK = h * static_cast<double>(K_);
    double s = 0.0;
    for (std::size_t k = 0; k < K_; ++k)
      for (std::size_t f = 1; f < n(); ++f) {
        const double b = F(k + 1, f) - F(k, f);
        if (b == 0.0) continue;
        double w;
        if (!frozen_.empty()) {
          w = frozen_[f];
        } else {
          const double a = (F(k, f + 1) - F(k, f - 1) + F(k + 1, f + 1) - F(k + 1, f - 1)) / (4.0 * h);
          w = m_(a);
        }
        if (!(w > 0.0)) return kInf;
        s += cK * b * b / w;
      }
    return s;
  }

  double energy_of(const Eigen::MatrixXd& F) const {
    const double h = g_.h();
    const std::size_t k = K_;
    double s = 0.0;
    for (std::size_t f = 1; f < n(); ++f) {
      const double d = F(k, f + 1) - 2.0 * F(k, f) + F(k, f - 1);
      s += d * d;
    }
    double pot = 0.0;
    for (std::size_t j = 0; j < n(); ++j) pot += (*G_)((F(k, j + 1) - F(k, j)) / h);
    return s / (2.0 * h * h * h) + h * pot;
  }

  // Objective with barrier; fills gradient and Hessian triplets when asked.
  double evaluate(const Eigen::MatrixXd& F, double mu, Eigen::VectorXd* grad,
                  std::vector<Eigen::Triplet<double>>* trip) const {
    const double h = g_.h();
    const bool deriv = grad != nullptr;
    if (deriv) {
      grad->setZero();
      trip->clear();
    }
    auto add_g = [&](const Entry& e, double v) {
      if (is_var(e.k, e.f)) (*grad)(idx(e.k, e.f)) += e.c * v;
    };
    auto add_h = [&](const Entry& a, const Entry& b, double v) {
      if (is_var(a.k, a.f) && is_var(b.k, b.f)) trip->emplace_back(idx(a.k, a.f), idx(b.k, b.f), a.c * b.c * v);
    };

    double total = 0.0;
    // barrier on the variable slices
    for (std::size_t k = k_lo_; k <= k_hi_ && k <= K_; ++k)
      for (std::size_t j = 0; j < n(); ++j) {
        const double r = (F(k, j + 1) - F(k, j)) / h;
        if (!(r > 0.0) || !(r < M_)) return kInf;
        const bool capped = std::isfinite(M_);
        total -= mu * h * (std::log(r) + (capped ? std::log(M_ - r) : 0.0));
        if (!deriv) continue;
        const double g1 = -mu * h * (1.0 / r - (capped ? 1.0 / (M_ - r) : 0.0));
        const double g2 = mu * h * (1.0 / (r * r) + (capped ? 1.0 / ((M_ - r) * (M_ - r)) : 0.0));
        const Entry dr[2] = {{k, j + 1, 1.0 / h}, {k, j, -1.0 / h}};
        for (const auto& a : dr) {
          add_g(a, g1);
          for (const auto& b : dr) add_h(a, b, g2);
        }
      }

    // action
    const double c = action_weight_ * h * static_cast<double>(K_);
    for (std::size_t k = 0; k < K_; ++k)
      for (std::size_t f = 1; f < n(); ++f) {
        const double b = F(k + 1, f) - F(k, f);
        const Entry db[2] = {{k + 1, f, 1.0}, {k, f, -1.0}};
        if (!frozen_.empty()) {
          const double w = frozen_[f];
          total += c * b * b / w;
          if (!deriv) continue;
          for (const auto& x : db) {
            add_g(x, 2.0 * c * b / w);
            for (const auto& y : db) add_h(x, y, 2.0 * c / w);
          }
          continue;
        }
        const double a = (F(k, f + 1) - F(k, f - 1) + F(k + 1, f + 1) - F(k + 1, f - 1)) / (4.0 * h);
        const double ma = m_(a);
        if (!(ma > 0.0)) {
          if (b == 0.0 && !(is_var(k, f) || is_var(k + 1, f))) continue;
          return kInf;
        }
        total += c * b * b / ma;
        if (!deriv) continue;
        const double m1 = m_.d1(a), m2 = m_.d2(a);
        const double gb = 2.0 * c * b / ma, ga = -c * b * b * m1 / (ma * ma);
        const double hbb = 2.0 * c / ma, hab = -2.0 * c * b * m1 / (ma * ma);
        const double haa = c * b * b * (2.0 * m1 * m1 - ma * m2) / (ma * ma * ma);
        const double q = 1.0 / (4.0 * h);
        const Entry da[4] = {{k, f + 1, q}, {k, f - 1, -q}, {k + 1, f + 1, q}, {k + 1, f - 1, -q}};
        for (const auto& x : db) {
          add_g(x, gb);
          for (const auto& y : db) add_h(x, y, hbb);
          for (const auto& y : da) {
            add_h(x, y, hab);
            add_h(y, x, hab);
          }
        }
        for (const auto& x : da) {
          add_g(x, ga);
          for (const auto& y : da) add_h(x, y, haa);
        }
      }

    // energy of the last slice
    if (G_ && is_var(K_, 1)) {
      const std::size_t k = K_;
      const double cd = 1.0 / (2.0 * h * h * h);
      for (std::size_t f = 1; f < n(); ++f) {
        const double d = F(k, f + 1) - 2.0 * F(k, f) + F(k, f - 1);
        total += cd * d * d;
        if (!deriv) continue;
        const Entry e[3] = {{k, f + 1, 1.0}, {k, f, -2.0}, {k, f - 1, 1.0}};
        for (const auto& x : e) {
          add_g(x, 2.0 * cd * d);
          for (const auto& y : e) add_h(x, y, 2.0 * cd);
        }
      }
      for (std::size_t j = 0; j < n(); ++j) {
        const double r = (F(k, j + 1) - F(k, j)) / h;
        const double gv = (*G_)(r);
        if (!std::isfinite(gv)) return kInf;
        total += h * gv;
        if (!deriv) continue;
        const Entry dr[2] = {{k, j + 1, 1.0 / h}, {k, j, -1.0 / h}};
        const double g1 = h * G_->d1(r), g2 = h * G_->d2(r);
        for (const auto& a : dr) {
          add_g(a, g1);
          for (const auto& b : dr) add_h(a, b, g2);
        }
      }
    }
    return total;
  }

  // Newton direction; the Hessian is shifted until the LDLT pivots are positive.
  Eigen::VectorXd newton_direction(Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& grad,
                                   Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& ldlt) const {
    double shift = 0.0, diag = 0.0;
    for (int i = 0; i < H.rows(); ++i) diag = std::max(diag, std::abs(H.coeff(i, i)));
    Eigen::SparseMatrix<double> I(H.rows(), H.cols());
    I.setIdentity();
    for (int attempt = 0; attempt < 60; ++attempt) {
      if (shift > 0.0) ldlt.factorize(H + shift * I);
      else ldlt.factorize(H);
      bool ok = ldlt.info() == Eigen::Success;
      if (ok) {
        const auto& D = ldlt.vectorD();
        for (int i = 0; i < D.size(); ++i) ok &= D(i) > 0.0;
      }
      if (ok) return ldlt.solve(-grad);
      shift = shift == 0.0 ? 1e-10 * std::max(diag, 1.0) : 4.0 * shift;
    }
    return -grad;
  }

  // Largest step keeping every variable cell inside (0, M).
  double max_step(const Eigen::VectorXd& d) const {
    const double h = g_.h();
    double amax = kInf;
    for (std::size_t k = k_lo_; k <= k_hi_ && k <= K_; ++k)
      for (std::size_t j = 0; j < n(); ++j) {
        const double r = (F_(k, j + 1) - F_(k, j)) / h;
        const double dp = is_var(k, j + 1) ? d(idx(k, j + 1)) : 0.0;
        const double dm = is_var(k, j) ? d(idx(k, j)) : 0.0;
        const double dr = (dp - dm) / h;
        if (dr < 0.0) amax = std::min(amax, -r / dr);
        if (dr > 0.0 && std::isfinite(M_)) amax = std::min(amax, (M_ - r) / dr);
      }
    return amax;
  }

  void add_step(Eigen::MatrixXd& F, const Eigen::VectorXd& d, double alpha) const {
    for (std::size_t k = k_lo_; k <= k_hi_ && k <= K_; ++k)
      for (std::size_t f = 1; f < n(); ++f) F(k, f) += alpha * d(idx(k, f));
  }

  Grid g_;
  Mobility m_;
  double M_;
  std::size_t K_;
  Eigen::MatrixXd F_;
  std::size_t k_lo_ = 1, k_hi_ = 0;
  double action_weight_ = 1.0;
  std::vector<double> frozen_;
  const FreeEnergy* G_ = nullptr;
};

inline TransportPlanPath extract_path(const PathProgram& p, const Grid& g) {
  TransportPlanPath path;
  path.K = p.K();
  const double K = static_cast<double>(p.K());
  for (std::size_t k = 0; k <= p.K(); ++k) path.rho.push_back(p.slice(k));
  for (std::size_t k = 0; k < p.K(); ++k) {
    FaceField q(g.n_faces(), 0.0);
    for (std::size_t f = 1; f < g.n_cells(); ++f) q[f] = -K * (p.F()(k + 1, f) - p.F()(k, f));
    path.momentum.push_back(std::move(q));
  }
  path.action = p.action();
  return path;
}

inline void check_pair(const Density& u0, const Density& u1) {
  if (!(u0.grid == u1.grid)) throw Error(ErrorKind::InvalidArgument, "densities live on different grids");
  const double a = u0.mass(), b = u1.mass();
  if (std::abs(a - b) > 1e-10 * std::max(1.0, std::abs(a)))
    throw Error(ErrorKind::MassMismatch, "masses differ: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace detail

/// Dynamic distance with K time slices. Interior slices start on the linear
/// interpolation path, lifted off 0 and M.
inline DistanceResult distance_dynamic(const Density& u0, const Density& u1, std::size_t K, const Mobility& m,
                                       double ceiling, const PathSolverOptions& opt = {}) {
  detail::check_pair(u0, u1);
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "K must be >= 1");
  const Grid& g = u0.grid;
  const double mass = u0.mass();
  const double mean = mass / g.length();
  detail::PathProgram p(g, m, ceiling, K);
  p.set_slice(0, u0.values);
  p.set_slice(K, u1.values);
  for (std::size_t k = 1; k < K; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(K);
    CellField r(g.n_cells());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (1.0 - t) * u0[j] + t * u1[j];
    bool edge = false;
    for (double x : r) edge |= !(x > 0.0 && x < ceiling);
    p.set_slice(k, detail::lifted(r, mean, edge ? opt.lift : 0.0));
  }
  p.pin_mass(mass);
  p.set_variables(1, K - 1);
  DistanceResult res;
  if (u0.values == u1.values) {
    for (std::size_t k = 1; k < K; ++k) p.set_slice(k, u0.values);
    p.pin_mass(mass);
  } else {
    res.stats = p.solve(opt);
  }
  res.path = detail::extract_path(p, g);
  res.path.rho.front() = u0.values;
  res.path.rho.back() = u1.values;
  res.value = std::sqrt(res.path.action);
  return res;
}

inline DistanceResult distance_dynamic(const Density& u0, const Density& u1, std::size_t K, const ProblemSpec& spec,
                                       const PathSolverOptions& opt = {}) {
  return distance_dynamic(u0, u1, K, spec.mobility(), spec.ceiling(), opt);
}

/// Face weights m(u_ref) averaged to faces, floored at 1e-12 m(mean density).
inline FaceField frozen_face_weights(const Density& u_ref, const Mobility& m, double mean, std::size_t* floored = nullptr) {
  const Grid& g = u_ref.grid;
  const auto ubar = face_average(g, u_ref.values);
  const double floor = 1e-12 * m(mean);
  FaceField w(g.n_faces(), 0.0);
  std::size_t count = 0;
  for (std::size_t f = 1; f < g.n_cells(); ++f) {
    w[f] = m(ubar[f]);
    if (!(w[f] >= floor)) {
      w[f] = floor;
      ++count;
    }
  }
  if (floored) *floored = count;
  return w;
}

/// Dual-Sobolev norm of u1 - u0 with the weight frozen at u_ref.
inline double distance_frozen(const Density& u_ref, const Density& u0, const Density& u1, const ProblemSpec& spec) {
  detail::check_pair(u0, u1);
  const Grid& g = u0.grid;
  if (u0.values == u1.values) return 0.0;
  const auto w = frozen_face_weights(u_ref, spec.mobility(), spec.s0());
  CellField diff(g.n_cells());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = u1[j] - u0[j];
  const auto phi = neumann_solve(g, diff, w);
  const auto Dphi = gradient_face(g, phi);
  double s = 0.0;
  for (std::size_t f = 1; f < g.n_cells(); ++f) s += w[f] * Dphi[f] * Dphi[f];
  return std::sqrt(g.h() * s);
}

/// Independent check of the dynamic program on tiny grids: density and
/// momentum unknowns, continuity imposed through a dense null-space basis,
/// barrier Newton from many random interior starts plus the linear path.
inline double distance_oracle_small(const Density& u0, const Density& u1, std::size_t K, const ProblemSpec& spec,
                                    int starts = 32, unsigned seed = 1) {
  detail::check_pair(u0, u1);
  const Grid& g = u0.grid;
  const std::size_t n = g.n_cells();
  if (n > 5 || K > 4 || K < 1) throw Error(ErrorKind::InvalidArgument, "oracle limited to n <= 5, K <= 4");
  if (u0.values == u1.values) return 0.0;
  const double h = g.h(), M = spec.ceiling(), dt = 1.0 / static_cast<double>(K);
  const auto& m = spec.mobility();
  const int nr = static_cast<int>((K - 1) * n), nq = static_cast<int>(K * (n - 1));
  const int nx = nr + nq;
  auto rho_at = [&](const Eigen::VectorXd& x, std::size_t k, std::size_t j) {
    if (k == 0) return u0[j];
    if (k == K) return u1[j];
    return x((k - 1) * n + j);
  };
  auto q_at = [&](const Eigen::VectorXd& x, std::size_t k, std::size_t f) {
    return (f == 0 || f == n) ? 0.0 : x(nr + k * (n - 1) + f - 1);
  };

  // continuity (rho_{k+1} - rho_k)/dt + (q_{j+1} - q_j)/h = 0 as A x = b
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K * n, nx);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K * n);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      const int row = static_cast<int>(k * n + j);
      if (k + 1 < K) A(row, (k) * n + j) += 1.0 / dt;
      else b(row) -= u1[j] / dt;
      if (k > 0) A(row, (k - 1) * n + j) -= 1.0 / dt;
      else b(row) += u0[j] / dt;
      if (j + 1 < n) A(row, nr + k * (n - 1) + j) += 1.0 / h;
      if (j > 0) A(row, nr + k * (n - 1) + j - 1) -= 1.0 / h;
    }
  const Eigen::MatrixXd N = Eigen::FullPivLU<Eigen::MatrixXd>(A).kernel();

  auto objective = [&](const Eigen::VectorXd& x, double mu, Eigen::VectorXd* gr, Eigen::MatrixXd* H) {
    if (gr) {
      gr->setZero(nx);
      H->setZero(nx, nx);
    }
    double val = 0.0;
    for (int i = 0; i < nr; ++i) {
      const double r = x(i);
      if (!(r > 0.0 && r < M)) return kInf;
      const bool capped = std::isfinite(M);
      val -= mu * (std::log(r) + (capped ? std::log(M - r) : 0.0));
      if (gr) {
        (*gr)(i) -= mu * (1.0 / r - (capped ? 1.0 / (M - r) : 0.0));
        (*H)(i, i) += mu * (1.0 / (r * r) + (capped ? 1.0 / ((M - r) * (M - r)) : 0.0));
      }
    }
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t f = 1; f < n; ++f) {
        const double q = q_at(x, k, f);
        const double a = 0.25 * (rho_at(x, k, f - 1) + rho_at(x, k, f) + rho_at(x, k + 1, f - 1) + rho_at(x, k + 1, f));
        const double ma = m(a);
        if (!(ma > 0.0)) {
          if (q == 0.0) continue;
          return kInf;
        }
        const double c = dt * h;
        val += c * q * q / ma;
        if (!gr) continue;
        // dependence of a on the unknown densities
        std::vector<int> ia;
        for (std::size_t kk : {k, k + 1})
          if (kk > 0 && kk < K)
            for (std::size_t jj : {f - 1, f}) ia.push_back(static_cast<int>((kk - 1) * n + jj));
        const int iq = nr + static_cast<int>(k * (n - 1) + f - 1);
        const double m1 = m.d1(a), m2 = m.d2(a);
        (*gr)(iq) += 2.0 * c * q / ma;
        (*H)(iq, iq) += 2.0 * c / ma;
        for (int i : ia) {
          (*gr)(i) += 0.25 * (-c * q * q * m1 / (ma * ma));
          (*H)(iq, i) += 0.25 * (-2.0 * c * q * m1 / (ma * ma));
          (*H)(i, iq) += 0.25 * (-2.0 * c * q * m1 / (ma * ma));
          for (int i2 : ia) (*H)(i, i2) += 0.0625 * c * q * q * (2.0 * m1 * m1 - ma * m2) / (ma * ma * ma);
        }
      }
    return val;
  };
  auto action_only = [&](const Eigen::VectorXd& x) { return objective(x, 0.0, nullptr, nullptr); };

  auto run = [&](Eigen::VectorXd x) {
    double mu = 1e-3;
    for (;;) {
      for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd gr;
        Eigen::MatrixXd H;
        const double f0 = objective(x, mu, &gr, &H);
        const Eigen::VectorXd gz = N.transpose() * gr;
        Eigen::MatrixXd Hz = N.transpose() * H * N;
        Eigen::LDLT<Eigen::MatrixXd> ldlt;
        double shift = 0.0;
        Eigen::VectorXd dz;
        for (int a = 0; a < 60; ++a) {
          ldlt.compute(Hz + shift * Eigen::MatrixXd::Identity(Hz.rows(), Hz.cols()));
          if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
            dz = ldlt.solve(-gz);
            break;
          }
          shift = shift == 0.0 ? 1e-12 * std::max(1.0, Hz.diagonal().cwiseAbs().maxCoeff()) : 4.0 * shift;
        }
        if (dz.size() == 0) dz = -gz;
        const double dec = -gz.dot(dz);
        if (!(dec > 0.0) || 0.5 * dec <= (mu <= 1e-13 ? 1e-16 * (1.0 + std::abs(f0)) : mu)) break;
        const Eigen::VectorXd dx = N * dz;
        double alpha = 1.0;
        for (int i = 0; i < nr; ++i) {
          if (dx(i) < 0.0) alpha = std::min(alpha, -0.99 * x(i) / dx(i));
          if (dx(i) > 0.0 && std::isfinite(M)) alpha = std::min(alpha, 0.99 * (M - x(i)) / dx(i));
        }
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
          const Eigen::VectorXd xt = x + alpha * dx;
          const double f1 = objective(xt, mu, nullptr, nullptr);
          if (std::isfinite(f1) && f1 <= f0 - 1e-4 * alpha * dec) {
            x = xt;
            moved = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!moved) break;
      }
      if (mu <= 1e-13) break;
      mu *= 0.1;
    }
    return action_only(x);
  };

  // starting points: interior slices with momenta from continuity
  auto start_from = [&](const std::vector<CellField>& slices) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
    for (std::size_t k = 1; k < K; ++k)
      for (std::size_t j = 0; j < n; ++j) x((k - 1) * n + j) = slices[k - 1][j];
    // momenta: the unique solution of the continuity rows given the densities
    Eigen::VectorXd rhs = b - A.leftCols(nr) * x.head(nr);
    const Eigen::VectorXd q = A.rightCols(nq).colPivHouseholderQr().solve(rhs);
    x.tail(nq) = q;
    return x;
  };
  const double mean = u0.mass() / g.length();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double best = kInf;
  for (int s = 0; s <= starts; ++s) {
    std::vector<CellField> slices;
    for (std::size_t k = 1; k < K; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(K);
      CellField r(n);
      if (s == 0) {
        for (std::size_t j = 0; j < n; ++j) r[j] = (1.0 - t) * u0[j] + t * u1[j];
        r = detail::lifted(r, mean, 1e-6);
      } else {
        CellField v(n);
        const double top = std::isfinite(M) ? M : 3.0 * mean;
        for (double& x : v) x = U(rng) * top;
        const auto pr = project_admissible(g, v, M, u0.mass());
        const double w = 0.2 + 0.6 * U(rng);
        for (std::size_t j = 0; j < n; ++j) r[j] = w * pr[j] + (1.0 - w) * mean;
      }
      slices.push_back(r);
    }
    const double val = run(start_from(slices));
    if (val < best) best = val;
  }
  return std::sqrt(best);
}

/// Metric used by the minimizing-movement step.
struct MetricBackend {
  enum class Kind { Dynamic, FrozenWeight };
  Kind kind = Kind::Dynamic;
  std::size_t K = 8;
  PathSolverOptions solver;

  static MetricBackend dynamic(std::size_t K = 8) {
    MetricBackend b;
    b.K = K;
    return b;
  }
  static MetricBackend frozen() {
    MetricBackend b;
    b.kind = Kind::FrozenWeight;
    b.K = 1;
    return b;
  }
};

inline const char* to_string(MetricBackend::Kind k) { return k == MetricBackend::Kind::Dynamic ? "dynamic" : "frozen"; }

}  // namespace wmflow
