#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "wmflow/errors.hpp"
#include "wmflow/grid.hpp"
#include "wmflow/physics/quadrature.hpp"

namespace wmflow {

enum class MobilityKind { Wasserstein, Quadratic, Power, PowerProduct, Constant, Regularized, Tabulated, Custom };

using ScalarFn = std::function<double(double)>;

/// Concave mobility m on (0, M) with its first two derivatives. `ceiling` is
/// M and may be +infinity.
struct Mobility {
  MobilityKind kind = MobilityKind::Custom;
  std::string name;
  double ceiling = kInf;
  std::vector<double> params;
  ScalarFn f, df, d2f;

  double operator()(double s) const { return f(s); }
  double d1(double s) const { return df(s); }
  double d2(double s) const { return d2f(s); }
  bool bounded() const { return std::isfinite(ceiling); }
};

namespace mobility {

inline Mobility wasserstein() {
  return {MobilityKind::Wasserstein, "wasserstein", kInf, {},
          [](double s) { return s; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
}

/// m(s) = s (M - s).
inline Mobility quadratic(double M = 1.0) {
  if (!(M > 0.0) || !std::isfinite(M)) throw Error(ErrorKind::InvalidArgument, "quadratic mobility needs finite M > 0");
  return {MobilityKind::Quadratic, "quadratic", M, {M},
          [M](double s) { return s * (M - s); }, [M](double s) { return M - 2.0 * s; },
          [](double) { return -2.0; }};
}

/// m(s) = s^alpha, 0 < alpha <= 1.
inline Mobility power(double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "power mobility needs alpha > 0");
  if (alpha == 1.0) {
    auto m = wasserstein();
    m.kind = MobilityKind::Power;
    m.name = "power";
    m.params = {1.0};
    return m;
  }
  return {MobilityKind::Power, "power", kInf, {alpha},
          [alpha](double s) { return s > 0.0 ? std::pow(s, alpha) : 0.0; },
          [alpha](double s) { return alpha * std::pow(s, alpha - 1.0); },
          [alpha](double s) { return alpha * (alpha - 1.0) * std::pow(s, alpha - 2.0); }};
}

/// m(s) = s^a0 (M - s)^a1.
inline Mobility power_product(double a0, double a1, double M = 1.0) {
  if (!(a0 > 0.0 && a1 > 0.0 && M > 0.0 && std::isfinite(M)))
    throw Error(ErrorKind::InvalidArgument, "power_product needs positive exponents and finite M");
  auto f = [=](double s) {
    if (s <= 0.0 || s >= M) return 0.0;
    return std::pow(s, a0) * std::pow(M - s, a1);
  };
  auto df = [=](double s) {
    const double base = std::pow(s, a0) * std::pow(M - s, a1);
    return base * (a0 / s - a1 / (M - s));
  };
  auto d2f = [=](double s) {
    const double base = std::pow(s, a0) * std::pow(M - s, a1);
    const double g = a0 / s - a1 / (M - s);
    return base * (g * g - a0 / (s * s) - a1 / ((M - s) * (M - s)));
  };
  return {MobilityKind::PowerProduct, "power_product", M, {a0, a1, M}, f, df, d2f};
}

/// m = c. Not in the hypothesis class (no degeneracy); used to validate
/// solvers against linear problems.
inline Mobility constant(double c = 1.0) {
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "constant mobility must be positive");
  return {MobilityKind::Constant, "constant", kInf, {c},
          [c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

inline Mobility custom(std::string name, ScalarFn f, ScalarFn df, ScalarFn d2f, double M = kInf) {
  return {MobilityKind::Custom, std::move(name), M, {}, std::move(f), std::move(df), std::move(d2f)};
}

/// Cubic B-spline through uniformly spaced samples m(s_start + i ds).
inline Mobility tabulated(std::vector<double> samples, double s_start, double ds, double M = kInf) {
  if (samples.size() < 4) throw Error(ErrorKind::InvalidArgument, "tabulated mobility needs >= 4 samples");
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      samples.begin(), samples.end(), s_start, ds);
  return {MobilityKind::Tabulated, "tabulated", M, {s_start, ds},
          [spline](double s) { return (*spline)(s); },
          [spline](double s) { return spline->prime(s); },
          [spline](double s) { return spline->double_prime(s); }};
}

}  // namespace mobility

/// Location and value of max m. For M = infinity the supremum is approached
/// at large s; it is estimated on a geometric ladder up to 1e6.
inline std::pair<double, double> mobility_max(const Mobility& m) {
  if (m.bounded()) {
    const auto r = boost::math::tools::brent_find_minima([&](double s) { return -m(s); }, 0.0, m.ceiling, 52);
    return {r.first, -r.second};
  }
  double best_s = 1e-8, best = m(best_s);
  for (double s = 1e-8; s <= 1e6; s *= 1.5) {
    const double v = m(s);
    if (v > best) best = v, best_s = s;
  }
  return {best_s, best};
}

/// Shifted and rescaled mobility m_delta:
/// m_delta(s) = m(a s + s1) - delta with a = (s2 - s1)/M for M finite,
/// m_delta(s) = m(s + s_delta) - delta for M infinite.
inline Mobility regularize_mobility(const Mobility& m, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be positive");
  const auto [smax, mmax] = mobility_max(m);
  if (delta >= mmax) throw Error(ErrorKind::DeltaTooLarge, "delta must be below max m");
  auto g = [&](double s) { return m(s) - delta; };
  Mobility out;
  out.kind = MobilityKind::Regularized;
  out.name = m.name + "_reg";
  out.ceiling = m.ceiling;
  if (m.bounded()) {
    const double s1 = quad::bisect_root(g, 0.0, smax);
    const double s2 = quad::bisect_root(g, smax, m.ceiling);
    const double a = (s2 - s1) / m.ceiling;
    out.params = {delta, s1, s2};
    out.f = [m, a, s1, delta](double s) { return m(a * s + s1) - delta; };
    out.df = [m, a, s1](double s) { return a * m.d1(a * s + s1); };
    out.d2f = [m, a, s1](double s) { return a * a * m.d2(a * s + s1); };
  } else {
    double hi = std::max(smax, 1.0);
    while (m(hi) <= delta && hi < 1e12) hi *= 2.0;
    const double sd = quad::bisect_root(g, 0.0, hi);
    out.params = {delta, sd};
    out.f = [m, sd, delta](double s) { return m(s + sd) - delta; };
    out.df = [m, sd](double s) { return m.d1(s + sd); };
    out.d2f = [m, sd](double s) { return m.d2(s + sd); };
  }
  return out;
}

}  // namespace wmflow
