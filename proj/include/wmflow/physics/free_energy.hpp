#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "wmflow/physics/mobility.hpp"

namespace wmflow {

enum class EnergyKind { Zero, DoubleWell, Logarithmic, ThinFilm, Quadratic, Tabulated, Custom };

/// Potential G of the energy (1/2) int |Du|^2 + int G(u) with G', G''.
struct FreeEnergy {
  EnergyKind kind = EnergyKind::Custom;
  std::string name;
  std::vector<double> params;
  ScalarFn g, dg, d2g;

  double operator()(double s) const { return g(s); }
  double d1(double s) const { return dg(s); }
  double d2(double s) const { return d2g(s); }
};

namespace free_energy {

inline FreeEnergy zero() {
  auto z = [](double) { return 0.0; };
  return {EnergyKind::Zero, "zero", {}, z, z, z};
}

/// G = theta s^2 (1 - s)^2.
inline FreeEnergy double_well(double theta = 1.0) {
  return {EnergyKind::DoubleWell, "double_well", {theta},
          [theta](double s) { return theta * s * s * (1.0 - s) * (1.0 - s); },
          [theta](double s) { return theta * 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s); },
          [theta](double s) { return theta * (2.0 - 12.0 * s + 12.0 * s * s); }};
}

/// G = theta (s ln s + (1 - s) ln(1 - s)).
inline FreeEnergy logarithmic(double theta = 1.0) {
  auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  return {EnergyKind::Logarithmic, "logarithmic", {theta},
          [=](double s) {
            if (s < 0.0 || s > 1.0) return kInf;
            return theta * (xlogx(s) + xlogx(1.0 - s));
          },
          [theta](double s) { return theta * (std::log(s) - std::log(1.0 - s)); },
          [theta](double s) { return theta / (s * (1.0 - s)); }};
}

/// G = kappa beta / ((beta - alpha)(beta - alpha + 1)) s^(beta - alpha + 1),
/// paired with m = s^alpha it gives the pressure P = kappa s^beta.
inline FreeEnergy thin_film(double kappa, double beta, double alpha) {
  const double p = beta - alpha + 1.0;
  if (kappa != 0.0 && (beta - alpha == 0.0 || p == 0.0))
    throw Error(ErrorKind::InvalidArgument, "thin_film exponents are degenerate");
  const double c = (kappa == 0.0) ? 0.0 : kappa * beta / ((beta - alpha) * p);
  return {EnergyKind::ThinFilm, "thin_film", {kappa, beta, alpha},
          [=](double s) { return c == 0.0 ? 0.0 : c * std::pow(std::max(s, 0.0), p); },
          [=](double s) { return c == 0.0 ? 0.0 : c * p * std::pow(std::max(s, 0.0), p - 1.0); },
          [=](double s) { return c == 0.0 ? 0.0 : c * p * (p - 1.0) * std::pow(std::max(s, 0.0), p - 2.0); }};
}

/// G = c s^2 / 2.
inline FreeEnergy quadratic(double c) {
  return {EnergyKind::Quadratic, "quadratic", {c},
          [c](double s) { return 0.5 * c * s * s; }, [c](double s) { return c * s; },
          [c](double) { return c; }};
}

inline FreeEnergy custom(std::string name, ScalarFn g, ScalarFn dg, ScalarFn d2g) {
  return {EnergyKind::Custom, std::move(name), {}, std::move(g), std::move(dg), std::move(d2g)};
}

inline FreeEnergy tabulated(std::vector<double> samples, double s_start, double ds) {
  if (samples.size() < 4) throw Error(ErrorKind::InvalidArgument, "tabulated energy needs >= 4 samples");
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      samples.begin(), samples.end(), s_start, ds);
  return {EnergyKind::Tabulated, "tabulated", {s_start, ds},
          [spline](double s) { return (*spline)(s); },
          [spline](double s) { return spline->prime(s); },
          [spline](double s) { return spline->double_prime(s); }};
}

}  // namespace free_energy

/// Convex/concave splitting of the normalized potential
/// G(s) - G(s0) - G'(s0)(s - s0), using the positive and negative parts of G''.
class EnergySplit {
 public:
  EnergySplit(FreeEnergy G, double s0, double ceiling) : G_(std::move(G)), s0_(s0), ceiling_(ceiling) {}

  double s0() const { return s0_; }

  double normalized(double s) const { return G_(s) - G_(s0_) - G_.d1(s0_) * (s - s0_); }
  double conv(double s) const { return part(s, +1); }
  double conc(double s) const { return -part(s, -1); }

 private:
  // int_{s0}^{s} max(+-G''(r), 0) (s - r) dr, split at sign changes of G''.
  double part(double s, int sign) const {
    if (s == s0_) return 0.0;
    const double lo = std::min(s, s0_), hi = std::max(s, s0_);
    auto integrand = [&](double r) { return std::max(sign * G_.d2(r), 0.0) * std::abs(s - r); };
    std::vector<double> cuts{lo};
    constexpr int kSamples = 64;
    double prev = G_.d2(lo + (hi - lo) * 1e-12);
    for (int i = 1; i <= kSamples; ++i) {
      const double a = lo + (hi - lo) * (i - 1) / kSamples;
      const double b = (i == kSamples) ? hi : lo + (hi - lo) * i / kSamples;
      const double cur = G_.d2(i == kSamples ? hi - (hi - lo) * 1e-12 : b);
      if (std::isfinite(prev) && std::isfinite(cur) && (prev > 0.0) != (cur > 0.0) && prev != 0.0 && cur != 0.0)
        cuts.push_back(quad::bisect_root([&](double r) { return G_.d2(r); }, a, b));
      prev = cur;
    }
    cuts.push_back(hi);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i], b = cuts[i + 1];
      if (!(b > a)) continue;
      // tanh-sinh abscissas collapse onto the endpoints of very short pieces
      if (b - a < 1e-6 * std::max(1.0, std::abs(b)))
        total += boost::math::quadrature::gauss<double, 10>::integrate(integrand, a, b);
      else
        total += quad::integrate(integrand, a, b, 1e-9);
    }
    return total;
  }

  FreeEnergy G_;
  double s0_;
  double ceiling_;
};

}  // namespace wmflow
