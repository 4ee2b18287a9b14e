#pragma once

#include <cmath>

#include "wmflow/physics/mobility.hpp"

namespace wmflow {

/// U with U'' = 1/m and U(s0) = U'(s0) = 0. Closed forms for the catalog
/// mobilities, tanh-sinh quadrature otherwise. Outside [0, M] the value is +inf.
class EntropyDensity {
 public:
  EntropyDensity(Mobility m, double s0) : m_(std::move(m)), s0_(s0) {
    if (!(s0 > 0.0 && s0 < m_.ceiling)) throw Error(ErrorKind::InvalidArgument, "entropy reference outside (0, M)");
    switch (m_.kind) {
      case MobilityKind::Wasserstein:
      case MobilityKind::Quadratic:
      case MobilityKind::Constant:
        closed_ = true;
        break;
      case MobilityKind::Power:
        closed_ = m_.params[0] != 2.0;
        break;
      default:
        closed_ = false;
    }
  }

  double s0() const { return s0_; }
  bool closed_form() const { return closed_; }
  const Mobility& mobility() const { return m_; }

  double value(double s) const {
    if (s < 0.0 || s > m_.ceiling || !std::isfinite(s)) return kInf;
    if (closed_) return closed_value(s);
    const double x = clamp_inside(s);
    return quad::integrate([&](double r) { return std::abs(x - r) / m_(r); }, std::min(x, s0_), std::max(x, s0_),
                           1e-8);
  }

  /// U'(s) = int_{s0}^{s} 1/m.
  double d1(double s) const {
    if (closed_) return closed_d1(s);
    auto inv = [&](double r) { return 1.0 / m_(r); };
    const double x = clamp_inside(s);
    if (x != s) {
      // integrable endpoint singularity: tanh-sinh never samples the endpoint
      try {
        return quad::integrate(inv, s0_, s < s0_ ? std::max(s, 0.0) : std::min(s, m_.ceiling), 1e-8);
      } catch (const Error&) {
      }
    }
    return quad::integrate(inv, s0_, x, 1e-8);
  }

  double d2(double s) const { return 1.0 / m_(s); }

 private:
  static double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

  // Endpoint values of the quadrature mode are taken as limits from inside.
  double clamp_inside(double s) const {
    const double eta = 1e-12 * (m_.bounded() ? m_.ceiling : std::max(1.0, s0_));
    if (s < eta) return eta;
    if (m_.bounded() && s > m_.ceiling - eta) return m_.ceiling - eta;
    return s;
  }

  double closed_value(double s) const {
    switch (m_.kind) {
      case MobilityKind::Wasserstein:
        return xlogx(s) - s * std::log(s0_) - (s - s0_);
      case MobilityKind::Quadratic: {
        const double M = m_.ceiling;
        auto f = [M](double x) { return (xlogx(x) + xlogx(M - x)) / M; };
        const double fp = std::log(s0_ / (M - s0_)) / M;
        return f(s) - f(s0_) - fp * (s - s0_);
      }
      case MobilityKind::Constant: {
        const double c = m_.params[0];
        return 0.5 * (s - s0_) * (s - s0_) / c;
      }
      case MobilityKind::Power: {
        const double a = m_.params[0];
        if (a == 1.0) return xlogx(s) - s * std::log(s0_) - (s - s0_);
        const double p = 2.0 - a;
        return (std::pow(s, p) - std::pow(s0_, p)) / ((1.0 - a) * p) -
               std::pow(s0_, 1.0 - a) * (s - s0_) / (1.0 - a);
      }
      default:
        return kInf;
    }
  }

  double closed_d1(double s) const {
    switch (m_.kind) {
      case MobilityKind::Wasserstein:
        return std::log(s / s0_);
      case MobilityKind::Quadratic: {
        const double M = m_.ceiling;
        return (std::log(s / (M - s)) - std::log(s0_ / (M - s0_))) / M;
      }
      case MobilityKind::Constant:
        return (s - s0_) / m_.params[0];
      case MobilityKind::Power: {
        const double a = m_.params[0];
        if (a == 1.0) return std::log(s / s0_);
        return (std::pow(s, 1.0 - a) - std::pow(s0_, 1.0 - a)) / (1.0 - a);
      }
      default:
        return 0.0;
    }
  }

  Mobility m_;
  double s0_;
  bool closed_ = false;
};

}  // namespace wmflow
