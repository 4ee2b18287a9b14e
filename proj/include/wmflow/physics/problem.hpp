#pragma once

#include <cmath>
#include <functional>
#include <memory>

#include "wmflow/physics/entropy.hpp"
#include "wmflow/physics/free_energy.hpp"
#include "wmflow/physics/hypotheses.hpp"
#include "wmflow/physics/mobility.hpp"

namespace wmflow {

/// P(s) = int_0^s m G''. Closed forms for the catalog pairings, quadrature
/// otherwise.
class Pressure {
 public:
  Pressure(const Mobility& m, const FreeEnergy& G) : m_(m), G_(G) { detect(); }

  double operator()(double s) const {
    if (closed_) return closed_(s);
    if (s <= 0.0) return 0.0;
    return quad::integrate([this](double r) { return m_(r) * G_.d2(r); }, 0.0, s, 1e-9);
  }

  bool closed_form() const { return static_cast<bool>(closed_); }

 private:
  void detect() {
    using MK = MobilityKind;
    using EK = EnergyKind;
    const auto mk = m_.kind;
    const auto ek = G_.kind;
    if (ek == EK::Zero || (ek == EK::ThinFilm && G_.params[0] == 0.0)) {
      closed_ = [](double) { return 0.0; };
    } else if (ek == EK::ThinFilm && mk == MK::Power && m_.params[0] == G_.params[2]) {
      const double kappa = G_.params[0], beta = G_.params[1];
      closed_ = [=](double s) { return kappa * std::pow(std::max(s, 0.0), beta); };
    } else if (ek == EK::Logarithmic && mk == MK::Quadratic && m_.ceiling == 1.0) {
      const double theta = G_.params[0];
      closed_ = [=](double s) { return theta * s; };
    } else if (ek == EK::DoubleWell && mk == MK::Quadratic && m_.ceiling == 1.0) {
      const double theta = G_.params[0];
      closed_ = [=](double s) {
        const double s2 = s * s;
        return theta * (s2 - 14.0 * s2 * s / 3.0 + 6.0 * s2 * s2 - 2.4 * s2 * s2 * s);
      };
    } else if (ek == EK::Quadratic && mk == MK::Wasserstein) {
      const double c = G_.params[0];
      closed_ = [=](double s) { return 0.5 * c * s * s; };
    } else if (ek == EK::Quadratic && mk == MK::Constant) {
      const double c = G_.params[0] * m_.params[0];
      closed_ = [=](double s) { return c * s; };
    } else if (ek == EK::DoubleWell && mk == MK::Constant) {
      const double c = G_.params[0] * m_.params[0];
      closed_ = [=](double s) { return c * (2.0 * s - 6.0 * s * s + 4.0 * s * s * s); };
    }
  }

  Mobility m_;
  FreeEnergy G_;
  ScalarFn closed_;
};

struct HypothesisFlags {
  bool M = false;
  bool LSC = false;
  bool M_half = false;
  bool G = false;
  double C_G = 0.0;
  double q = 3.0;
};

/// Mobility, potential, pressure and entropy density over (0, L) with mass
/// `mass`. Construction validates the hypotheses and records the flags.
class ProblemSpec {
 public:
  ProblemSpec(Mobility m, FreeEnergy G, double mass, double length, bool validate = true)
      : mobility_(std::move(m)), energy_(std::move(G)), mass_(mass), length_(length) {
    if (!(length > 0.0)) throw Error(ErrorKind::InvalidArgument, "length must be positive");
    const double s0 = mass / length;
    if (!(s0 > 0.0) || !(s0 < mobility_.ceiling))
      throw Error(ErrorKind::InfeasibleConstraint, "mean density must lie in (0, M)");
    pressure_ = std::make_shared<Pressure>(mobility_, energy_);
    entropy_ = std::make_shared<EntropyDensity>(mobility_, s0);
    split_ = std::make_shared<EnergySplit>(energy_, s0, mobility_.ceiling);
    if (validate) {
      reports_.push_back(validate_M(mobility_));
      reports_.push_back(validate_LSC(mobility_));
      reports_.push_back(validate_M_half(mobility_));
      reports_.push_back(validate_G(mobility_, energy_, [this](double s) { return pressure(s); }, flags_.q));
      flags_.M = reports_[0].passes;
      flags_.LSC = reports_[1].passes;
      flags_.M_half = reports_[2].passes;
      flags_.G = reports_[3].passes;
      flags_.C_G = reports_[3].values.at("C");
    } else {
      double C = 0.0;
      for (double s : detail::hypothesis_samples(mobility_)) {
        const double v = -mobility_(s) * energy_.d2(s);
        if (std::isfinite(v)) C = std::max(C, mobility_.bounded() ? v : v / (1.0 + mobility_(s)));
      }
      flags_.C_G = C;
    }
  }

  const Mobility& mobility() const { return mobility_; }
  const FreeEnergy& energy() const { return energy_; }
  const EntropyDensity& entropy() const { return *entropy_; }
  const EnergySplit& split() const { return *split_; }
  double pressure(double s) const { return (*pressure_)(s); }
  double mass() const { return mass_; }
  double length() const { return length_; }
  double ceiling() const { return mobility_.ceiling; }
  double s0() const { return mass_ / length_; }
  const HypothesisFlags& flags() const { return flags_; }
  const std::vector<HypothesisReport>& reports() const { return reports_; }

  /// Same potential and mass with a different mobility (e.g. m_delta).
  ProblemSpec with_mobility(Mobility m, bool validate = true) const {
    return ProblemSpec(std::move(m), energy_, mass_, length_, validate);
  }

 private:
  Mobility mobility_;
  FreeEnergy energy_;
  double mass_;
  double length_;
  std::shared_ptr<const Pressure> pressure_;
  std::shared_ptr<const EntropyDensity> entropy_;
  std::shared_ptr<const EnergySplit> split_;
  HypothesisFlags flags_;
  std::vector<HypothesisReport> reports_;
};

/// P_delta(s) = int_0^s m_delta G''.
inline ScalarFn regularize_pressure(const ProblemSpec& spec, double delta) {
  const Mobility md = regularize_mobility(spec.mobility(), delta);
  const FreeEnergy G = spec.energy();
  if (G.kind == EnergyKind::Zero || (G.kind == EnergyKind::ThinFilm && G.params[0] == 0.0))
    return [](double) { return 0.0; };
  return [md, G](double s) {
    if (s <= 0.0) return 0.0;
    return quad::integrate([&](double r) { return md(r) * G.d2(r); }, 0.0, s, 1e-8);
  };
}

/// Smallest K with -K(1 + s^2) <= P_delta(s) <= P(s) + K(1 + s) over the
/// sampled s and deltas.
inline double pressure_sandwich_constant(const ProblemSpec& spec, const std::vector<double>& deltas, double s_max,
                                         int samples = 64) {
  double K = 0.0;
  for (double d : deltas) {
    const auto Pd = regularize_pressure(spec, d);
    for (int i = 0; i <= samples; ++i) {
      const double s = s_max * i / samples;
      const double pd = Pd(s), p = spec.pressure(s);
      K = std::max(K, -pd / (1.0 + s * s));
      K = std::max(K, (pd - p) / (1.0 + s));
    }
  }
  return K;
}

}  // namespace wmflow
