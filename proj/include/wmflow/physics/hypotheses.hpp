#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wmflow/physics/free_energy.hpp"
#include "wmflow/physics/mobility.hpp"

namespace wmflow {

struct HypothesisReport {
  explicit HypothesisReport(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  bool passes = true;
  std::vector<std::string> witnesses;
  std::map<std::string, double> values;

  void fail(const std::string& why) {
    passes = false;
    if (witnesses.size() < 16) witnesses.push_back(why);
  }
};

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

inline double domain_scale(const Mobility& m) { return m.bounded() ? m.ceiling : 1.0; }

/// Dense interior samples plus geometric ladders toward each endpoint (and up
/// to 1e6 when M is infinite).
inline std::vector<double> hypothesis_samples(const Mobility& m) {
  std::vector<double> s;
  const double a = domain_scale(m);
  if (m.bounded()) {
    constexpr int N = 2000;
    for (int i = 1; i < N; ++i) s.push_back(a * i / N);
    for (double eta = 1e-3; eta >= 1e-8 * 0.999; eta /= std::sqrt(10.0)) {
      s.push_back(a * eta);
      s.push_back(a * (1.0 - eta));
    }
  } else {
    constexpr int N = 2000;
    for (int i = 1; i <= N; ++i) s.push_back(10.0 * i / N);
    for (double x = 1e-8; x <= 1e6 * 1.001; x *= std::pow(10.0, 0.1)) s.push_back(x);
  }
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace detail

/// (M): positivity, concavity and vanishing limits at the endpoints.
inline HypothesisReport validate_M(const Mobility& m) {
  HypothesisReport r("M");
  const auto samples = detail::hypothesis_samples(m);
  double m_ref = 0.0;
  for (double s : samples) m_ref = std::max(m_ref, m(s));
  for (double s : samples) {
    const double v = m(s);
    if (!(v > 0.0)) r.fail("m(" + detail::fmt(s) + ") = " + detail::fmt(v) + " not positive");
    const double d2 = m.d2(s);
    if (d2 > 1e-10) r.fail("m''(" + detail::fmt(s) + ") = " + detail::fmt(d2) + " > 0");
  }
  // Second differences on the dense part of the sample set.
  const double a = detail::domain_scale(m);
  const double step = (m.bounded() ? a : 10.0) / 2000.0;
  for (int i = 1; i < 1999; ++i) {
    const double s = step * i;
    const double dd = m(s + step) - 2.0 * m(s) + m(s - step);
    if (dd > 1e-10 + 8e-16 * std::abs(m(s))) {
      r.fail("second difference at " + detail::fmt(s) + " = " + detail::fmt(dd));
      break;
    }
  }
  const double eta = 1e-8 * a;
  auto vanishes = [&](double s) {
    const double v = m(s);
    return v <= 1e-3 * m_ref || eta * std::abs(m.d1(s)) / std::max(v, 1e-300) >= 0.05;
  };
  if (!vanishes(eta)) r.fail("m does not vanish at 0 (m(" + detail::fmt(eta) + ") = " + detail::fmt(m(eta)) + ")");
  if (m.bounded()) {
    const double s = m.ceiling - eta;
    if (!vanishes(s)) r.fail("m does not vanish at M (m(" + detail::fmt(s) + ") = " + detail::fmt(m(s)) + ")");
  }
  r.values["m_max_sampled"] = m_ref;
  return r;
}

/// (M-LSC): sup |m'| and sup(-m'' m) finite, judged by the absence of growth
/// over the last three decades (1e-11 to 1e-14) of a ladder approaching each
/// endpoint.
inline HypothesisReport validate_LSC(const Mobility& m) {
  HypothesisReport r("M-LSC");
  double sup_d1 = 0.0, sup_semi = 0.0;
  for (double s : detail::hypothesis_samples(m)) {
    sup_d1 = std::max(sup_d1, std::abs(m.d1(s)));
    sup_semi = std::max(sup_semi, -m.d2(s) * m(s));
  }
  const double a = detail::domain_scale(m);
  auto probe = [&](double s) { return std::pair{std::abs(m.d1(s)), -m.d2(s) * m(s)}; };
  std::vector<std::pair<double, bool>> ends{{0.0, true}};
  if (m.bounded()) ends.push_back({m.ceiling, false});
  for (auto [end, lower] : ends) {
    std::vector<std::pair<double, double>> ladder;
    for (int k = 2; k <= 14; ++k) {
      const double eta = a * std::pow(10.0, -k);
      const auto q = probe(lower ? eta : end - eta);
      ladder.push_back(q);
      sup_d1 = std::max(sup_d1, q.first);
      sup_semi = std::max(sup_semi, q.second);
    }
    const auto& q5 = ladder[ladder.size() - 4];
    const auto& q8 = ladder.back();
    const std::string where = lower ? "0" : "M";
    if (!std::isfinite(q8.first) || q8.first > 1.1 * q5.first + 1e-12)
      r.fail("|m'| grows approaching " + where + ": " + detail::fmt(q5.first) + " -> " + detail::fmt(q8.first));
    if (!std::isfinite(q8.second) || q8.second > 1.1 * std::max(q5.second, 0.0) + 1e-12)
      r.fail("-m''m grows approaching " + where + ": " + detail::fmt(q5.second) + " -> " + detail::fmt(q8.second));
  }
  r.values["sup_abs_m1"] = sup_d1;
  r.values["sup_minus_m2_m"] = sup_semi;
  return r;
}

/// (M1/2): sqrt(s) m'(s) -> 0 as s -> 0 (and sqrt(M - s) m'(s) -> 0 as
/// s -> M). Judged on decades 1e-2 ... 1e-8: the magnitude must not increase,
/// and must either fall below 1e-3 of its initial value or still decay at a
/// positive logarithmic rate over the last decade.
inline HypothesisReport validate_M_half(const Mobility& m) {
  HypothesisReport r("M-half");
  const double a = detail::domain_scale(m);
  std::vector<std::pair<double, bool>> ends{{0.0, true}};
  if (m.bounded()) ends.push_back({m.ceiling, false});
  for (auto [end, lower] : ends) {
    std::vector<double> q;
    for (int k = 2; k <= 8; ++k) {
      const double eta = a * std::pow(10.0, -k);
      const double s = lower ? eta : end - eta;
      q.push_back(std::sqrt(eta) * std::abs(m.d1(s)));
    }
    const std::string where = lower ? "0" : "M";
    bool monotone = true;
    for (std::size_t i = 1; i < q.size(); ++i)
      if (!std::isfinite(q[i]) || q[i] > q[i - 1] * (1.0 + 1e-9) + 1e-300) monotone = false;
    const double ratio = q.front() > 0.0 ? q.back() / q.front() : 0.0;
    const double rate = (q.back() > 0.0 && q[q.size() - 2] > 0.0) ? std::log10(q[q.size() - 2] / q.back()) : kInf;
    r.values["ratio_" + where] = ratio;
    r.values["terminal_rate_" + where] = rate;
    if (!monotone) r.fail("sqrt(eta) m' does not decay approaching " + where);
    else if (!(ratio <= 1e-3 || rate >= 5e-3))
      r.fail("sqrt(eta) m' stalls approaching " + where + " (rate " + detail::fmt(rate) + ")");
  }
  return r;
}

/// (G): m G'' >= -C (M finite) or m G'' >= -C(1 + m) (M infinite), plus the
/// growth condition P(s) / (s^q + |G(s)|) -> 0 on the ladder up to 1e6.
template <class PressureFn>
inline HypothesisReport validate_G(const Mobility& m, const FreeEnergy& G, PressureFn&& P, double q = 3.0) {
  HypothesisReport r("G");
  double C = 0.0;
  for (double s : detail::hypothesis_samples(m)) {
    const double v = m(s) * G.d2(s);
    if (std::isnan(v)) continue;
    const double lhs = m.bounded() ? -v : -v / (1.0 + m(s));
    C = std::max(C, lhs);
  }
  if (!std::isfinite(C) || C > 1e12) r.fail("m G'' unbounded below (C = " + detail::fmt(C) + ")");
  r.values["C"] = C;
  if (!m.bounded()) {
    r.values["q"] = q;
    std::vector<double> ratios;
    for (double s = 1e2; s <= 1e6 * 1.001; s *= 10.0) ratios.push_back(std::abs(P(s)) / (std::pow(s, q) + std::abs(G(s))));
    for (std::size_t i = 1; i < ratios.size(); ++i)
      if (ratios[i] > ratios[i - 1] * (1.0 + 1e-9) && ratios[i] > 1e-12) {
        r.fail("P(s)/(s^q+|G|) does not decay");
        break;
      }
    r.values["growth_ratio_1e6"] = ratios.back();
  }
  const double p0 = P(1e-8 * detail::domain_scale(m));
  if (!std::isfinite(p0)) r.fail("P not continuous at 0");
  return r;
}

}  // namespace wmflow
