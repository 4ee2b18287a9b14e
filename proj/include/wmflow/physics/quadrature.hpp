#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "wmflow/errors.hpp"

namespace wmflow::quad {

/// Signed integral over [a, b] with tanh-sinh, which tolerates integrable
/// endpoint singularities. Throws QuadratureFailure above `tol` (relative to
/// the L1 norm of the integrand).
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-10) {
  if (a == b) return 0.0;
  const double sign = (a < b) ? 1.0 : -1.0;
  const double lo = std::min(a, b), hi = std::max(a, b);
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
  double error = 0.0, l1 = 0.0;
  double value = 0.0;
  try {
    value = integrator.integrate(f, lo, hi, std::sqrt(std::numeric_limits<double>::epsilon()) * 1e-2,
                                 &error, &l1);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::QuadratureFailure, std::string("tanh-sinh: ") + e.what());
  }
  if (!std::isfinite(value)) return sign * value;
  if (error > tol * std::max(1.0, l1))
    throw Error(ErrorKind::QuadratureFailure,
                "estimated error " + std::to_string(error) + " above tolerance");
  return sign * value;
}

/// Adaptive Gauss-Kronrod for smooth (possibly kinked) integrands.
template <class F>
double integrate_smooth(F&& f, double a, double b, double tol = 1e-10) {
  if (a == b) return 0.0;
  double error = 0.0, l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-13, &error, &l1);
  if (error > tol * std::max(1.0, l1))
    throw Error(ErrorKind::QuadratureFailure, "gauss-kronrod did not converge");
  return value;
}

/// Root of a monotone function bracketed by [lo, hi] to ~1e-15 relative.
template <class F>
double bisect_root(F&& f, double lo, double hi) {
  const double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw Error(ErrorKind::InvalidArgument, "bisect_root: root not bracketed");
  std::uintmax_t iters = 400;
  const auto r = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace wmflow::quad
