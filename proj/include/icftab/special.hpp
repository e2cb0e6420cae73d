#pragma once

// Special functions behind the p-values of the detection tests and the
// Gaussian target transform. Everything is a survival function evaluated
// directly; tiny p-values never go through 1 - CDF.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "icftab/errors.hpp"

namespace icftab::special {

struct Tolerance {
  double abs_tol = 1e-12;
  int max_iter = 500;
};

namespace detail {

template <typename Real>
Real clamp01(Real v) {
  if (!(v > Real(0))) return Real(0);
  if (v > Real(1)) return Real(1);
  return v;
}

template <typename Real>
void check_tolerance(const Tolerance& tol) {
  if (!(tol.abs_tol > 0.0) || tol.max_iter < 1)
    throw std::invalid_argument("tolerance must have abs_tol > 0 and max_iter >= 1");
}

// log of x^s e^{-x} / Gamma(s)
template <typename Real>
Real gamma_prefactor_log(Real s, Real x) {
  using std::lgamma;
  using std::log;
  return s * log(x) - x - lgamma(s);
}

// Lower regularized gamma P(s, x) by its power series; valid for x < s + 1.
template <typename Real>
Real lower_gamma_series(Real s, Real x, const Tolerance& tol) {
  Real ap = s;
  Real term = Real(1) / s;
  Real sum = term;
  for (int n = 1; n <= tol.max_iter; ++n) {
    ap += Real(1);
    term *= x / ap;
    sum += term;
    if (std::abs(term) <= std::abs(sum) * Real(tol.abs_tol))
      return sum * std::exp(gamma_prefactor_log(s, x));
  }
  throw NumericalError("reg_upper_gamma: series did not converge");
}

// Upper regularized gamma Q(s, x) by modified Lentz continued fraction;
// valid for x >= s + 1.
template <typename Real>
Real upper_gamma_cf(Real s, Real x, const Tolerance& tol) {
  const Real tiny = std::numeric_limits<Real>::min() / std::numeric_limits<Real>::epsilon();
  Real b = x + Real(1) - s;
  Real c = Real(1) / tiny;
  Real d = Real(1) / b;
  Real h = d;
  for (int i = 1; i <= tol.max_iter; ++i) {
    const Real an = -Real(i) * (Real(i) - s);
    b += Real(2);
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = Real(1) / d;
    const Real delta = d * c;
    h *= delta;
    if (std::abs(delta - Real(1)) <= Real(tol.abs_tol))
      return std::exp(gamma_prefactor_log(s, x)) * h;
  }
  throw NumericalError("reg_upper_gamma: continued fraction did not converge");
}

// Continued fraction for I_x(a, b) (without the prefactor).
template <typename Real>
Real beta_cf(Real a, Real b, Real x, const Tolerance& tol) {
  const Real tiny = std::numeric_limits<Real>::min() / std::numeric_limits<Real>::epsilon();
  const Real qab = a + b;
  const Real qap = a + Real(1);
  const Real qam = a - Real(1);
  Real c = Real(1);
  Real d = Real(1) - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = Real(1) / d;
  Real h = d;
  for (int m = 1; m <= tol.max_iter; ++m) {
    const Real m2 = Real(2 * m);
    Real aa = Real(m) * (b - Real(m)) * x / ((qam + m2) * (a + m2));
    d = Real(1) + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = Real(1) + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = Real(1) / d;
    h *= d * c;
    aa = -(a + Real(m)) * (qab + Real(m)) * x / ((a + m2) * (qap + m2));
    d = Real(1) + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = Real(1) + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = Real(1) / d;
    const Real delta = d * c;
    h *= delta;
    if (std::abs(delta - Real(1)) <= Real(tol.abs_tol)) return h;
  }
  throw NumericalError("reg_inc_beta: continued fraction did not converge");
}

template <typename Real>
Real beta_front(Real a, Real b, Real x) {
  using std::lgamma;
  using std::log;
  using std::log1p;
  return std::exp(lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x));
}

}  // namespace detail

/// Upper regularized incomplete gamma Q(s, x) = Gamma(s, x) / Gamma(s).
template <typename Real = double>
Real reg_upper_gamma(Real s, Real x, const Tolerance& tol = {}) {
  detail::check_tolerance<Real>(tol);
  if (!(s > Real(0)) || !(x >= Real(0)))
    throw std::domain_error("reg_upper_gamma requires s > 0 and x >= 0");
  if (x == Real(0)) return Real(1);
  if (std::isinf(x)) return Real(0);
  if (x < s + Real(1))
    return detail::clamp01(Real(1) - detail::lower_gamma_series(s, x, tol));
  return detail::clamp01(detail::upper_gamma_cf(s, x, tol));
}

/// Survival function of the chi-square distribution with k degrees of freedom.
template <typename Real = double>
Real chi2_sf(Real x, Real k, const Tolerance& tol = {}) {
  if (!(k > Real(0))) throw std::domain_error("chi2_sf requires k > 0");
  if (!(x >= Real(0))) throw std::domain_error("chi2_sf requires x >= 0");
  return reg_upper_gamma(k / Real(2), x / Real(2), tol);
}

/// Regularized incomplete beta function I_x(a, b).
template <typename Real = double>
Real reg_inc_beta(Real a, Real b, Real x, const Tolerance& tol = {}) {
  detail::check_tolerance<Real>(tol);
  if (!(a > Real(0)) || !(b > Real(0)))
    throw std::domain_error("reg_inc_beta requires a > 0 and b > 0");
  if (!(x >= Real(0)) || !(x <= Real(1)))
    throw std::domain_error("reg_inc_beta requires x in [0, 1]");
  if (x == Real(0)) return Real(0);
  if (x == Real(1)) return Real(1);
  if (x > (a + Real(1)) / (a + b + Real(2))) {
    const Real y = Real(1) - x;
    const Real front = detail::beta_front(b, a, y);
    return detail::clamp01(Real(1) - front * detail::beta_cf(b, a, y, tol) / b);
  }
  const Real front = detail::beta_front(a, b, x);
  return detail::clamp01(front * detail::beta_cf(a, b, x, tol) / a);
}

/// Survival function of the F distribution with (d1, d2) degrees of freedom.
template <typename Real = double>
Real f_sf(Real x, Real d1, Real d2, const Tolerance& tol = {}) {
  if (!(d1 > Real(0)) || !(d2 > Real(0))) throw std::domain_error("f_sf requires positive dof");
  if (!(x >= Real(0))) throw std::domain_error("f_sf requires x >= 0");
  if (x == Real(0)) return Real(1);
  if (std::isinf(x)) return Real(0);
  // d2 / (d2 + d1 x) computed without forming 1 - (...)
  const Real arg = d2 / (d2 + d1 * x);
  return reg_inc_beta(d2 / Real(2), d1 / Real(2), arg, tol);
}

/// Standard normal CDF.
template <typename Real = double>
Real norm_cdf(Real x) {
  return Real(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Real>);
}

namespace detail {

// Acklam's rational approximation for the lower half, p in (0, 0.5].
template <typename Real>
Real norm_ppf_lower(Real p) {
  static constexpr Real a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr Real b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
  static constexpr Real c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr Real d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
  constexpr Real p_low = Real(0.02425);

  Real x;
  if (p < p_low) {
    const Real q = std::sqrt(Real(-2) * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + Real(1));
  } else {
    const Real q = p - Real(0.5);
    const Real r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + Real(1));
  }
  // One Halley step against the erfc-based CDF.
  const Real e = norm_cdf(x) - p;
  const Real u = e * std::sqrt(Real(2) * std::numbers::pi_v<Real>) * std::exp(x * x / Real(2));
  return x - u / (Real(1) + x * u / Real(2));
}

}  // namespace detail

/// Inverse of the standard normal CDF on (0, 1).
template <typename Real = double>
Real norm_ppf(Real p) {
  if (!(p > Real(0)) || !(p < Real(1))) throw std::domain_error("norm_ppf requires p in (0, 1)");
  if (p == Real(0.5)) return Real(0);
  if (p < Real(0.5)) return detail::norm_ppf_lower(p);
  return -detail::norm_ppf_lower(Real(1) - p);
}

}  // namespace icftab::special
