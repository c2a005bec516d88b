#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"

// Special functions for the outage expressions. Everything is templated on the
// floating type; the analytic engine instantiates long double so that the
// alternating series it feeds keep their digits.
namespace crn::specfun {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

namespace detail {

template <std::floating_point Real>
constexpr Real eps() {
  return std::numeric_limits<Real>::epsilon();
}

inline void domain_check(bool ok, const char* fn, const char* what) {
  if (!ok) throw DomainError(std::string(fn) + ": " + what);
}

// Taylor coefficients of 1/Gamma(1+z) about z = 0.
inline constexpr std::array<long double, 31> rgamma1p_coef = {
    1.0L,
    0.577215664901532860607L,
    -0.655878071520253881077L,
    -0.042002635034095235529L,
    0.166538611382291489502L,
    -0.0421977345555443367482L,
    -0.00962197152787697356211L,
    0.0072189432466630995424L,
    -0.00116516759185906511211L,
    -0.000215241674114950972816L,
    0.000128050282388116186153L,
    -0.0000201348547807882386557L,
    -0.00000125049348214267065735L,
    0.00000113302723198169588237L,
    -2.05633841697760710345e-7L,
    6.11609510448141581786e-9L,
    5.00200764446922293006e-9L,
    -1.18127457048702014459e-9L,
    1.04342671169110051049e-10L,
    7.78226343990507125405e-12L,
    -3.69680561864220570819e-12L,
    5.10037028745447597902e-13L,
    -2.05832605356650678322e-14L,
    -5.34812253942301798237e-15L,
    1.22677862823826079016e-15L,
    -1.18125930169745876951e-16L,
    1.18669225475160033258e-18L,
    1.41238065531803178156e-18L,
    -2.29874568443537020659e-19L,
    1.71440632192733743338e-20L,
    1.33735173049369311486e-22L};

// (Gamma(1+a) - 1) / a, finite at a = 0 where it equals -gamma_E.
template <std::floating_point Real>
Real gamma1pm1_over_a(Real a) {
  if (std::fabs(a) > Real(0.5)) return (std::tgamma(1 + a) - 1) / a;
  // 1/Gamma(1+a) = 1 + a*s(a); Gamma(1+a) - 1 = -a*s / (1 + a*s)
  Real s = 0;
  for (int k = static_cast<int>(rgamma1p_coef.size()) - 1; k >= 1; --k)
    s = s * a + static_cast<Real>(rgamma1p_coef[k]);
  return -s / (1 + a * s);
}

// S(a, x) = e^x x^-a Gamma(a, x) by Lentz continued fraction.
template <std::floating_point Real>
Real scaled_gamma_cf(Real a, Real x) {
  const Real tiny = std::numeric_limits<Real>::min() / eps<Real>();
  Real b = x + 1 - a;
  Real c = 1 / tiny;
  Real d = 1 / b;
  Real h = d;
  for (int i = 1; i < 100000; ++i) {
    const Real an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1 / d;
    const Real del = d * c;
    h *= del;
    if (std::fabs(del - 1) <= eps<Real>()) return h;
  }
  throw std::runtime_error("upper_incomplete_gamma: continued fraction did not converge");
}

// S(a, x) from Gamma(a) - gamma(a, x), used for a > 0 with x <= a + 1.
template <std::floating_point Real>
Real scaled_gamma_complement(Real a, Real x) {
  Real term = 1 / a, sum = term;
  for (int k = 1; k < 100000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (term <= sum * eps<Real>()) break;
  }
  return std::exp(x - a * std::log(x) + std::lgamma(a)) - sum;
}

// Gamma(a, x) for 0 <= a <= 1 and 0 < x < 1 without cancellation at small a.
template <std::floating_point Real>
Real upper_gamma_small(Real a, Real x) {
  const Real lx = std::log(x);
  Real head;
  if (a == 0)
    head = -std::numbers::egamma_v<Real> - lx;
  else
    head = gamma1pm1_over_a(a) - std::expm1(a * lx) / a;
  Real term = 1, sum = 0;
  for (int k = 1; k < 1000; ++k) {
    term *= -x / k;
    const Real t = term / (a + k);
    sum += t;
    if (std::fabs(t) <= std::fabs(sum) * eps<Real>()) break;
  }
  return head - std::exp(a * lx) * sum;
}

}  // namespace detail

// U(1, 1 + a, x) = e^x x^-a Gamma(a, x) for any real a and x > 0. This is the
// overflow-safe core behind the incomplete gamma and Whittaker routines.
template <std::floating_point Real>
Real scaled_upper_gamma(Real a, Real x) {
  detail::domain_check(x > 0, "upper_incomplete_gamma", "x must be > 0");
  if (x >= 1 && (a <= 0 || x > a + 1)) return detail::scaled_gamma_cf(a, x);
  if (a > 1 || (a > 0 && x >= 1)) return detail::scaled_gamma_complement(a, x);
  if (a > 0) return std::exp(x - a * std::log(x)) * detail::upper_gamma_small(a, x);
  // a <= 0, x < 1: seed at a0 in [0, 1) and recur downward on the scaled
  // function, S(a) = (x S(a + 1) - 1) / a.
  const int n = static_cast<int>(std::ceil(-a));
  const Real a0 = a + n;
  Real s = std::exp(x - a0 * std::log(x)) * detail::upper_gamma_small(a0, x);
  for (int k = 1; k <= n; ++k) {
    const Real ak = a0 - k;
    s = (x * s - 1) / ak;
  }
  return s;
}

// U(1, b, z), the only confluent hypergeometric family the outage formulas need.
template <std::floating_point Real>
Real hypergeometric_u1(Real b, Real z) {
  detail::domain_check(z > 0, "hypergeometric_u1", "z must be > 0");
  return scaled_upper_gamma(b - 1, z);
}

// Gamma(s, x) for real s of either sign. Returns +inf when the value exceeds
// the range of Real.
template <std::floating_point Real>
Real upper_incomplete_gamma(Real s, Real x) {
  detail::domain_check(x > 0, "upper_incomplete_gamma", "x must be > 0");
  const Real sc = scaled_upper_gamma(s, x);
  return std::exp(s * std::log(x) - x) * sc;
}

// Q(m, x) = e^-x sum_{k<m} x^k/k!, exact for integer m and free of cancellation.
template <std::floating_point Real>
Real regularized_upper_gamma(int m, Real x) {
  detail::domain_check(m >= 1, "regularized_upper_gamma", "m must be >= 1");
  detail::domain_check(x >= 0, "regularized_upper_gamma", "x must be >= 0");
  if (x == 0) return 1;
  Real term = 1, sum = 1;
  for (int k = 1; k < m; ++k) {
    term *= x / k;
    sum += term;
  }
  return std::exp(-x) * sum;
}

// P(m, x) = gamma(m, x) / (m-1)!.
template <std::floating_point Real>
Real regularized_lower_gamma(int m, Real x) {
  detail::domain_check(m >= 1, "regularized_lower_gamma", "m must be >= 1");
  detail::domain_check(x >= 0, "regularized_lower_gamma", "x must be >= 0");
  if (x == 0) return 0;
  if (x >= m + 1) return 1 - regularized_upper_gamma(m, x);
  // tail of the exponential series, sum_{k>=m} e^-x x^k/k!
  Real term = 1, sum = 1;
  for (int k = 1; k < 100000; ++k) {
    term *= x / (m + k);
    sum += term;
    if (term <= sum * detail::eps<Real>()) break;
  }
  return std::exp(m * std::log(x) - x - std::lgamma(Real(m + 1))) * sum;
}

// Upsilon(m, x) = int_0^x t^(m-1) e^-t dt for integer m >= 1.
template <std::floating_point Real>
Real lower_incomplete_gamma(int m, Real x) {
  detail::domain_check(m >= 1, "lower_incomplete_gamma", "m must be >= 1");
  detail::domain_check(x >= 0, "lower_incomplete_gamma", "x must be >= 0");
  return std::exp(std::lgamma(Real(m))) * regularized_lower_gamma(m, x);
}

namespace detail {

// K_mu and K_{mu+1} for |mu| <= 1/2 (Temme series for x < 2, Steed's CF2 otherwise).
template <std::floating_point Real>
void bessel_k_pair(Real mu, Real x, Real& kmu, Real& kmu1) {
  const Real pi = std::numbers::pi_v<Real>;
  const Real tol = eps<Real>();
  if (x < 2) {
    const Real x2 = x / 2;
    const Real pimu = pi * mu;
    const Real fact = std::fabs(pimu) < tol ? Real(1) : pimu / std::sin(pimu);
    const Real d = -std::log(x2);
    const Real e = mu * d;
    const Real fact2 = std::fabs(e) < tol ? Real(1) : std::sinh(e) / e;
    // gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
    Real gam1 = 0, gam2 = 0, mup = 1;
    for (std::size_t k = 0; k < rgamma1p_coef.size(); ++k) {
      const Real ck = static_cast<Real>(rgamma1p_coef[k]);
      if (k % 2 == 0) {
        gam2 += ck * mup;
      } else {
        gam1 -= ck * mup;
        mup *= mu * mu;
      }
    }
    const Real gampl = gam2 - mu * gam1;  // 1/G(1+mu)
    const Real gammi = gam2 + mu * gam1;  // 1/G(1-mu)
    Real ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    Real sum = ff;
    const Real ee = std::exp(e);
    Real p = ee / (2 * gampl);
    Real q = 1 / (2 * ee * gammi);
    Real c = 1;
    const Real dd = x2 * x2;
    Real sum1 = p;
    for (int i = 1; i < 10000; ++i) {
      ff = (i * ff + p + q) / (i * i - mu * mu);
      c *= dd / i;
      p /= i - mu;
      q /= i + mu;
      const Real del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::fabs(del) < std::fabs(sum) * tol) break;
    }
    kmu = sum;
    kmu1 = sum1 / x2;
  } else {
    Real b = 2 * (1 + x);
    Real d = 1 / b;
    Real h = d, delh = d;
    Real q1 = 0, q2 = 1;
    const Real a1 = Real(0.25) - mu * mu;
    Real q = a1, c = a1, a = -a1;
    Real s = 1 + q * delh;
    for (int i = 2; i < 100000; ++i) {
      a -= 2 * (i - 1);
      c = -a * c / i;
      const Real qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2;
      d = 1 / (b + a * d);
      delh = (b * d - 1) * delh;
      h += delh;
      const Real dels = q * delh;
      s += dels;
      if (std::fabs(dels / s) < tol) break;
    }
    kmu = std::sqrt(pi / (2 * x)) * std::exp(-x) / s;
    kmu1 = kmu * (mu + x + Real(0.5) - a1 * h) / x;
  }
}

}  // namespace detail

// Modified Bessel function of the second kind for real order. Throws
// std::overflow_error when the result is not representable; underflow
// returns 0.
template <std::floating_point Real>
Real bessel_k(Real v, Real x) {
  detail::domain_check(x > 0, "bessel_k", "x must be > 0");
  v = std::fabs(v);
  const int n = static_cast<int>(std::floor(v + Real(0.5)));
  const Real mu = v - n;
  Real k0, k1;
  detail::bessel_k_pair(mu, x, k0, k1);
  for (int i = 1; i <= n; ++i) {
    const Real kn = (mu + i) * 2 / x * k1 + k0;
    k0 = k1;
    k1 = kn;
  }
  if (!std::isfinite(k0)) throw std::overflow_error("bessel_k: result overflows");
  return k0;
}

// K_0(x) .. K_n(x) for integer orders by forward recurrence.
template <std::floating_point Real>
std::vector<Real> bessel_k_sequence(int n, Real x) {
  detail::domain_check(x > 0, "bessel_k", "x must be > 0");
  detail::domain_check(n >= 0, "bessel_k", "order count must be >= 0");
  std::vector<Real> k(n + 1);
  Real k0, k1;
  detail::bessel_k_pair(Real(0), x, k0, k1);
  k[0] = k0;
  if (n >= 1) k[1] = k1;
  for (int i = 2; i <= n; ++i) k[i] = k[i - 2] + 2 * (i - 1) / x * k[i - 1];
  if (!std::isfinite(k[n])) throw std::overflow_error("bessel_k: result overflows");
  return k;
}

// Whittaker W_{kappa,mu}(z) on the index family with mu - kappa + 1/2 = 1 (or
// its mirror under mu -> -mu), where W reduces to U(1, 1 + 2mu, z).
template <std::floating_point Real>
Real whittaker_w(Real kappa, Real mu, Real z) {
  detail::domain_check(z > 0, "whittaker_w", "z must be > 0");
  const Real tol = 64 * detail::eps<Real>() * (1 + std::fabs(mu) + std::fabs(kappa));
  if (std::fabs(mu - kappa - Real(0.5)) > tol) {
    if (std::fabs(-mu - kappa - Real(0.5)) > tol)
      throw DomainError("whittaker_w: only indices with mu - kappa + 1/2 = 1 (up to the sign of mu) are supported");
    mu = -mu;
  }
  // e^{-z/2} z^{mu+1/2} U(1, 1+2mu, z)
  return std::exp((mu + Real(0.5)) * std::log(z) - z / 2) * scaled_upper_gamma(2 * mu, z);
}

// int_0^{y_hi} y^(m_exp - 1) e^(-a/y) dy = a^m_exp Gamma(-m_exp, a/y_hi).
template <std::floating_point Real>
Real inv_exp_moment_integral(int m_exp, Real a, Real y_hi) {
  detail::domain_check(a > 0, "inv_exp_moment_integral", "a must be > 0");
  detail::domain_check(y_hi > 0, "inv_exp_moment_integral", "y_hi must be > 0");
  const Real x = a / y_hi;
  return std::exp(m_exp * std::log(y_hi) - x) * scaled_upper_gamma(Real(-m_exp), x);
}

// The same integral through the Whittaker form printed with the closed-form CDF:
// a^((m-1)/2) y^((m+1)/2) e^(-a/(2y)) W_{-(m+1)/2, -m/2}(a/y).
template <std::floating_point Real>
Real inv_exp_moment_integral_whittaker(int m_exp, Real a, Real y_hi) {
  detail::domain_check(a > 0, "inv_exp_moment_integral", "a must be > 0");
  detail::domain_check(y_hi > 0, "inv_exp_moment_integral", "y_hi must be > 0");
  const Real x = a / y_hi;
  const Real m = m_exp;
  const Real w = whittaker_w(-(m + 1) / 2, -m / 2, x);
  return std::exp((m - 1) / 2 * std::log(a) + (m + 1) / 2 * std::log(y_hi) - x / 2) * w;
}

// Quadrature references over each function's defining integral. These are the
// oracles behind the test suite and the CLI's --oracle switch.
namespace oracle {

inline long double lower_incomplete_gamma(int m, long double x, const QuadratureSpec& q = {}) {
  return crn::oracle([m](long double t) { return std::pow(t, m - 1) * std::exp(-t); }, 0.0L, x, q);
}

inline long double upper_incomplete_gamma(long double s, long double x, const QuadratureSpec& q = {}) {
  // t = x + u keeps the integrand smooth near the lower limit
  return crn::oracle_to_inf(
      [s, x](long double u) { return std::exp((s - 1) * std::log(x + u) - (x + u)); }, 0.0L, q);
}

inline long double bessel_k(long double v, long double x, const QuadratureSpec& q = {}) {
  return crn::oracle_to_inf(
      [v, x](long double t) {
        const long double arg = -x * std::cosh(t) + std::fabs(v) * t;
        if (arg < -11000.0L) return 0.0L;
        return 0.5L * std::exp(arg) * (1.0L + std::exp(-2.0L * std::fabs(v) * t));
      },
      0.0L, q);
}

inline long double inv_exp_moment_integral(int m_exp, long double a, long double y_hi,
                                           const QuadratureSpec& q = {}) {
  return crn::oracle(
      [m_exp, a](long double y) {
        if (y <= 0.0L) return 0.0L;
        return std::exp((m_exp - 1) * std::log(y) - a / y);
      },
      0.0L, y_hi, q);
}

// W_{kappa,mu}(z) = z^{mu+1/2} e^{-z/2} / Gamma(mu - kappa + 1/2)
//                   * int_0^inf e^{-zt} t^{mu-kappa-1/2} (1+t)^{mu+kappa-1/2} dt
inline long double whittaker_w(long double kappa, long double mu, long double z,
                               const QuadratureSpec& q = {}) {
  const long double a = mu - kappa + 0.5L;
  if (!(a > 0)) throw DomainError("whittaker_w oracle: needs mu - kappa + 1/2 > 0");
  const long double integral = crn::oracle_to_inf(
      [=](long double t) {
        if (t <= 0.0L && a < 1.0L) return 0.0L;
        return std::exp(-z * t + (a - 1) * std::log(t) + (mu + kappa - 0.5L) * std::log1p(t));
      },
      0.0L, q);
  return std::exp((mu + 0.5L) * std::log(z) - z / 2 - std::lgamma(a)) * integral;
}

}  // namespace oracle

}  // namespace crn::specfun
