#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "params.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace crn {

struct SeriesNonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Truncation policy for the infinite p-series of the SNR CDFs. In adaptive mode
// a series stops once at least min_terms terms are in and the latest term moved
// the sum by at most rel_tol relatively. In fixed mode exactly max_terms terms
// are summed (used to reproduce convergence tables).
struct SeriesControl {
  double rel_tol = 1e-12;
  int min_terms = 15;
  int max_terms = 200;
  bool fixed_terms = false;

  static SeriesControl fixed(int terms) {
    SeriesControl c;
    c.min_terms = c.max_terms = terms;
    c.fixed_terms = true;
    return c;
  }

  void validate() const {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("SeriesControl: rel_tol must be > 0");
    if (min_terms < 1) throw std::invalid_argument("SeriesControl: min_terms must be >= 1");
    if (max_terms < min_terms) throw std::invalid_argument("SeriesControl: max_terms must be >= min_terms");
  }
};

struct AnalyticReport {
  double value = 0.0;
  std::vector<int> terms_used;
  std::vector<std::string> branch_taken;

  void absorb(const AnalyticReport& o) {
    terms_used.insert(terms_used.end(), o.terms_used.begin(), o.terms_used.end());
    branch_taken.insert(branch_taken.end(), o.branch_taken.begin(), o.branch_taken.end());
  }
};

struct Throughput {
  double total = 0.0;
  double primary = 0.0;
  double iot = 0.0;
};

struct CriticalMu {
  enum class Kind { crossing, always_better, never_better };
  Kind kind = Kind::crossing;
  double mu = 0.0;           // the crossing, or the feasibility bound for always_better
  double lower_bound = 0.0;  // gamma_th / (1 + gamma_th)
};

namespace detail {

using ld = long double;

// Equality branches fire below this relative gap of the two rate parameters.
inline constexpr ld branch_gap = 1e-9L;

inline bool nearly_equal(ld x, ld y) {
  return std::fabs(x - y) <= branch_gap * std::max(std::fabs(x), std::fabs(y));
}

inline double checked_probability(ld raw, const char* what) {
  if (!(raw >= -1e-9L && raw <= 1.0L + 1e-9L))
    throw NumericalError(std::string(what) + ": value " + std::to_string(static_cast<double>(raw)) +
                         " is outside [0, 1]");
  return static_cast<double>(std::clamp<ld>(raw, 0.0L, 1.0L));
}

inline ld binom(int n, int k) {
  ld r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline ld factorial(int n) {
  ld r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline ld ipow(ld x, int n) {
  ld r = 1;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// int_lo^hi y^n e^(lam y) dy
inline ld exp_moment(int n, ld lam, ld lo, ld hi) {
  if (lam == 0) return (ipow(hi, n + 1) - ipow(lo, n + 1)) / (n + 1);
  if (std::fabs(lam) * hi <= 2) {
    ld sum = 0, c = 1, phi = ipow(hi, n + 1), plo = ipow(lo, n + 1);
    for (int p = 0; p < 400; ++p) {
      const ld t = c * (phi - plo) / (n + p + 1);
      sum += t;
      if (std::fabs(t) <= std::fabs(sum) * std::numeric_limits<ld>::epsilon()) break;
      c *= lam / (p + 1);
      phi *= hi;
      plo *= lo;
    }
    return sum;
  }
  auto anti = [&](ld y) {
    ld s = 0;
    for (int p = 0; p <= n; ++p)
      s += binom(n, p) * ((p % 2) ? -1 : 1) * factorial(p) * ipow(y, n - p) / ipow(lam, p + 1);
    return std::exp(lam * y) * s;
  };
  return anti(hi) - anti(lo);
}

struct SeriesState {
  ld sum = 0;
  int terms = 0;
};

// Runs add_term(p) for p = 0, 1, ... under ctl and returns the accumulated sum.
template <class Term>
SeriesState run_series(const SeriesControl& ctl, Term&& add_term, const char* what) {
  SeriesState st;
  for (int p = 0; p < ctl.max_terms; ++p) {
    const ld t = add_term(p);
    st.sum += t;
    st.terms = p + 1;
    if (ctl.fixed_terms || st.terms < ctl.min_terms) continue;
    if (std::fabs(t) <= ctl.rel_tol * std::fabs(st.sum)) return st;
  }
  if (!ctl.fixed_terms)
    throw SeriesNonConvergence(std::string(what) + ": series did not reach rel_tol within " +
                               std::to_string(ctl.max_terms) + " terms");
  return st;
}

inline QuadratureSpec fallback_quadrature() {
  QuadratureSpec q;
  q.rel_tol = 1e-13;
  q.abs_tol = 1e-16;
  q.max_subdivisions = 20000;
  return q;
}

}  // namespace detail

// Probability that IoD i decodes both primary symbols in the MAC phase.
inline AnalyticReport decode_prob(Relay i, const SystemConfig& cfg, const DerivedConstants& dc,
                                  const SeriesControl& ctl = {}) {
  using detail::ld;
  ctl.validate();
  namespace sf = specfun;
  // Y carries PU_a's symbol, Z carries PU_b's.
  const int my = cfg.m(i, Pu::a), mz = cfg.m(i, Pu::b);
  const ld a = my / static_cast<ld>(dc.om(i, Pu::a));
  const ld b = mz / static_cast<ld>(dc.om(i, Pu::b));
  const ld rho_a = dc.rho[0], rho_b = dc.rho[1];
  const ld va = dc.varphi[0], vb = dc.varphi[1];
  const ld y0 = (vb - 1) / rho_a;
  const ld z0 = (va - 1) / rho_b;
  const ld c = dc.c[idx(i)];
  const ld d = dc.d[idx(i)];
  const ld theta = dc.theta[0];

  AnalyticReport rep;
  const bool equal = detail::nearly_equal(a / rho_a, b / rho_b);
  const ld lam = equal ? 0.0L : theta * b - a;
  rep.branch_taken.push_back(equal ? "decode.equal_rate_parameters" : "decode.distinct_rate_parameters");

  const ld head = sf::regularized_upper_gamma<ld>(mz, b * z0) * sf::regularized_upper_gamma<ld>(my, a * c);
  ld strip = 0;
  for (int k = 0; k < mz; ++k) {
    ld inner = 0;
    for (int q = 0; q <= k; ++q)
      inner += detail::binom(k, q) * detail::ipow(d, q) * detail::ipow(-theta, k - q) *
               detail::exp_moment(my + k - q - 1, lam, y0, c);
    strip += detail::ipow(b, k) / detail::factorial(k) * inner;
  }
  strip *= std::exp(my * std::log(a) - b * d - std::lgamma(static_cast<ld>(my)));
  rep.value = detail::checked_probability(head + strip, "decode_prob");
  return rep;
}

// CDF of the SNR at PU j for the copy relayed by IoD i, evaluated at gamma.
inline AnalyticReport cdf_primary_snr(Relay i, Pu j, double gamma, const SystemConfig& cfg,
                                      const DerivedConstants& dc, const SeriesControl& ctl = {}) {
  using detail::ld;
  ctl.validate();
  namespace sf = specfun;
  if (!(gamma > 0.0)) throw std::domain_error("cdf_primary_snr: gamma must be > 0");
  AnalyticReport rep;
  const ld mu = cfg.mu(i);
  const ld g = gamma;
  const ld phi = mu - (1 - mu) * g;
  if (phi <= 0) {
    rep.value = 1.0;
    rep.branch_taken.push_back("primary_cdf.infeasible_mu");
    return rep;
  }
  const Pu jh = other(j);
  const int my = cfg.m(i, j), mz = cfg.m(i, jh);
  const ld a = my / static_cast<ld>(dc.om(i, j));
  const ld b = mz / static_cast<ld>(dc.om(i, jh));
  const ld zj = dc.zt(i, j), zjh = dc.zt(i, jh);
  const ld yh = std::sqrt(g / (zj * phi));
  const ld big_a = b * g / (phi * zjh);
  const bool equal = detail::nearly_equal(b * zj / zjh, a);
  const ld lam = equal ? 0.0L : b * zj / zjh - a;

  if (!equal && std::fabs(lam) * yh > 16) {
    // The Taylor expansion of e^(lam y) would need too many terms or cancel
    // past extended precision; integrate the conditional CDF directly.
    auto f = [&](ld y) -> ld {
      if (y <= 0) return 0;
      const ld fy = std::exp(my * std::log(a) + (my - 1) * std::log(y) - a * y - std::lgamma(static_cast<ld>(my)));
      const ld arg = b * (g - zj * phi * y * y) / (phi * zjh * y);
      return fy * sf::regularized_lower_gamma<ld>(mz, std::max<ld>(arg, 0));
    };
    auto q = integrate(f, 0.0L, yh, detail::fallback_quadrature());
    if (!q.converged) throw NumericalError("cdf_primary_snr: quadrature fallback did not converge");
    rep.value = detail::checked_probability(q.value, "cdf_primary_snr");
    rep.branch_taken.push_back("primary_cdf.quadrature");
    return rep;
  }
  rep.branch_taken.push_back(equal ? "primary_cdf.equal_rate_parameters" : "primary_cdf.distinct_rate_parameters");

  struct Coef {
    ld c;
    int m_exp;
  };
  std::vector<Coef> coefs;
  const ld lead = std::exp(my * std::log(a) - std::lgamma(static_cast<ld>(my)));
  for (int k = 0; k < mz; ++k)
    for (int n = 0; n <= k; ++n) {
      const ld c = lead * detail::ipow(b / (phi * zjh), k) / detail::factorial(k) * detail::binom(k, n) *
                   detail::ipow(g, n) * detail::ipow(-zj * phi, k - n);
      coefs.push_back({c, my + k - 2 * n});
    }

  const ld first = sf::regularized_lower_gamma<ld>(my, a * yh);
  ld series;
  if (equal) {
    // only the p = 0 term survives
    series = 0;
    for (const auto& c : coefs) series += c.c * sf::inv_exp_moment_integral<ld>(c.m_exp, big_a, yh);
    rep.terms_used.push_back(1);
  } else {
    ld lp = 1;  // lam^p / p!
    auto st = detail::run_series(
        ctl,
        [&](int p) {
          if (p > 0) lp *= lam / p;
          ld t = 0;
          for (const auto& c : coefs) t += c.c * sf::inv_exp_moment_integral<ld>(c.m_exp + p, big_a, yh);
          return lp * t;
        },
        "cdf_primary_snr");
    series = st.sum;
    rep.terms_used.push_back(st.terms);
  }
  rep.value = detail::checked_probability(first - series, "cdf_primary_snr");
  return rep;
}

// Outage probability of the PU_jhat -> PU_j link (the copy that PU j receives).
inline AnalyticReport primary_outage(Pu j, const SystemConfig& cfg, const DerivedConstants& dc,
                                     const SeriesControl& ctl = {}) {
  AnalyticReport rep;
  const auto q1r = decode_prob(Relay::iod1, cfg, dc, ctl);
  const auto q2r = decode_prob(Relay::iod2, cfg, dc, ctl);
  const auto f1r = cdf_primary_snr(Relay::iod1, j, dc.gamma_th, cfg, dc, ctl);
  const auto f2r = cdf_primary_snr(Relay::iod2, j, dc.gamma_th, cfg, dc, ctl);
  for (const auto* r : {&q1r, &q2r, &f1r, &f2r}) rep.absorb(*r);
  const long double q1 = q1r.value, q2 = q2r.value, f1 = f1r.value, f2 = f2r.value;
  const long double p = q1 * q2 * f1 * f2 + q1 * (1 - q2) * f1 + (1 - q1) * q2 * f2 + (1 - q1) * (1 - q2);
  rep.value = detail::checked_probability(p, "primary_outage");
  return rep;
}

// CDF of the SNR at IoD ihat of the IoT symbol sent by IoD i, evaluated at gammabar.
inline AnalyticReport cdf_iot_snr(Relay i, double gammabar, const SystemConfig& cfg, const DerivedConstants& dc,
                                  const SeriesControl& ctl = {}) {
  using detail::ld;
  ctl.validate();
  namespace sf = specfun;
  if (!(gammabar > 0.0)) throw std::domain_error("cdf_iot_snr: gammabar must be > 0");
  AnalyticReport rep;

  // Label the two harvesting links so that the Taylor ratio stays <= 1.
  Pu py = Pu::a, pz = Pu::b;
  {
    const ld ay = cfg.m(i, Pu::a) / static_cast<ld>(dc.om(i, Pu::a));
    const ld bz = cfg.m(i, Pu::b) / static_cast<ld>(dc.om(i, Pu::b));
    if (bz * dc.zt(i, Pu::a) / dc.zt(i, Pu::b) > ay) std::swap(py, pz);
  }
  rep.branch_taken.push_back(py == Pu::a ? "iot_cdf.expand_pu_a" : "iot_cdf.expand_pu_b");

  const int my = cfg.m(i, py), mz = cfg.m(i, pz), mx = cfg.m_12;
  const ld a = my / static_cast<ld>(dc.om(i, py));
  const ld b = mz / static_cast<ld>(dc.om(i, pz));
  const ld cx = mx / static_cast<ld>(dc.omega_12);
  const ld zy = dc.zt(i, py), zz = dc.zt(i, pz);
  const ld one_mu = 1 - static_cast<ld>(cfg.mu(i));
  const ld gb = gammabar;
  const ld alpha = a * gb / (one_mu * zy);
  const ld betap = b * gb / (one_mu * zz);
  const ld lgx = std::lgamma(static_cast<ld>(mx));

  // 2 (u/cx)^(v/2) K_v(2 sqrt(u cx)) * cx^mx / Gamma(mx), the mean of x^(mx-v-...)
  // terms against the Gamma(mx) density; computed in logs to keep range.
  auto bessel_term = [&](ld u, int v, ld kv) -> ld {
    if (kv == 0) return 0;
    return 2 * std::exp(v / 2.0L * std::log(u / cx) + mx * std::log(cx) - lgx) * kv;
  };

  // first part
  ld first = 1;
  {
    const ld z = 2 * std::sqrt(alpha * cx);
    const auto ks = sf::bessel_k_sequence<ld>(std::max(mx, my), z);
    for (int q = 0; q < my; ++q) {
      const int v = mx - q;
      const ld kv = ks[std::abs(v)];
      first -= std::exp(q * std::log(alpha) - std::lgamma(static_cast<ld>(q + 1))) * bessel_term(alpha, v, kv);
    }
  }

  const int kmax = mz - 1;
  const ld zb = 2 * std::sqrt(betap * cx);
  const ld zab = 2 * std::sqrt((betap + alpha) * cx);
  const auto kb = sf::bessel_k_sequence<ld>(mx + mz, zb);
  std::vector<ld> kb_term(mz);
  for (int s = 0; s < mz; ++s) kb_term[s] = bessel_term(betap, mx - s, kb[std::abs(mx - s)]);

  // H[w] = bessel_term(beta'+alpha, mx - w); extended on demand as l grows.
  std::vector<ld> kab = sf::bessel_k_sequence<ld>(mx + 8, zab);
  std::vector<ld> h;
  auto h_at = [&](int w) -> ld {
    while (static_cast<int>(h.size()) <= w) {
      const int ww = static_cast<int>(h.size());
      const int order = std::abs(mx - ww);
      while (static_cast<int>(kab.size()) <= order) {
        const int n = static_cast<int>(kab.size());
        kab.push_back(kab[n - 2] + 2 * (n - 1) / zab * kab[n - 1]);
      }
      h.push_back(bessel_term(betap + alpha, mx - ww, kab[order]));
    }
    return h[w];
  };
  // alpha^l / l!
  std::vector<ld> al{1};
  auto al_at = [&](int l) -> ld {
    while (static_cast<int>(al.size()) <= l) al.push_back(al.back() * alpha / static_cast<ld>(al.size()));
    return al[l];
  };

  struct KS {
    ld coef;   // everything but the p-dependent factors
    int s;
    int n0;    // m_y + k - s
    ld lsum;   // running sum_{l<N} alpha^l/l! H[s+l]
    int lcount;
  };
  std::vector<KS> ks;
  for (int k = 0; k <= kmax; ++k)
    for (int s = 0; s <= k; ++s) {
      const ld c = detail::ipow(b / (one_mu * zz), k) / detail::factorial(k) * detail::binom(k, s) *
                   detail::ipow(gb, s) * ((k - s) % 2 ? -1 : 1) * detail::ipow(one_mu * zy, k - s) *
                   std::exp((s - k) * std::log(a) - std::lgamma(static_cast<ld>(my)));
      ks.push_back({c, s, my + k - s, 0.0L, 0});
    }

  const ld tay = b * zy / zz;  // Taylor rate of e^{(b zy/zz) y}
  ld tp = 1;                   // (tay/a)^p / p!
  auto st = detail::run_series(
      ctl,
      [&](int p) {
        if (p > 0) tp *= tay / a / p;
        ld t = 0;
        for (auto& e : ks) {
          const int n = p + e.n0;
          while (e.lcount < n) {
            e.lsum += al_at(e.lcount) * h_at(e.s + e.lcount);
            ++e.lcount;
          }
          const ld bracket = kb_term[e.s] - e.lsum;
          t += e.coef * std::exp(std::lgamma(static_cast<ld>(n))) * bracket;
        }
        return tp * t;
      },
      "cdf_iot_snr");
  rep.terms_used.push_back(st.terms);
  rep.value = detail::checked_probability(first - st.sum, "cdf_iot_snr");
  return rep;
}

// Outage probability of the IoT link received by IoD ihat (sent by the other IoD).
inline AnalyticReport iot_outage(Relay receiver, const SystemConfig& cfg, const DerivedConstants& dc,
                                 const SeriesControl& ctl = {}) {
  const Relay sender = other(receiver);
  AnalyticReport rep;
  const auto qs = decode_prob(sender, cfg, dc, ctl);
  const auto qr = decode_prob(receiver, cfg, dc, ctl);
  const auto f = cdf_iot_snr(sender, dc.gammabar[idx(receiver)], cfg, dc, ctl);
  for (const auto* r : {&qs, &qr, &f}) rep.absorb(*r);
  const long double p = 1.0L - static_cast<long double>(qs.value) * qr.value * (1.0L - f.value);
  rep.value = detail::checked_probability(p, "iot_outage");
  return rep;
}

// Outage of the direct PU_jhat -> PU_j link with pre-log 1/2.
inline double direct_outage(Pu j, const SystemConfig& cfg, const DerivedConstants& dc) {
  if (!cfg.direct || !dc.omega_ab) throw ConfigError("direct_outage: direct link parameters are not configured");
  const int m = cfg.direct->m_ab;
  const long double x = m * static_cast<long double>(dc.gammatilde[idx(j)]) /
                        (static_cast<long double>(*dc.omega_ab) * dc.rho[idx(other(j))]);
  return static_cast<double>(specfun::regularized_lower_gamma<long double>(m, x));
}

inline double direct_outage(Pu j, const SystemConfig& cfg) { return direct_outage(j, cfg, derive(cfg)); }

inline Throughput throughput(const SystemConfig& cfg, const DerivedConstants& dc, const SeriesControl& ctl = {}) {
  const double pre = (1.0 - cfg.beta) / 3.0;
  const double pa = primary_outage(Pu::a, cfg, dc, ctl).value;
  const double pb = primary_outage(Pu::b, cfg, dc, ctl).value;
  const double p1 = iot_outage(Relay::iod1, cfg, dc, ctl).value;
  const double p2 = iot_outage(Relay::iod2, cfg, dc, ctl).value;
  Throughput t;
  t.primary = pre * ((1.0 - pa) * cfg.r_a + (1.0 - pb) * cfg.r_b);
  // IoD_1 receives IoD_2's symbol at rate r_2 and vice versa
  t.iot = pre * ((1.0 - p1) * cfg.r_2 + (1.0 - p2) * cfg.r_1);
  t.total = t.primary + t.iot;
  return t;
}

inline double energy_efficiency(const Throughput& t, const SystemConfig& cfg) {
  return t.total / ((1.0 + 2.0 * cfg.beta) / 3.0 * (cfg.p_a + cfg.p_b));
}

inline double energy_efficiency(const SystemConfig& cfg, const DerivedConstants& dc, const SeriesControl& ctl = {}) {
  return energy_efficiency(throughput(cfg, dc, ctl), cfg);
}

// Smallest symmetric mu at which the relayed outage of PU j matches the direct
// link. Assumes the outage is monotone in mu; a 10-point pre-scan checks this
// and a dense scan locates the first crossing when it is not.
inline CriticalMu critical_mu(Pu j, const SystemConfig& cfg, const SeriesControl& ctl = {}) {
  SystemConfig c = cfg;
  const DerivedConstants base = derive(c);
  const double target = direct_outage(j, c, base);
  CriticalMu out;
  out.lower_bound = base.gamma_th / (1.0 + base.gamma_th);
  auto gap = [&](double mu) {
    c.set_mu(mu);
    return primary_outage(j, c, derive(c), ctl).value - target;
  };
  const double span = 1.0 - out.lower_bound;
  const double lo = out.lower_bound + 1e-9 * span;
  const double hi = 1.0 - 1e-9;

  if (gap(lo) <= 0.0) {
    out.kind = CriticalMu::Kind::always_better;
    out.mu = out.lower_bound;
    return out;
  }
  if (gap(hi) > 0.0) {
    out.kind = CriticalMu::Kind::never_better;
    out.mu = 1.0;
    return out;
  }

  auto scan = [&](int n, double& a, double& b) {
    double prev_mu = lo, prev = gap(lo);
    bool monotone = true;
    bool found = false;
    for (int k = 1; k <= n; ++k) {
      const double mu = lo + (hi - lo) * k / n;
      const double g = gap(mu);
      if (g > prev + 1e-12) monotone = false;
      if (!found && g <= 0.0) {
        a = prev_mu;
        b = mu;
        found = true;
      }
      prev_mu = mu;
      prev = g;
    }
    return monotone;
  };
  double a = lo, b = hi;
  if (!scan(10, a, b)) scan(400, a, b);
  for (int it = 0; it < 200 && b - a > 1e-4; ++it) {
    const double m = 0.5 * (a + b);
    (gap(m) > 0.0 ? a : b) = m;
  }
  if (b - a > 1e-4) throw NumericalError("critical_mu: bisection did not converge");
  out.kind = CriticalMu::Kind::crossing;
  out.mu = 0.5 * (a + b);
  return out;
}

}  // namespace crn
