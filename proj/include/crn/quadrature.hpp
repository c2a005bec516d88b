#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace crn {

struct QuadratureSpec {
  double rel_tol = 1e-12;
  double abs_tol = 0.0;
  int max_subdivisions = 4000;

  void validate() const {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("QuadratureSpec: rel_tol must be > 0");
    if (abs_tol < 0.0) throw std::invalid_argument("QuadratureSpec: abs_tol must be >= 0");
    if (max_subdivisions < 1) throw std::invalid_argument("QuadratureSpec: max_subdivisions must be >= 1");
  }
};

struct QuadratureResult {
  long double value = 0;
  long double abs_error = 0;
  int subdivisions = 0;
  bool converged = false;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod pair, abscissae on [0, 1] of the symmetric rule.
inline constexpr std::array<long double, 8> gk15_x = {
    0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
    0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
    0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
    0.207784955007898467600689403773245L, 0.0L};
inline constexpr std::array<long double, 8> gk15_wk = {
    0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
    0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
    0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
    0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
inline constexpr std::array<long double, 4> gk15_wg = {
    0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
    0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};

struct Panel {
  long double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, long double a, long double b) {
  const long double c = 0.5L * (a + b), h = 0.5L * (b - a);
  const long double fc = f(c);
  long double resk = fc * gk15_wk[7];
  long double resg = fc * gk15_wg[3];
  for (int j = 0; j < 7; ++j) {
    const long double dx = h * gk15_x[j];
    const long double f1 = f(c - dx), f2 = f(c + dx);
    resk += gk15_wk[j] * (f1 + f2);
    if (j % 2 == 1) resg += gk15_wg[j / 2] * (f1 + f2);
  }
  Panel p{a, b, resk * h, std::fabs((resk - resg) * h)};
  if (!std::isfinite(p.value)) throw std::domain_error("integrate: integrand not finite");
  return p;
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod on [a, b]. Splits the panel with the largest
// error estimate until the total error meets max(abs_tol, rel_tol * |I|).
template <class F>
QuadratureResult integrate(F&& f, long double a, long double b, const QuadratureSpec& spec = {}) {
  spec.validate();
  QuadratureResult r;
  if (a == b) {
    r.converged = true;
    return r;
  }
  std::priority_queue<detail::Panel> heap;
  auto first = detail::gk15(f, a, b);
  heap.push(first);
  long double total = first.value, err = first.error;
  int n = 1;
  const long double eps = 50 * std::numeric_limits<long double>::epsilon();
  while (true) {
    const long double tol = std::max<long double>(spec.abs_tol, spec.rel_tol * std::fabs(total));
    if (err <= tol) {
      r.converged = true;
      break;
    }
    if (n >= spec.max_subdivisions) break;
    auto worst = heap.top();
    const long double mid = 0.5L * (worst.a + worst.b);
    // panel too narrow to split further; accept what we have
    if (std::fabs(worst.b - worst.a) <= eps * std::max(std::fabs(worst.a), std::fabs(worst.b))) break;
    heap.pop();
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++n;
  }
  // re-sum to shed the drift of the incremental updates
  long double sum = 0, esum = 0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  r.value = sum;
  r.abs_error = esum;
  r.subdivisions = n;
  if (!r.converged) r.converged = esum <= std::max<long double>(spec.abs_tol, spec.rel_tol * std::fabs(sum));
  return r;
}

// Integral over [a, inf) through x = a + t / (1 - t).
template <class F>
QuadratureResult integrate_to_inf(F&& f, long double a, const QuadratureSpec& spec = {}) {
  auto g = [&](long double t) -> long double {
    if (t >= 1.0L) return 0.0L;
    const long double s = 1.0L - t;
    const long double v = f(a + t / s);
    return v == 0.0L ? 0.0L : v / (s * s);
  };
  return integrate(g, 0.0L, 1.0L, spec);
}

// Throws when the oracle itself did not converge, so tests never compare
// against an unreliable reference.
template <class F>
long double oracle(F&& f, long double a, long double b, const QuadratureSpec& spec = {}) {
  auto r = integrate(f, a, b, spec);
  if (!r.converged) throw std::runtime_error("quadrature oracle did not converge");
  return r.value;
}

template <class F>
long double oracle_to_inf(F&& f, long double a, const QuadratureSpec& spec = {}) {
  auto r = integrate_to_inf(f, a, spec);
  if (!r.converged) throw std::runtime_error("quadrature oracle did not converge");
  return r.value;
}

}  // namespace crn
