#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace crn {

// Thrown when a SystemConfig violates an invariant. The message names the
// first offending field.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Pu { a = 0, b = 1 };
enum class Relay { iod1 = 0, iod2 = 1 };

constexpr Pu other(Pu j) { return j == Pu::a ? Pu::b : Pu::a; }
constexpr Relay other(Relay i) { return i == Relay::iod1 ? Relay::iod2 : Relay::iod1; }
constexpr int idx(Pu j) { return static_cast<int>(j); }
constexpr int idx(Relay i) { return static_cast<int>(i); }

inline const char* name(Pu j) { return j == Pu::a ? "a" : "b"; }
inline const char* name(Relay i) { return i == Relay::iod1 ? "1" : "2"; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

// Optional PU_a -> PU_b link, only used for the direct-transmission baseline.
struct DirectLink {
  int m_ab = 1;
  double d_ab = 2.0;
};

// Direct mean-gain overrides. When set they replace d^-nu for that link.
struct OmegaOverrides {
  std::optional<double> o_1a, o_2a, o_1b, o_2b, o_12, o_ab;
};

// Physical parameters of one network realization. Powers are in linear units;
// with sigma2 = 1 the transmit powers are the transmit SNRs.
struct SystemConfig {
  double p_a = 1.0;
  double p_b = 1.0;
  double sigma2 = 1.0;

  double eta_1 = 0.7;
  double eta_2 = 0.7;
  double beta = 0.2;
  double mu_1 = 0.7;
  double mu_2 = 0.7;

  double r_a = 1.0 / 3.0;
  double r_b = 1.0 / 3.0;
  double r_1 = 1.0 / 3.0;
  double r_2 = 1.0 / 3.0;

  int m_1a = 2, m_2a = 2, m_1b = 2, m_2b = 2, m_12 = 2;

  double d_1a = 1.0, d_2a = 1.0, d_1b = 0.9, d_2b = 0.9, d_12 = 1.0;
  double nu = 3.0;

  double packet_bits = 4096.0;
  double bandwidth_hz = 1e6;

  std::optional<DirectLink> direct;
  OmegaOverrides omega_override;

  void set_snr_db(double db) { p_a = p_b = db_to_linear(db) * sigma2; }
  void set_mu(double mu) { mu_1 = mu_2 = mu; }
  void set_eta(double eta) { eta_1 = eta_2 = eta; }
  void set_rates(double r) { r_a = r_b = r_1 = r_2 = r; }
  void set_m(int m) { m_1a = m_2a = m_1b = m_2b = m_12 = m; }

  double eta(Relay i) const { return i == Relay::iod1 ? eta_1 : eta_2; }
  double mu(Relay i) const { return i == Relay::iod1 ? mu_1 : mu_2; }
  double rate(Pu j) const { return j == Pu::a ? r_a : r_b; }
  double rate(Relay i) const { return i == Relay::iod1 ? r_1 : r_2; }
  double power(Pu j) const { return j == Pu::a ? p_a : p_b; }
  int m(Relay i, Pu j) const {
    if (i == Relay::iod1) return j == Pu::a ? m_1a : m_1b;
    return j == Pu::a ? m_2a : m_2b;
  }
  double d(Relay i, Pu j) const {
    if (i == Relay::iod1) return j == Pu::a ? d_1a : d_1b;
    return j == Pu::a ? d_2a : d_2b;
  }
};

// Quantities that every outage formula shares, precomputed once per config.
// Arrays are indexed [relay][pu] or [pu] / [relay] via idx().
struct DerivedConstants {
  std::array<std::array<double, 2>, 2> omega{};
  double omega_12 = 0.0;
  std::optional<double> omega_ab;

  std::array<double, 2> rho{};                       // P_j / sigma2
  std::array<std::array<double, 2>, 2> zeta{};       // 3 eta_i rho_j beta / (1 - beta)
  double r_th = 0.0;                                 // max(r_a, r_b)
  double gamma_th = 0.0;
  std::array<double, 2> varphi{};                    // 2^(3 r_j / (1 - beta))
  std::array<double, 2> c{};                         // decode-region corner, per relay
  std::array<double, 2> d{};                         // sum-rate intercept, per relay
  std::array<double, 2> theta{};                     // rho_j / rho_jhat
  std::array<double, 2> phi{};                       // mu_i - (1 - mu_i) gamma_th
  std::array<double, 2> gammabar{};                  // IoT target SNR at each IoD
  std::array<double, 2> gammatilde{};                // direct-link target SNR per PU
  double l_tilde = 0.0;                              // packet_bits ln2 / bandwidth

  double om(Relay i, Pu j) const { return omega[idx(i)][idx(j)]; }
  double zt(Relay i, Pu j) const { return zeta[idx(i)][idx(j)]; }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid SystemConfig: " + what);
}

inline bool finite_pos(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace detail

inline void validate(const SystemConfig& c) {
  using detail::finite_pos;
  using detail::require;
  require(finite_pos(c.p_a), "p_a must be > 0");
  require(finite_pos(c.p_b), "p_b must be > 0");
  require(finite_pos(c.sigma2), "sigma2 must be > 0");
  require(c.eta_1 > 0.0 && c.eta_1 < 1.0, "eta_1 must lie in (0, 1)");
  require(c.eta_2 > 0.0 && c.eta_2 < 1.0, "eta_2 must lie in (0, 1)");
  require(c.beta > 0.0 && c.beta < 1.0, "beta must lie in (0, 1)");
  require(c.mu_1 > 0.0 && c.mu_1 < 1.0, "mu_1 must lie in (0, 1)");
  require(c.mu_2 > 0.0 && c.mu_2 < 1.0, "mu_2 must lie in (0, 1)");
  require(finite_pos(c.r_a), "r_a must be > 0");
  require(finite_pos(c.r_b), "r_b must be > 0");
  require(finite_pos(c.r_1), "r_1 must be > 0");
  require(finite_pos(c.r_2), "r_2 must be > 0");
  require(c.m_1a >= 1, "m_1a must be a positive integer");
  require(c.m_2a >= 1, "m_2a must be a positive integer");
  require(c.m_1b >= 1, "m_1b must be a positive integer");
  require(c.m_2b >= 1, "m_2b must be a positive integer");
  require(c.m_12 >= 1, "m_12 must be a positive integer");
  require(finite_pos(c.d_1a), "d_1a must be > 0");
  require(finite_pos(c.d_2a), "d_2a must be > 0");
  require(finite_pos(c.d_1b), "d_1b must be > 0");
  require(finite_pos(c.d_2b), "d_2b must be > 0");
  require(finite_pos(c.d_12), "d_12 must be > 0");
  require(finite_pos(c.nu), "nu must be > 0");
  require(finite_pos(c.packet_bits), "packet_bits must be > 0");
  require(finite_pos(c.bandwidth_hz), "bandwidth_hz must be > 0");
  if (c.direct) {
    require(c.direct->m_ab >= 1, "m_ab must be a positive integer");
    require(finite_pos(c.direct->d_ab), "d_ab must be > 0");
  }
  const auto& o = c.omega_override;
  for (const auto* v : {&o.o_1a, &o.o_2a, &o.o_1b, &o.o_2b, &o.o_12, &o.o_ab})
    require(!*v || finite_pos(**v), "omega overrides must be > 0");
}

inline DerivedConstants derive(const SystemConfig& c) {
  validate(c);
  DerivedConstants k;
  auto omega_of = [&](const std::optional<double>& ov, double dist) {
    return ov ? *ov : std::pow(dist, -c.nu);
  };
  const auto& o = c.omega_override;
  k.omega[0][0] = omega_of(o.o_1a, c.d_1a);
  k.omega[0][1] = omega_of(o.o_1b, c.d_1b);
  k.omega[1][0] = omega_of(o.o_2a, c.d_2a);
  k.omega[1][1] = omega_of(o.o_2b, c.d_2b);
  k.omega_12 = omega_of(o.o_12, c.d_12);
  if (c.direct) k.omega_ab = omega_of(o.o_ab, c.direct->d_ab);

  const double pre = 3.0 / (1.0 - c.beta);
  k.rho = {c.p_a / c.sigma2, c.p_b / c.sigma2};
  for (Relay i : {Relay::iod1, Relay::iod2})
    for (Pu j : {Pu::a, Pu::b})
      k.zeta[idx(i)][idx(j)] = pre * c.eta(i) * k.rho[idx(j)] * c.beta;

  k.r_th = std::max(c.r_a, c.r_b);
  k.gamma_th = std::exp2(pre * k.r_th) - 1.0;
  k.varphi = {std::exp2(pre * c.r_a), std::exp2(pre * c.r_b)};

  const double va = k.varphi[0], vb = k.varphi[1];
  const double ra = k.rho[0], rb = k.rho[1];
  for (int i = 0; i < 2; ++i) {
    // Decode region with j = a: corner of the rectangle cut by the sum-rate line.
    k.c[i] = (va * vb - va) / ra;
    k.d[i] = (va * vb - 1.0) / rb;
  }
  k.theta = {ra / rb, rb / ra};
  k.phi = {c.mu_1 - (1.0 - c.mu_1) * k.gamma_th, c.mu_2 - (1.0 - c.mu_2) * k.gamma_th};
  // IoD_i receives IoD_ihat's symbol at rate r_ihat.
  k.gammabar = {std::exp2(pre * c.r_2) - 1.0, std::exp2(pre * c.r_1) - 1.0};
  k.gammatilde = {std::exp2(2.0 * c.r_a) - 1.0, std::exp2(2.0 * c.r_b) - 1.0};
  k.l_tilde = c.packet_bits * std::log(2.0) / c.bandwidth_hz;
  return k;
}

}  // namespace crn
