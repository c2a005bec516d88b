#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "params.hpp"

namespace crn {

// How channel realizations are shared between protocol phases.
//  independent_phases: the MAC-phase gains (used for decoding) are drawn
//    independently of the EH/BC-phase gains; within the EH/BC draw reciprocity
//    holds. This is the model under which the closed-form outage expressions
//    are exact.
//  reciprocal: one draw serves every phase of the block.
enum class ChannelModel { independent_phases, reciprocal };

// Which relays contribute the MAC-phase term of the end-to-end time.
enum class MacTerm { max_of_both, decoding_relays_only };

struct ChannelDraw {
  double y1 = 0, z1 = 0, y2 = 0, z2 = 0;  // |h_{a,i}|^2, |h_{b,i}|^2
  double x12 = 0;                         // |h_{1,2}|^2
  std::optional<double> gab;              // |h_{a,b}|^2

  double gain(Relay i, Pu j) const {
    if (i == Relay::iod1) return j == Pu::a ? y1 : z1;
    return j == Pu::a ? y2 : z2;
  }
};

struct TrialOutcome {
  std::array<bool, 2> decoded{};            // per relay
  std::array<double, 2> snr_pu_a{};         // at PU_a via relay 1, 2
  std::array<double, 2> snr_pu_b{};
  std::array<double, 2> snr_iot{};          // at IoD_1, IoD_2
  std::array<bool, 2> primary_outage{};     // PU_a, PU_b
  std::array<bool, 2> iot_outage{};         // IoD_1, IoD_2
  std::array<bool, 2> direct_outage{};      // PU_a, PU_b (false without a direct link)
  std::optional<double> e2e_time;           // PU_a -> PU_b, empty when no relay decodes
};

struct OutageEstimate {
  double p_hat = 0.0;
  double stderr_ = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;

  static OutageEstimate from_count(std::uint64_t hits, std::uint64_t n, std::uint64_t seed) {
    OutageEstimate e;
    e.trials = n;
    e.seed = seed;
    e.p_hat = static_cast<double>(hits) / static_cast<double>(n);
    e.stderr_ = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(n));
    return e;
  }
};

enum class Metric : int {
  decode_1,
  decode_2,
  primary_outage_a,
  primary_outage_b,
  iot_outage_1,
  iot_outage_2,
  direct_outage_a,
  direct_outage_b,
  primary_cdf_1a,  // Pr[gamma_{1,a} < gamma_th]
  primary_cdf_2a,
  primary_cdf_1b,
  primary_cdf_2b,
  iot_cdf_1,       // Pr[gamma_{2,1} < gammabar_1]
  iot_cdf_2,
  count
};

inline constexpr int metric_count = static_cast<int>(Metric::count);

inline const char* metric_name(Metric m) {
  static constexpr const char* names[] = {
      "decode_1",       "decode_2",       "primary_outage_a", "primary_outage_b", "iot_outage_1",
      "iot_outage_2",   "direct_outage_a", "direct_outage_b", "primary_cdf_1a",   "primary_cdf_2a",
      "primary_cdf_1b", "primary_cdf_2b", "iot_cdf_1",        "iot_cdf_2"};
  return names[static_cast<int>(m)];
}

struct McOptions {
  ChannelModel model = ChannelModel::independent_phases;
  MacTerm mac_term = MacTerm::max_of_both;
  int threads = 1;
  std::uint64_t stream = 0;  // separates independent experiments that share a seed
};

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t trials = 0;
};

struct McEstimates {
  std::array<OutageEstimate, metric_count> metric{};
  MeanEstimate throughput;  // per-block system throughput, bits/s/Hz
  const OutageEstimate& operator[](Metric m) const { return metric[static_cast<int>(m)]; }
};

struct E2eTime {
  double mean_relay = 0.0;
  double mean_direct = 0.0;
  double stderr_relay = 0.0;
  double stderr_direct = 0.0;
  std::uint64_t unbounded_relay = 0;   // trials with an infinite per-link time inside a taken branch
  std::uint64_t unbounded_direct = 0;
  std::uint64_t trials = 0;
};

namespace detail {

inline constexpr std::uint64_t block_size = 4096;

// Generator for one block of trials. Keyed by (seed, stream, block) so results
// do not depend on how blocks are spread over threads.
inline std::mt19937_64 block_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

// uniform on (0, 1]
inline double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Gamma(m, omega/m) for integer m as a sum of m exponentials.
inline double gamma_gain(std::mt19937_64& rng, int m, double omega) {
  double prod = 1.0;
  double acc = 0.0;
  for (int k = 0; k < m; ++k) {
    prod *= open_uniform(rng);
    if (prod < 1e-280) {
      acc += std::log(prod);
      prod = 1.0;
    }
  }
  acc += std::log(prod);
  return -omega / m * acc;
}

template <class Body>
void for_each_block(std::uint64_t n_trials, int threads, Body&& body) {
  const std::uint64_t blocks = (n_trials + block_size - 1) / block_size;
  auto run = [&](std::atomic<std::uint64_t>& next) {
    for (std::uint64_t b; (b = next.fetch_add(1)) < blocks;) {
      const std::uint64_t lo = b * block_size;
      body(b, lo, std::min(n_trials, lo + block_size));
    }
  };
  std::atomic<std::uint64_t> next{0};
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(blocks)));
  if (t == 1) {
    run(next);
    return;
  }
  std::vector<std::thread> pool;
  for (int k = 0; k < t; ++k) pool.emplace_back([&] { run(next); });
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline ChannelDraw sample_channels(std::mt19937_64& rng, const SystemConfig& cfg, const DerivedConstants& dc) {
  ChannelDraw d;
  d.y1 = detail::gamma_gain(rng, cfg.m_1a, dc.omega[0][0]);
  d.z1 = detail::gamma_gain(rng, cfg.m_1b, dc.omega[0][1]);
  d.y2 = detail::gamma_gain(rng, cfg.m_2a, dc.omega[1][0]);
  d.z2 = detail::gamma_gain(rng, cfg.m_2b, dc.omega[1][1]);
  d.x12 = detail::gamma_gain(rng, cfg.m_12, dc.omega_12);
  if (cfg.direct) d.gab = detail::gamma_gain(rng, cfg.direct->m_ab, *dc.omega_ab);
  return d;
}

// Transmit power of IoD i after spending its harvested energy in one BC slot.
inline double relay_power(const ChannelDraw& d, Relay i, const SystemConfig& cfg) {
  return 3.0 * cfg.eta(i) * cfg.beta / (1.0 - cfg.beta) * (cfg.p_a * d.gain(i, Pu::a) + cfg.p_b * d.gain(i, Pu::b));
}

// Relay power normalized by the noise, sum_j zeta_ij |h_{j,i}|^2.
inline double relay_snr_budget(const ChannelDraw& d, Relay i, const DerivedConstants& dc) {
  return dc.zt(i, Pu::a) * d.gain(i, Pu::a) + dc.zt(i, Pu::b) * d.gain(i, Pu::b);
}

inline bool mac_decode(const ChannelDraw& d, Relay i, const DerivedConstants& dc) {
  const double sa = dc.rho[0] * d.gain(i, Pu::a);
  const double sb = dc.rho[1] * d.gain(i, Pu::b);
  const double va = dc.varphi[0], vb = dc.varphi[1];
  return sa >= vb - 1.0 && sb >= va - 1.0 && sa + sb >= va * vb - 1.0;
}

// SNR at PU j of the combined signal broadcast by IoD i; the IoT share of the
// relay power is treated as noise.
inline double snr_primary(const ChannelDraw& d, Relay i, Pu j, const SystemConfig& cfg, const DerivedConstants& dc) {
  const double mu = cfg.mu(i);
  const double s = relay_snr_budget(d, i, dc) * d.gain(i, j);
  return mu * s / ((1.0 - mu) * s + 1.0);
}

// SNR at the other IoD of the IoT symbol sent by IoD i, after the primary part is removed.
inline double snr_iot(const ChannelDraw& d, Relay i, const SystemConfig& cfg, const DerivedConstants& dc) {
  return (1.0 - cfg.mu(i)) * d.x12 * relay_snr_budget(d, i, dc);
}

inline TrialOutcome evaluate_trial(const ChannelDraw& mac, const ChannelDraw& link, const SystemConfig& cfg,
                                   const DerivedConstants& dc) {
  TrialOutcome t;
  for (Relay i : {Relay::iod1, Relay::iod2}) {
    t.decoded[idx(i)] = mac_decode(mac, i, dc);
    t.snr_pu_a[idx(i)] = snr_primary(link, i, Pu::a, cfg, dc);
    t.snr_pu_b[idx(i)] = snr_primary(link, i, Pu::b, cfg, dc);
  }
  // IoD_1 hears IoD_2's IoT symbol and vice versa
  t.snr_iot[0] = snr_iot(link, Relay::iod2, cfg, dc);
  t.snr_iot[1] = snr_iot(link, Relay::iod1, cfg, dc);

  const bool q1 = t.decoded[0], q2 = t.decoded[1];
  for (Pu j : {Pu::a, Pu::b}) {
    const auto& s = j == Pu::a ? t.snr_pu_a : t.snr_pu_b;
    double best = -1.0;
    if (q1) best = std::max(best, s[0]);
    if (q2) best = std::max(best, s[1]);
    // selection combining over the copies that were actually relayed
    t.primary_outage[idx(j)] = !(q1 || q2) || best < dc.gamma_th;
    if (link.gab) t.direct_outage[idx(j)] = dc.rho[idx(other(j))] * *link.gab < dc.gammatilde[idx(j)];
  }
  for (int r = 0; r < 2; ++r) t.iot_outage[r] = !(q1 && q2 && t.snr_iot[r] >= dc.gammabar[r]);
  return t;
}

// Simulates n_trials protocol blocks and estimates every probability the
// analytic engine computes. Deterministic in (cfg, n_trials, seed, stream)
// regardless of options.threads.
inline McEstimates run_trials(const SystemConfig& cfg, std::uint64_t n_trials, std::uint64_t seed,
                              const McOptions& opt = {}) {
  if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
  const DerivedConstants dc = derive(cfg);
  const std::uint64_t blocks = (n_trials + detail::block_size - 1) / detail::block_size;
  std::vector<std::array<std::uint64_t, metric_count>> hits(blocks);
  std::vector<std::array<double, 2>> tput(blocks);
  const double pre = (1.0 - cfg.beta) / 3.0;

  detail::for_each_block(n_trials, opt.threads, [&](std::uint64_t b, std::uint64_t lo, std::uint64_t hi) {
    auto rng = detail::block_rng(seed, opt.stream, b);
    auto& h = hits[b];
    h.fill(0);
    double ts = 0.0, ts2 = 0.0;
    for (std::uint64_t n = lo; n < hi; ++n) {
      const ChannelDraw link = sample_channels(rng, cfg, dc);
      const ChannelDraw mac = opt.model == ChannelModel::reciprocal ? link : sample_channels(rng, cfg, dc);
      const TrialOutcome t = evaluate_trial(mac, link, cfg, dc);
      auto bump = [&](Metric m, bool v) { h[static_cast<int>(m)] += v ? 1 : 0; };
      bump(Metric::decode_1, t.decoded[0]);
      bump(Metric::decode_2, t.decoded[1]);
      bump(Metric::primary_outage_a, t.primary_outage[0]);
      bump(Metric::primary_outage_b, t.primary_outage[1]);
      bump(Metric::iot_outage_1, t.iot_outage[0]);
      bump(Metric::iot_outage_2, t.iot_outage[1]);
      bump(Metric::direct_outage_a, t.direct_outage[0]);
      bump(Metric::direct_outage_b, t.direct_outage[1]);
      bump(Metric::primary_cdf_1a, t.snr_pu_a[0] < dc.gamma_th);
      bump(Metric::primary_cdf_2a, t.snr_pu_a[1] < dc.gamma_th);
      bump(Metric::primary_cdf_1b, t.snr_pu_b[0] < dc.gamma_th);
      bump(Metric::primary_cdf_2b, t.snr_pu_b[1] < dc.gamma_th);
      bump(Metric::iot_cdf_1, t.snr_iot[0] < dc.gammabar[0]);
      bump(Metric::iot_cdf_2, t.snr_iot[1] < dc.gammabar[1]);
      const double s = pre * ((t.primary_outage[0] ? 0.0 : cfg.r_a) + (t.primary_outage[1] ? 0.0 : cfg.r_b) +
                              (t.iot_outage[0] ? 0.0 : cfg.r_2) + (t.iot_outage[1] ? 0.0 : cfg.r_1));
      ts += s;
      ts2 += s * s;
    }
    tput[b] = {ts, ts2};
  });

  std::array<std::uint64_t, metric_count> total{};
  for (const auto& h : hits)
    for (int k = 0; k < metric_count; ++k) total[k] += h[k];
  McEstimates out;
  for (int k = 0; k < metric_count; ++k) out.metric[k] = OutageEstimate::from_count(total[k], n_trials, seed);
  double ts = 0.0, ts2 = 0.0;
  for (const auto& t : tput) {
    ts += t[0];
    ts2 += t[1];
  }
  const double n = static_cast<double>(n_trials);
  out.throughput.mean = ts / n;
  out.throughput.trials = n_trials;
  out.throughput.stderr_ = n > 1 ? std::sqrt(std::max(0.0, (ts2 / n - out.throughput.mean * out.throughput.mean) / (n - 1))) : 0.0;
  return out;
}

// Average end-to-end packet time from PU j to PU jhat through the relays and
// over the direct link. Per-decode-case conditional means are estimated by
// simulation and weighted with the decode probabilities supplied by the
// caller (normally the analytic ones).
inline E2eTime estimate_e2e_time(const SystemConfig& cfg, std::uint64_t n_trials, std::uint64_t seed,
                                 std::array<double, 2> decode_prob, Pu j = Pu::a, const McOptions& opt = {}) {
  if (n_trials < 1) throw std::invalid_argument("estimate_e2e_time: n_trials must be >= 1");
  if (!cfg.direct) throw ConfigError("estimate_e2e_time: direct link parameters are not configured");
  const DerivedConstants dc = derive(cfg);
  const Pu jh = other(j);
  const double lt = dc.l_tilde;
  auto delta = [lt](double snr) {
    const double c = std::log1p(snr);
    return c > 0.0 ? lt / c : std::numeric_limits<double>::infinity();
  };

  // case index: 0 = only IoD_1 decodes, 1 = only IoD_2, 2 = both
  struct Acc {
    std::array<double, 3> mac{}, bc1{}, bc2{}, sq{};
    std::array<std::uint64_t, 3> n{};
    double direct = 0.0, direct_sq = 0.0;
    std::uint64_t unbounded_relay = 0, unbounded_direct = 0;
  };
  const std::uint64_t blocks = (n_trials + detail::block_size - 1) / detail::block_size;
  std::vector<Acc> acc(blocks);

  detail::for_each_block(n_trials, opt.threads, [&](std::uint64_t b, std::uint64_t lo, std::uint64_t hi) {
    auto rng = detail::block_rng(seed, opt.stream, b);
    Acc& a = acc[b];
    for (std::uint64_t n = lo; n < hi; ++n) {
      const ChannelDraw link = sample_channels(rng, cfg, dc);
      const ChannelDraw mac = opt.model == ChannelModel::reciprocal ? link : sample_channels(rng, cfg, dc);
      const bool q1 = mac_decode(mac, Relay::iod1, dc), q2 = mac_decode(mac, Relay::iod2, dc);
      const double dd = delta(dc.rho[idx(j)] * *link.gab);
      if (std::isinf(dd)) ++a.unbounded_direct;
      a.direct += dd;
      a.direct_sq += dd * dd;
      if (!q1 && !q2) continue;
      const int c = q1 && q2 ? 2 : (q1 ? 0 : 1);
      const double m1 = delta(dc.rho[idx(j)] * mac.gain(Relay::iod1, j));
      const double m2 = delta(dc.rho[idx(j)] * mac.gain(Relay::iod2, j));
      double mterm;
      if (opt.mac_term == MacTerm::max_of_both || c == 2)
        mterm = std::max(m1, m2);
      else
        mterm = c == 0 ? m1 : m2;
      const double b1 = q1 ? delta(snr_primary(link, Relay::iod1, jh, cfg, dc)) : 0.0;
      const double b2 = q2 ? delta(snr_primary(link, Relay::iod2, jh, cfg, dc)) : 0.0;
      if (std::isinf(mterm) || std::isinf(b1) || std::isinf(b2)) ++a.unbounded_relay;
      a.mac[c] += mterm;
      a.bc1[c] += b1;
      a.bc2[c] += b2;
      a.sq[c] += (mterm + b1 + b2) * (mterm + b1 + b2);
      ++a.n[c];
    }
  });

  Acc tot;
  for (const auto& a : acc) {
    for (int c = 0; c < 3; ++c) {
      tot.mac[c] += a.mac[c];
      tot.bc1[c] += a.bc1[c];
      tot.bc2[c] += a.bc2[c];
      tot.sq[c] += a.sq[c];
      tot.n[c] += a.n[c];
    }
    tot.direct += a.direct;
    tot.direct_sq += a.direct_sq;
    tot.unbounded_relay += a.unbounded_relay;
    tot.unbounded_direct += a.unbounded_direct;
  }
  const double p1 = decode_prob[0], p2 = decode_prob[1];
  const std::array<double, 3> w = {p1 * (1.0 - p2), (1.0 - p1) * p2, p1 * p2};
  auto sample_var = [](double sum, double sq, double n) {
    return n > 1 ? std::max(0.0, (sq - sum * sum / n) / (n - 1)) : 0.0;
  };
  double relay = 0.0, relay_var = 0.0;
  for (int c = 0; c < 3; ++c) {
    if (w[c] == 0.0) continue;
    if (tot.n[c] == 0)
      throw std::runtime_error("estimate_e2e_time: a decode case with nonzero probability was never simulated");
    const double n = static_cast<double>(tot.n[c]);
    const double sum = tot.mac[c] + tot.bc1[c] + tot.bc2[c];
    relay += w[c] * sum / n;
    relay_var += w[c] * w[c] * sample_var(sum, tot.sq[c], n) / n;
  }
  const double nt = static_cast<double>(n_trials);
  E2eTime out;
  out.mean_relay = relay / (1.0 - cfg.beta);
  out.stderr_relay = std::sqrt(relay_var) / (1.0 - cfg.beta);
  out.mean_direct = tot.direct / nt;
  out.stderr_direct = std::sqrt(sample_var(tot.direct, tot.direct_sq, nt) / nt);
  out.unbounded_relay = tot.unbounded_relay;
  out.unbounded_direct = tot.unbounded_direct;
  out.trials = n_trials;
  return out;
}

}  // namespace crn
