#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "analytic.hpp"
#include "config_io.hpp"
#include "montecarlo.hpp"

namespace crn::experiments {

inline constexpr const char* tool_version = "1.0.0";
inline constexpr const char* analytic_version = "1.0";
inline constexpr const char* montecarlo_version = "1.0";

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// start:stop:step, inclusive of stop when it lies on the grid.
struct Range {
  double start = 0.0, stop = 0.0, step = 1.0;

  static Range single(double v) { return {v, v, 1.0}; }

  static Range parse(const std::string& s) {
    std::vector<double> parts;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || tok.empty())
        throw UsageError("bad range '" + s + "': expected A or A:B:S");
      parts.push_back(v);
    }
    Range r;
    if (parts.size() == 1)
      r = single(parts[0]);
    else if (parts.size() == 3)
      r = {parts[0], parts[1], parts[2]};
    else
      throw UsageError("bad range '" + s + "': expected A or A:B:S");
    r.validate();
    return r;
  }

  void validate() const {
    if (!(step > 0.0)) throw UsageError("range step must be > 0");
    if (!(stop >= start)) throw UsageError("range is empty (stop < start)");
  }

  bool is_single() const { return start == stop; }

  std::vector<double> values() const {
    validate();
    std::vector<double> v;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= n; ++k) v.push_back(std::round((start + k * step) * 1e10) / 1e10);
    return v;
  }
};

enum class Axis { snr_db, beta, mu, rate, snr_db_rate };

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::snr_db: return "snr_db";
    case Axis::beta: return "beta";
    case Axis::mu: return "mu";
    case Axis::rate: return "rate";
    case Axis::snr_db_rate: return "snr_db,rate";
  }
  return "";
}

struct Engines {
  bool analytic = true;
  bool montecarlo = true;

  static Engines parse(const std::string& s) {
    Engines e{false, false};
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok == "analytic")
        e.analytic = true;
      else if (tok == "mc" || tok == "montecarlo")
        e.montecarlo = true;
      else
        throw UsageError("unknown engine '" + tok + "' (use analytic, mc)");
    }
    if (!e.analytic && !e.montecarlo) throw UsageError("no engine selected");
    return e;
  }

  std::string str() const {
    if (analytic && montecarlo) return "analytic,mc";
    return analytic ? "analytic" : "mc";
  }
};

struct SweepSpec {
  Axis axis = Axis::snr_db;
  Range range;
  std::optional<Range> rate_range;  // second axis of snr_db_rate
  Engines engines;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  std::string output_path;

  void validate() const {
    range.validate();
    if (axis == Axis::snr_db_rate) {
      if (!rate_range) throw UsageError("snr_db x rate sweep needs a rate range");
      rate_range->validate();
    }
    if (engines.montecarlo && trials < 1000) throw UsageError("trials must be >= 1000 when montecarlo is selected");
  }
};

struct MetricValue {
  std::string name;
  std::optional<double> analytic;
  std::optional<double> mc;
  std::optional<double> mc_stderr;
  std::optional<double> z;
};

struct SweepRecord {
  std::vector<std::pair<std::string, double>> axis;  // swept values first, then curve parameters
  std::string marker;
  std::vector<MetricValue> metrics;
  int series_terms = 0;
  std::string branches;
};

struct Output {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<SweepRecord> records;
  bool has_marker = false;
  bool has_z = false;
  bool has_diagnostics = true;
};

// ---------------------------------------------------------------- formatting

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline std::vector<std::string> columns(const Output& o) {
  std::vector<std::string> c;
  if (o.records.empty()) return c;
  const auto& r0 = o.records.front();
  for (const auto& [k, v] : r0.axis) c.push_back(k);
  if (o.has_marker) c.push_back("marker");
  for (const auto& m : r0.metrics) {
    c.push_back(m.name + "_analytic");
    c.push_back(m.name + "_mc");
    c.push_back(m.name + "_mc_stderr");
    if (o.has_z) c.push_back(m.name + "_z");
  }
  if (o.has_diagnostics) {
    c.push_back("series_terms");
    c.push_back("branches");
  }
  return c;
}

inline std::vector<std::string> cells(const Output& o, const SweepRecord& r) {
  std::vector<std::string> c;
  for (const auto& [k, v] : r.axis) c.push_back(fmt(v));
  if (o.has_marker) c.push_back(r.marker);
  for (const auto& m : r.metrics) {
    c.push_back(fmt(m.analytic));
    c.push_back(fmt(m.mc));
    c.push_back(fmt(m.mc_stderr));
    if (o.has_z) c.push_back(fmt(m.z));
  }
  if (o.has_diagnostics) {
    c.push_back(r.series_terms ? std::to_string(r.series_terms) : std::string());
    c.push_back(r.branches);
  }
  return c;
}

inline void write_csv(std::ostream& os, const Output& o) {
  for (const auto& [k, v] : o.meta) os << "# " << k << ": " << v << '\n';
  auto line = [&os](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << '\n';
  };
  line(columns(o));
  for (const auto& r : o.records) line(cells(o, r));
}

inline void write_json(std::ostream& os, const Output& o) {
  json arr = json::array();
  const auto cols = columns(o);
  for (const auto& r : o.records) {
    json row = json::object();
    std::size_t i = 0;
    for (const auto& [k, v] : r.axis) row[cols[i++]] = v;
    if (o.has_marker) row[cols[i++]] = r.marker;
    for (const auto& m : r.metrics) {
      for (const auto* v : {&m.analytic, &m.mc, &m.mc_stderr}) row[cols[i++]] = *v ? json(**v) : json(nullptr);
      if (o.has_z) row[cols[i++]] = m.z ? json(*m.z) : json(nullptr);
    }
    if (o.has_diagnostics) {
      row[cols[i++]] = r.series_terms;
      row[cols[i++]] = r.branches;
    }
    arr.push_back(std::move(row));
  }
  os << arr.dump(1) << '\n';
}

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  for (int i = 15; i >= 0; --i, h >>= 4) buf[i] = "0123456789abcdef"[h & 0xf];
  buf[16] = 0;
  return buf;
}

// ------------------------------------------------------------------ figures

enum class FigureId { fig3 = 3, fig4, fig5, fig6, fig7, fig8, fig9, fig10, fig11, fig12 };

inline FigureId parse_figure(const std::string& s) {
  for (int k = 3; k <= 12; ++k)
    if (s == "fig" + std::to_string(k)) return static_cast<FigureId>(k);
  throw UsageError("unknown figure '" + s + "' (fig3 .. fig12)");
}

inline std::string figure_name(FigureId f) { return "fig" + std::to_string(static_cast<int>(f)); }

enum class FigMetric { primary_outage_a, iot_outage_1, direct_outage_a, throughput, energy_efficiency, e2e_time };

struct Curve {
  std::vector<std::pair<std::string, double>> params;
  std::function<void(SystemConfig&)> apply;
};

struct FigureDef {
  FigureId id;
  std::string title;
  SweepSpec sweep;
  SystemConfig base;
  std::vector<Curve> curves;
  std::vector<FigMetric> metrics;
  bool mark_critical_mu = false;
};

struct FigureOverrides {
  std::optional<Range> snr_db, beta, mu, rate;
  std::optional<std::uint64_t> trials, seed;
  std::optional<Engines> engines;
  std::optional<json> config;
  McOptions mc;
  int threads = 1;
};

namespace detail {

// Topology shared by every figure: d_1a = d_2a = 1, d_1b = d_2b = 0.9, d_12 = 1, nu = 3.
inline SystemConfig figure_base() {
  SystemConfig c;
  c.set_eta(0.7);
  c.beta = 0.2;
  c.set_rates(1.0 / 3.0);
  c.set_m(2);
  c.set_mu(0.8);
  c.set_snr_db(10.0);
  c.direct = DirectLink{};
  return c;
}

inline void set_fading(SystemConfig& c, int ma, int mb) {
  c.m_1a = c.m_2a = ma;
  c.m_1b = c.m_2b = mb;
}

// Curves of the fading/mu study used by the OP-vs-SNR figures.
inline std::vector<Curve> fading_mu_curves() {
  std::vector<Curve> v;
  for (double mu : {0.8, 0.9})
    for (auto [ma, mb] : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 2}})
      v.push_back({{{"m_a", ma}, {"m_b", mb}, {"mu", mu}}, [=](SystemConfig& c) {
                     set_fading(c, ma, mb);
                     c.set_mu(mu);
                   }});
  return v;
}

inline std::vector<Curve> m_curves(std::vector<int> ms) {
  std::vector<Curve> v;
  for (int m : ms)
    v.push_back({{{"m", m}}, [=](SystemConfig& c) {
                   c.set_m(m);
                   c.direct->m_ab = m;
                 }});
  return v;
}

}  // namespace detail

// Per-figure defaults. Curve families, grids and the direct-link distance are
// fixed here and listed in the README.
inline FigureDef figure_def(FigureId id) {
  using detail::figure_base;
  FigureDef f{id, "", {}, figure_base(), {}, {}, false};
  auto& s = f.sweep;
  switch (id) {
    case FigureId::fig3:  // eta = 0.7, beta = 0.2, r_a = r_b = 1/3
      f.title = "outage vs SNR, PU_b -> PU_a";
      s.axis = Axis::snr_db;
      s.range = {0, 30, 2};
      f.curves = detail::fading_mu_curves();
      f.metrics = {FigMetric::primary_outage_a};
      break;
    case FigureId::fig4:  // as fig3 with r_1 = 1/3
      f.title = "outage vs SNR, IoD_2 -> IoD_1";
      s.axis = Axis::snr_db;
      s.range = {0, 30, 2};
      f.curves = detail::fading_mu_curves();
      f.metrics = {FigMetric::iot_outage_1};
      break;
    case FigureId::fig5:  // mu = 0.9, SNR = 15 dB
      f.title = "outage vs beta, PU_b -> PU_a";
      s.axis = Axis::beta;
      s.range = {0.02, 0.6, 0.02};
      f.base.set_mu(0.9);
      f.base.set_snr_db(15);
      for (auto [m, eta, r] : {std::tuple{1, 0.7, 1.0 / 3}, std::tuple{2, 0.7, 1.0 / 3}, std::tuple{2, 0.5, 1.0 / 3},
                               std::tuple{2, 0.7, 0.5}})
        f.curves.push_back({{{"m", m}, {"eta", eta}, {"r_th", r}}, [=](SystemConfig& c) {
                              c.set_m(m);
                              c.set_eta(eta);
                              c.r_a = c.r_b = r;
                            }});
      f.metrics = {FigMetric::primary_outage_a};
      break;
    case FigureId::fig6:  // eta = 0.7, mu = 0.7; r from 1/9 to 1/3, SNR 15 and 20 dB
      f.title = "outage vs beta, IoD_2 -> IoD_1";
      s.axis = Axis::beta;
      s.range = {0.02, 0.6, 0.02};
      f.base.set_mu(0.7);
      for (double snr : {15.0, 20.0})
        for (double r : {1.0 / 9, 1.0 / 3})
          f.curves.push_back({{{"snr_db", snr}, {"r_iot", r}}, [=](SystemConfig& c) {
                                c.set_snr_db(snr);
                                c.r_1 = c.r_2 = r;
                              }});
      f.metrics = {FigMetric::iot_outage_1};
      break;
    case FigureId::fig7:  // beta = 0.2, eta = 0.7, SNR = 25 dB, direct baseline
      f.title = "outage vs mu, PU_b -> PU_a, with direct link";
      s.axis = Axis::mu;
      s.range = {0.5, 0.99, 0.01};
      f.base.set_snr_db(25);
      f.curves = detail::m_curves({1, 2});
      f.metrics = {FigMetric::primary_outage_a, FigMetric::direct_outage_a};
      f.mark_critical_mu = true;
      break;
    case FigureId::fig8:  // beta = 0.2, r_th = 1/3, SNR = 20 dB
      f.title = "outage vs mu, IoD_2 -> IoD_1";
      s.axis = Axis::mu;
      s.range = {0.05, 0.95, 0.05};
      f.base.set_snr_db(20);
      f.curves = detail::m_curves({1, 2});
      f.metrics = {FigMetric::iot_outage_1};
      break;
    case FigureId::fig9:  // m = 1, beta = 0.2, mu = 0.8, eta = 0.7
      f.title = "system throughput vs SNR";
      s.axis = Axis::snr_db;
      s.range = {0, 30, 2};
      f.base.set_m(1);
      for (double r : {1.0 / 9, 1.0 / 6, 1.0 / 3, 1.0 / 2})
        f.curves.push_back({{{"rate", r}}, [=](SystemConfig& c) { c.set_rates(r); }});
      f.metrics = {FigMetric::throughput};
      break;
    case FigureId::fig10:  // m = 2, eta = 0.7, mu = 0.8, SNR = 10 dB
      f.title = "system throughput vs beta";
      s.axis = Axis::beta;
      s.range = {0.01, 0.6, 0.01};
      for (double r : {1.0 / 6, 1.0 / 3})
        f.curves.push_back({{{"rate", r}}, [=](SystemConfig& c) { c.set_rates(r); }});
      f.metrics = {FigMetric::throughput};
      break;
    case FigureId::fig11:  // beta = 0.2, eta = 0.7, mu = 0.8, equal rates
      f.title = "energy efficiency vs SNR and rate";
      s.axis = Axis::snr_db_rate;
      s.range = {-5, 30, 1};
      s.rate_range = Range{0.05, 1.0, 0.05};
      f.curves.push_back({{}, [](SystemConfig&) {}});
      f.metrics = {FigMetric::energy_efficiency};
      break;
    case FigureId::fig12:  // L = 4096, W = 1 MHz, eta = 0.7, mu = 0.9, rates 1/6, m = 1
      f.title = "average end-to-end time vs SNR, PU_a -> PU_b";
      s.axis = Axis::snr_db;
      s.range = {0, 30, 2};
      s.trials = 1000000;
      f.base.set_mu(0.9);
      f.base.set_rates(1.0 / 6);
      f.base.set_m(1);
      f.base.direct->m_ab = 1;
      f.base.packet_bits = 4096;
      f.base.bandwidth_hz = 1e6;
      f.curves.push_back({{}, [](SystemConfig&) {}});
      f.metrics = {FigMetric::e2e_time};
      break;
  }
  return f;
}

struct PointResult {
  std::vector<MetricValue> metrics;
  int series_terms = 0;
  std::set<std::string> branches;
};

namespace detail {

inline void take(PointResult& r, const AnalyticReport& a) {
  for (int t : a.terms_used) r.series_terms = std::max(r.series_terms, t);
  r.branches.insert(a.branch_taken.begin(), a.branch_taken.end());
}

inline std::string join(const std::set<std::string>& s) {
  std::string out;
  for (const auto& b : s) out += (out.empty() ? "" : "|") + b;
  return out;
}

}  // namespace detail

inline PointResult evaluate_point(const SystemConfig& cfg, const std::vector<FigMetric>& metrics, const Engines& eng,
                                  std::uint64_t trials, std::uint64_t seed, const McOptions& mc) {
  PointResult r;
  const DerivedConstants dc = derive(cfg);
  const SeriesControl ctl;
  const bool need_mc_counts = eng.montecarlo && std::any_of(metrics.begin(), metrics.end(), [](FigMetric m) {
                                return m != FigMetric::e2e_time;
                              });
  std::optional<McEstimates> est;
  if (need_mc_counts) est = run_trials(cfg, trials, seed, mc);

  auto outage_metric = [&](const char* name, auto&& analytic_fn, Metric m) {
    MetricValue v{name, {}, {}, {}, {}};
    if (eng.analytic) {
      const AnalyticReport a = analytic_fn();
      detail::take(r, a);
      v.analytic = a.value;
    }
    if (est) {
      v.mc = (*est)[m].p_hat;
      v.mc_stderr = (*est)[m].stderr_;
    }
    return v;
  };

  for (FigMetric fm : metrics) {
    switch (fm) {
      case FigMetric::primary_outage_a:
        r.metrics.push_back(outage_metric("primary_outage_a", [&] { return primary_outage(Pu::a, cfg, dc, ctl); },
                                          Metric::primary_outage_a));
        break;
      case FigMetric::iot_outage_1:
        r.metrics.push_back(
            outage_metric("iot_outage_1", [&] { return iot_outage(Relay::iod1, cfg, dc, ctl); }, Metric::iot_outage_1));
        break;
      case FigMetric::direct_outage_a:
        r.metrics.push_back(outage_metric("direct_outage_a",
                                          [&] {
                                            AnalyticReport a;
                                            a.value = direct_outage(Pu::a, cfg, dc);
                                            return a;
                                          },
                                          Metric::direct_outage_a));
        break;
      case FigMetric::throughput:
      case FigMetric::energy_efficiency: {
        const bool ee = fm == FigMetric::energy_efficiency;
        const double scale = ee ? 1.0 / ((1.0 + 2.0 * cfg.beta) / 3.0 * (cfg.p_a + cfg.p_b)) : 1.0;
        MetricValue v{ee ? "energy_efficiency" : "throughput", {}, {}, {}, {}};
        if (eng.analytic) {
          const double pre = (1.0 - cfg.beta) / 3.0;
          const auto pa = primary_outage(Pu::a, cfg, dc, ctl), pb = primary_outage(Pu::b, cfg, dc, ctl);
          const auto p1 = iot_outage(Relay::iod1, cfg, dc, ctl), p2 = iot_outage(Relay::iod2, cfg, dc, ctl);
          for (const auto* a : {&pa, &pb, &p1, &p2}) detail::take(r, *a);
          const double s = pre * ((1 - pa.value) * cfg.r_a + (1 - pb.value) * cfg.r_b + (1 - p1.value) * cfg.r_2 +
                                  (1 - p2.value) * cfg.r_1);
          v.analytic = s * scale;
        }
        if (est) {
          v.mc = est->throughput.mean * scale;
          v.mc_stderr = est->throughput.stderr_ * scale;
        }
        r.metrics.push_back(v);
        break;
      }
      case FigMetric::e2e_time: {
        MetricValue relay{"e2e_time_relay", {}, {}, {}, {}}, direct{"e2e_time_direct", {}, {}, {}, {}};
        if (eng.montecarlo) {
          const auto q1 = decode_prob(Relay::iod1, cfg, dc, ctl), q2 = decode_prob(Relay::iod2, cfg, dc, ctl);
          detail::take(r, q1);
          detail::take(r, q2);
          const E2eTime t = estimate_e2e_time(cfg, trials, seed, {q1.value, q2.value}, Pu::a, mc);
          relay.mc = t.mean_relay;
          relay.mc_stderr = t.stderr_relay;
          direct.mc = t.mean_direct;
          direct.mc_stderr = t.stderr_direct;
          if (t.unbounded_relay || t.unbounded_direct)
            r.branches.insert("e2e.unbounded_trials=" + std::to_string(t.unbounded_relay + t.unbounded_direct));
        }
        r.metrics.push_back(relay);
        r.metrics.push_back(direct);
        break;
      }
    }
  }
  return r;
}

namespace detail {

// Runs body(k) for k in [0, n) on a pool; results land at their own index.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
}

inline void set_axis(SystemConfig& c, const std::string& name, double v) {
  if (name == "snr_db")
    c.set_snr_db(v);
  else if (name == "beta")
    c.beta = v;
  else if (name == "mu")
    c.set_mu(v);
  else if (name == "rate")
    c.set_rates(v);
}

inline void common_meta(Output& o, const std::string& experiment, const std::string& hash_src, std::uint64_t seed,
                        std::uint64_t trials, const Engines& eng, const McOptions& mc) {
  o.meta.push_back({"tool", std::string("crn ") + tool_version});
  o.meta.push_back({"engines", std::string("analytic ") + analytic_version + ", montecarlo " + montecarlo_version});
  o.meta.push_back({"experiment", experiment});
  o.meta.push_back({"config_hash", fnv1a_hex(hash_src)});
  o.meta.push_back({"seed", std::to_string(seed)});
  o.meta.push_back({"trials", eng.montecarlo ? std::to_string(trials) : std::string("0")});
  o.meta.push_back({"enabled", eng.str()});
  o.meta.push_back({"channel_model",
                    mc.model == ChannelModel::independent_phases ? "independent_phases" : "reciprocal"});
}

}  // namespace detail

inline Output run_figure(FigureId id, const FigureOverrides& ov = {}) {
  FigureDef f = figure_def(id);
  SweepSpec& s = f.sweep;
  if (ov.trials) s.trials = *ov.trials;
  if (ov.seed) s.seed = *ov.seed;
  if (ov.engines) s.engines = *ov.engines;
  if (ov.config) merge_config(f.base, *ov.config);

  // Range flags replace the swept axis; for any other quantity they must be a
  // single value and pin that parameter.
  std::vector<std::pair<std::string, double>> pinned;
  auto route = [&](const char* name, const std::optional<Range>& r, bool on_axis, Range& axis_range) {
    if (!r) return;
    if (on_axis) {
      axis_range = *r;
    } else {
      if (!r->is_single())
        throw UsageError(std::string("--") + name + " must be a single value for " + figure_name(id));
      pinned.push_back({name, r->start});
    }
  };
  Range rate_range = s.rate_range.value_or(Range{});
  route("snr_db", ov.snr_db, s.axis == Axis::snr_db || s.axis == Axis::snr_db_rate, s.range);
  route("beta", ov.beta, s.axis == Axis::beta, s.range);
  route("mu", ov.mu, s.axis == Axis::mu, s.range);
  route("rate", ov.rate, s.axis == Axis::snr_db_rate, rate_range);
  if (s.axis == Axis::snr_db_rate) s.rate_range = rate_range;
  s.validate();

  std::vector<std::string> axis_names;
  std::vector<std::vector<double>> grid;
  if (s.axis == Axis::snr_db_rate) {
    for (double a : s.range.values())
      for (double b : s.rate_range->values()) grid.push_back({a, b});
    axis_names = {"snr_db", "rate"};
  } else {
    for (double a : s.range.values()) grid.push_back({a});
    axis_names = {axis_name(s.axis)};
  }

  struct Task {
    std::size_t curve;
    std::vector<double> at;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < f.curves.size(); ++c)
    for (const auto& g : grid) tasks.push_back({c, g});

  auto config_for = [&](std::size_t curve, const std::vector<double>& at) {
    SystemConfig c = f.base;
    f.curves[curve].apply(c);
    for (const auto& [k, v] : pinned) detail::set_axis(c, k, v);
    for (std::size_t i = 0; i < at.size(); ++i) detail::set_axis(c, axis_names[i], at[i]);
    return c;
  };

  Output out;
  out.records.resize(tasks.size());
  McOptions mc = ov.mc;
  mc.threads = 1;
  detail::parallel_for(tasks.size(), ov.threads, [&](std::size_t k) {
    const Task& t = tasks[k];
    McOptions m = mc;
    m.stream = t.curve;  // common random numbers along each curve
    const SystemConfig c = config_for(t.curve, t.at);
    PointResult p = evaluate_point(c, f.metrics, s.engines, s.trials, s.seed, m);
    SweepRecord& r = out.records[k];
    for (std::size_t i = 0; i < t.at.size(); ++i) r.axis.push_back({axis_names[i], t.at[i]});
    for (const auto& kv : f.curves[t.curve].params) r.axis.push_back(kv);
    r.metrics = std::move(p.metrics);
    r.series_terms = p.series_terms;
    r.branches = detail::join(p.branches);
  });

  if (f.mark_critical_mu && s.engines.analytic) {
    out.has_marker = true;
    for (auto& r : out.records) r.marker = "grid";
    for (std::size_t c = 0; c < f.curves.size(); ++c) {
      SystemConfig cfg = config_for(c, {s.range.start});
      const CriticalMu cm = critical_mu(Pu::a, cfg);
      SweepRecord r;
      r.axis.push_back({"mu", cm.mu});
      for (const auto& kv : f.curves[c].params) r.axis.push_back(kv);
      switch (cm.kind) {
        case CriticalMu::Kind::crossing: r.marker = "mu_star"; break;
        case CriticalMu::Kind::always_better: r.marker = "mu_star_at_feasibility_bound"; break;
        case CriticalMu::Kind::never_better: r.marker = "mu_star_none"; break;
      }
      cfg.set_mu(std::min(cm.mu, 1.0 - 1e-9));
      const DerivedConstants dc = derive(cfg);
      const auto po = primary_outage(Pu::a, cfg, dc);
      r.metrics.push_back({"primary_outage_a", po.value, {}, {}, {}});
      r.metrics.push_back({"direct_outage_a", direct_outage(Pu::a, cfg, dc), {}, {}, {}});
      r.branches = "critical_mu";
      out.records.push_back(std::move(r));
    }
  }

  json h;
  h["experiment"] = figure_name(id);
  h["base"] = config_to_json(f.base);
  h["axis"] = axis_names;
  h["range"] = {s.range.start, s.range.stop, s.range.step};
  if (s.rate_range) h["rate_range"] = {s.rate_range->start, s.rate_range->stop, s.rate_range->step};
  for (const auto& c : f.curves) {
    json cj = json::array();
    for (const auto& [k, v] : c.params) cj.push_back({k, v});
    h["curves"].push_back(cj);
  }
  for (const auto& [k, v] : pinned) h["pinned"][k] = v;
  h["engines"] = s.engines.str();
  h["trials"] = s.trials;
  h["seed"] = s.seed;
  h["model"] = static_cast<int>(mc.model);
  h["mac_term"] = static_cast<int>(mc.mac_term);
  detail::common_meta(out, figure_name(id), h.dump(), s.seed, s.trials, s.engines, mc);
  out.meta.insert(out.meta.begin() + 3, {"title", f.title});
  return out;
}

// ------------------------------------------------------------------ table 2

// The four convergence columns as functions of the number of series terms.
struct Table2Column {
  std::string name;
  double snr_db;
  bool primary;  // PU_a primary outage, else IoD_1 IoT outage
};

inline SystemConfig table2_config(double snr_db) {
  SystemConfig c;  // m = 2 everywhere, beta = 0.2, eta = 0.7, all rates 1/3
  c.set_snr_db(snr_db);
  c.set_mu(0.7);
  return c;
}

inline const std::vector<Table2Column>& table2_columns() {
  static const std::vector<Table2Column> cols = {{"pout_a_5db", 5.0, true},
                                                 {"pout_a_10db", 10.0, true},
                                                 {"pout_1_10db", 10.0, false},
                                                 {"pout_1_15db", 15.0, false}};
  return cols;
}

// Row p holds the partial sum over series indices 0..p.
inline Output run_table2(int rows = 15) {
  Output out;
  for (int p = 1; p <= rows; ++p) {
    SweepRecord r;
    r.axis.push_back({"index", p});
    const SeriesControl ctl = SeriesControl::fixed(p + 1);
    for (const auto& col : table2_columns()) {
      const SystemConfig c = table2_config(col.snr_db);
      const DerivedConstants dc = derive(c);
      const AnalyticReport a = col.primary ? primary_outage(Pu::a, c, dc, ctl) : iot_outage(Relay::iod1, c, dc, ctl);
      r.metrics.push_back({col.name, a.value, {}, {}, {}});
      for (int t : a.terms_used) r.series_terms = std::max(r.series_terms, t);
    }
    out.records.push_back(std::move(r));
  }
  json h;
  h["experiment"] = "table2";
  h["rows"] = rows;
  h["base"] = config_to_json(table2_config(10.0));
  detail::common_meta(out, "table2", h.dump(), 0, 0, Engines{true, false}, McOptions{});
  out.meta.push_back({"mu", "0.7"});
  return out;
}

// ----------------------------------------------------------------- validate

struct ValidateResult {
  Output out;
  double max_abs_z = 0.0;
  bool pass = true;
};

inline std::vector<SystemConfig> load_corpus(const json& j) {
  const json& list = j.is_object() && j.contains("configs") ? j["configs"] : j;
  if (!list.is_array()) throw ConfigError("corpus: expected an array of configs (or {\"configs\": [...]})");
  if (list.empty()) throw ConfigError("corpus: no configs");
  std::vector<SystemConfig> v;
  for (std::size_t k = 0; k < list.size(); ++k) {
    try {
      v.push_back(config_from_json(list[k]));
    } catch (const ConfigError& e) {
      throw ConfigError("corpus entry " + std::to_string(k) + ": " + e.what());
    }
  }
  return v;
}

// Compares every analytic probability with its simulated frequency. z is the
// difference over the larger of the simulated and the null-hypothesis stderr.
// perturb shifts every analytic value to check that the harness can fail.
inline ValidateResult run_validate(const std::vector<SystemConfig>& corpus, std::uint64_t trials, std::uint64_t seed,
                                   int threads = 1, double perturb = 0.0, const McOptions& mc_in = {}) {
  if (corpus.empty()) throw ConfigError("corpus: no configs");
  if (trials < 1) throw UsageError("trials must be >= 1");
  ValidateResult res;
  res.out.has_z = true;
  res.out.records.resize(corpus.size());
  struct Probe {
    const char* name;
    Metric metric;
  };
  static const Probe probes[] = {{"decode_1", Metric::decode_1},
                                 {"decode_2", Metric::decode_2},
                                 {"primary_outage_a", Metric::primary_outage_a},
                                 {"primary_outage_b", Metric::primary_outage_b},
                                 {"iot_outage_1", Metric::iot_outage_1},
                                 {"iot_outage_2", Metric::iot_outage_2},
                                 {"direct_outage_a", Metric::direct_outage_a},
                                 {"direct_outage_b", Metric::direct_outage_b}};
  detail::parallel_for(corpus.size(), threads, [&](std::size_t k) {
    const SystemConfig& cfg = corpus[k];
    const DerivedConstants dc = derive(cfg);
    McOptions mc = mc_in;
    mc.threads = 1;
    mc.stream = k;
    const McEstimates est = run_trials(cfg, trials, seed, mc);
    PointResult pr;
    std::vector<MetricValue> vals;
    for (const auto& p : probes) {
      AnalyticReport a;
      switch (p.metric) {
        case Metric::decode_1: a = decode_prob(Relay::iod1, cfg, dc); break;
        case Metric::decode_2: a = decode_prob(Relay::iod2, cfg, dc); break;
        case Metric::primary_outage_a: a = primary_outage(Pu::a, cfg, dc); break;
        case Metric::primary_outage_b: a = primary_outage(Pu::b, cfg, dc); break;
        case Metric::iot_outage_1: a = iot_outage(Relay::iod1, cfg, dc); break;
        case Metric::iot_outage_2: a = iot_outage(Relay::iod2, cfg, dc); break;
        case Metric::direct_outage_a:
          if (!cfg.direct) continue;
          a.value = direct_outage(Pu::a, cfg, dc);
          break;
        case Metric::direct_outage_b:
          if (!cfg.direct) continue;
          a.value = direct_outage(Pu::b, cfg, dc);
          break;
        default: break;
      }
      detail::take(pr, a);
      const double an = a.value + perturb;
      const auto& e = est[p.metric];
      const double n = static_cast<double>(e.trials);
      const double se = std::max(e.stderr_, std::sqrt(std::clamp(an, 0.0, 1.0) * (1.0 - std::clamp(an, 0.0, 1.0)) / n));
      const double diff = an - e.p_hat;
      const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
      vals.push_back({p.name, an, e.p_hat, e.stderr_, z});
    }
    SweepRecord& r = res.out.records[k];
    r.axis.push_back({"config", static_cast<double>(k)});
    r.metrics = std::move(vals);
    r.series_terms = pr.series_terms;
    r.branches = detail::join(pr.branches);
  });
  for (const auto& r : res.out.records)
    for (const auto& m : r.metrics) res.max_abs_z = std::max(res.max_abs_z, std::fabs(*m.z));
  res.pass = res.max_abs_z <= 4.0;

  json h;
  h["experiment"] = "validate";
  for (const auto& c : corpus) h["corpus"].push_back(config_to_json(c));
  h["trials"] = trials;
  h["seed"] = seed;
  h["perturb"] = perturb;
  detail::common_meta(res.out, "validate", h.dump(), seed, trials, Engines{}, mc_in);
  res.out.meta.push_back({"max_abs_z", fmt(res.max_abs_z)});
  res.out.meta.push_back({"verdict", res.pass ? "pass" : "fail"});
  return res;
}

}  // namespace crn::experiments
