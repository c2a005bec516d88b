#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "params.hpp"

// JSON form of SystemConfig. Sections group related fields:
//
//   { "power":      { "snr_db": 10 } | { "p_a": .., "p_b": .., "sigma2": .. },
//     "harvesting": { "eta_1", "eta_2", "beta" },
//     "splitting":  { "mu_1", "mu_2" },
//     "rates":      { "r_a", "r_b", "r_1", "r_2" },
//     "fading":     { "m_1a", "m_2a", "m_1b", "m_2b", "m_12" },
//     "topology":   { "d_1a", "d_2a", "d_1b", "d_2b", "d_12", "nu" },
//     "packet":     { "packet_bits", "bandwidth_hz" },
//     "direct":     { "m_ab", "d_ab" },
//     "omega":      { "o_1a", "o_2a", "o_1b", "o_2b", "o_12", "o_ab" } }
//
// Every section and key is optional; omitted values keep the defaults of the
// config being merged into. Unknown keys are rejected.
namespace crn {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) throw ConfigError("config: unknown key '" + where + "." + k + "'");
}

template <class T>
void read(const json& sec, const char* key, T& out, const std::string& where) {
  if (!sec.contains(key)) return;
  const auto& v = sec.at(key);
  if constexpr (std::is_same_v<T, int>) {
    if (!v.is_number_integer()) throw ConfigError("config: '" + where + "." + key + "' must be an integer");
    out = v.get<int>();
  } else {
    if (!v.is_number()) throw ConfigError("config: '" + where + "." + key + "' must be a number");
    out = v.get<T>();
  }
}

inline void read_opt(const json& sec, const char* key, std::optional<double>& out, const std::string& where) {
  if (!sec.contains(key)) return;
  double v = 0;
  read(sec, key, v, where);
  out = v;
}

}  // namespace detail

// Overlays the fields present in j onto cfg.
inline void merge_config(SystemConfig& cfg, const json& j) {
  using detail::read;
  detail::reject_unknown(j, "<root>",
                         {"power", "harvesting", "splitting", "rates", "fading", "topology", "packet", "direct", "omega"});
  if (j.contains("power")) {
    const auto& s = j["power"];
    detail::reject_unknown(s, "power", {"snr_db", "p_a", "p_b", "sigma2"});
    read(s, "sigma2", cfg.sigma2, "power");
    if (s.contains("snr_db")) {
      if (s.contains("p_a") || s.contains("p_b")) throw ConfigError("config: give either power.snr_db or power.p_a/p_b");
      double db = 0;
      read(s, "snr_db", db, "power");
      cfg.set_snr_db(db);
    }
    read(s, "p_a", cfg.p_a, "power");
    read(s, "p_b", cfg.p_b, "power");
  }
  if (j.contains("harvesting")) {
    const auto& s = j["harvesting"];
    detail::reject_unknown(s, "harvesting", {"eta_1", "eta_2", "beta"});
    read(s, "eta_1", cfg.eta_1, "harvesting");
    read(s, "eta_2", cfg.eta_2, "harvesting");
    read(s, "beta", cfg.beta, "harvesting");
  }
  if (j.contains("splitting")) {
    const auto& s = j["splitting"];
    detail::reject_unknown(s, "splitting", {"mu_1", "mu_2"});
    read(s, "mu_1", cfg.mu_1, "splitting");
    read(s, "mu_2", cfg.mu_2, "splitting");
  }
  if (j.contains("rates")) {
    const auto& s = j["rates"];
    detail::reject_unknown(s, "rates", {"r_a", "r_b", "r_1", "r_2"});
    read(s, "r_a", cfg.r_a, "rates");
    read(s, "r_b", cfg.r_b, "rates");
    read(s, "r_1", cfg.r_1, "rates");
    read(s, "r_2", cfg.r_2, "rates");
  }
  if (j.contains("fading")) {
    const auto& s = j["fading"];
    detail::reject_unknown(s, "fading", {"m_1a", "m_2a", "m_1b", "m_2b", "m_12"});
    read(s, "m_1a", cfg.m_1a, "fading");
    read(s, "m_2a", cfg.m_2a, "fading");
    read(s, "m_1b", cfg.m_1b, "fading");
    read(s, "m_2b", cfg.m_2b, "fading");
    read(s, "m_12", cfg.m_12, "fading");
  }
  if (j.contains("topology")) {
    const auto& s = j["topology"];
    detail::reject_unknown(s, "topology", {"d_1a", "d_2a", "d_1b", "d_2b", "d_12", "nu"});
    read(s, "d_1a", cfg.d_1a, "topology");
    read(s, "d_2a", cfg.d_2a, "topology");
    read(s, "d_1b", cfg.d_1b, "topology");
    read(s, "d_2b", cfg.d_2b, "topology");
    read(s, "d_12", cfg.d_12, "topology");
    read(s, "nu", cfg.nu, "topology");
  }
  if (j.contains("packet")) {
    const auto& s = j["packet"];
    detail::reject_unknown(s, "packet", {"packet_bits", "bandwidth_hz"});
    read(s, "packet_bits", cfg.packet_bits, "packet");
    read(s, "bandwidth_hz", cfg.bandwidth_hz, "packet");
  }
  if (j.contains("direct")) {
    const auto& s = j["direct"];
    if (s.is_null()) {
      cfg.direct.reset();
    } else {
      detail::reject_unknown(s, "direct", {"m_ab", "d_ab"});
      DirectLink d = cfg.direct.value_or(DirectLink{});
      read(s, "m_ab", d.m_ab, "direct");
      read(s, "d_ab", d.d_ab, "direct");
      cfg.direct = d;
    }
  }
  if (j.contains("omega")) {
    const auto& s = j["omega"];
    detail::reject_unknown(s, "omega", {"o_1a", "o_2a", "o_1b", "o_2b", "o_12", "o_ab"});
    auto& o = cfg.omega_override;
    detail::read_opt(s, "o_1a", o.o_1a, "omega");
    detail::read_opt(s, "o_2a", o.o_2a, "omega");
    detail::read_opt(s, "o_1b", o.o_1b, "omega");
    detail::read_opt(s, "o_2b", o.o_2b, "omega");
    detail::read_opt(s, "o_12", o.o_12, "omega");
    detail::read_opt(s, "o_ab", o.o_ab, "omega");
  }
}

inline SystemConfig config_from_json(const json& j, SystemConfig base = {}) {
  merge_config(base, j);
  validate(base);
  return base;
}

inline json config_to_json(const SystemConfig& c) {
  json j;
  j["power"] = {{"p_a", c.p_a}, {"p_b", c.p_b}, {"sigma2", c.sigma2}};
  j["harvesting"] = {{"eta_1", c.eta_1}, {"eta_2", c.eta_2}, {"beta", c.beta}};
  j["splitting"] = {{"mu_1", c.mu_1}, {"mu_2", c.mu_2}};
  j["rates"] = {{"r_a", c.r_a}, {"r_b", c.r_b}, {"r_1", c.r_1}, {"r_2", c.r_2}};
  j["fading"] = {{"m_1a", c.m_1a}, {"m_2a", c.m_2a}, {"m_1b", c.m_1b}, {"m_2b", c.m_2b}, {"m_12", c.m_12}};
  j["topology"] = {{"d_1a", c.d_1a}, {"d_2a", c.d_2a}, {"d_1b", c.d_1b},
                   {"d_2b", c.d_2b}, {"d_12", c.d_12}, {"nu", c.nu}};
  j["packet"] = {{"packet_bits", c.packet_bits}, {"bandwidth_hz", c.bandwidth_hz}};
  if (c.direct) j["direct"] = {{"m_ab", c.direct->m_ab}, {"d_ab", c.direct->d_ab}};
  json o = json::object();
  const auto& ov = c.omega_override;
  if (ov.o_1a) o["o_1a"] = *ov.o_1a;
  if (ov.o_2a) o["o_2a"] = *ov.o_2a;
  if (ov.o_1b) o["o_1b"] = *ov.o_1b;
  if (ov.o_2b) o["o_2b"] = *ov.o_2b;
  if (ov.o_12) o["o_12"] = *ov.o_12;
  if (ov.o_ab) o["o_ab"] = *ov.o_ab;
  if (!o.empty()) j["omega"] = o;
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace crn
