// crn: analytic and Monte Carlo experiment runner for the SWIPT two-way
// cognitive relay network.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include "CLI11.hpp"
#include "crn/experiments.hpp"
#include "crn/specfun.hpp"

namespace {

using namespace crn;
using namespace crn::experiments;

void emit(const Output& out, const std::string& path, bool as_json) {
  auto write = [&](std::ostream& os) { as_json ? write_json(os, out) : write_csv(os, out); };
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file '" + path + "'");
  write(f);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

ChannelModel parse_model(const std::string& s) {
  if (s == "independent_phases") return ChannelModel::independent_phases;
  if (s == "reciprocal") return ChannelModel::reciprocal;
  throw UsageError("unknown channel model '" + s + "'");
}

MacTerm parse_mac(const std::string& s) {
  if (s == "max_of_both") return MacTerm::max_of_both;
  if (s == "decoding_relays_only") return MacTerm::decoding_relays_only;
  throw UsageError("unknown mac term '" + s + "'");
}

long double num(const std::string& s) {
  std::size_t pos = 0;
  long double v = std::stold(s, &pos);
  if (pos != s.size()) throw UsageError("not a number: '" + s + "'");
  return v;
}

int integer(const std::string& s) {
  std::size_t pos = 0;
  int v = std::stoi(s, &pos);
  if (pos != s.size()) throw UsageError("not an integer: '" + s + "'");
  return v;
}

// specfun eval <fn> <args...>
long double eval_specfun(const std::string& fn, const std::vector<std::string>& a, bool oracle) {
  namespace sf = crn::specfun;
  auto need = [&](std::size_t n, const char* usage) {
    if (a.size() != n) throw UsageError(fn + " expects: " + usage);
  };
  if (fn == "lower_gamma") {
    need(2, "m x");
    return oracle ? sf::oracle::lower_incomplete_gamma(integer(a[0]), num(a[1]))
                  : sf::lower_incomplete_gamma(integer(a[0]), num(a[1]));
  }
  if (fn == "upper_gamma") {
    need(2, "s x");
    return oracle ? sf::oracle::upper_incomplete_gamma(num(a[0]), num(a[1]))
                  : sf::upper_incomplete_gamma(num(a[0]), num(a[1]));
  }
  if (fn == "bessel_k") {
    need(2, "v x");
    return oracle ? sf::oracle::bessel_k(num(a[0]), num(a[1])) : sf::bessel_k(num(a[0]), num(a[1]));
  }
  if (fn == "whittaker_w") {
    need(3, "kappa mu z");
    return oracle ? sf::oracle::whittaker_w(num(a[0]), num(a[1]), num(a[2]))
                  : sf::whittaker_w(num(a[0]), num(a[1]), num(a[2]));
  }
  if (fn == "inv_exp_moment_integral") {
    need(3, "m a y_hi");
    return oracle ? sf::oracle::inv_exp_moment_integral(integer(a[0]), num(a[1]), num(a[2]))
                  : sf::inv_exp_moment_integral(integer(a[0]), num(a[1]), num(a[2]));
  }
  throw UsageError("unknown function '" + fn +
                   "' (lower_gamma, upper_gamma, bessel_k, whittaker_w, inv_exp_moment_integral)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crn: outage, throughput and timing of a SWIPT two-way cognitive relay network"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("crn ") + tool_version);

  int threads = 1;
  std::string model = "independent_phases", mac = "max_of_both";
  app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--channel-model", model, "independent_phases | reciprocal");
  app.add_option("--mac-term", mac, "max_of_both | decoding_relays_only (fig12)");

  // figure
  auto* fig = app.add_subcommand("figure", "Data series of one result figure");
  std::string fig_id, snr_s, beta_s, mu_s, rate_s, engines_s, out_path, config_path;
  std::uint64_t trials = 0, seed = 1;
  bool as_json = false;
  fig->add_option("id", fig_id, "fig3 .. fig12")->required();
  fig->add_option("--snr-db", snr_s, "SNR in dB, A or A:B:S");
  fig->add_option("--beta", beta_s, "Power-splitting ratio, A or A:B:S");
  fig->add_option("--mu", mu_s, "Relay power split, A or A:B:S");
  fig->add_option("--rate", rate_s, "Rate threshold, A or A:B:S");
  auto* trials_opt = fig->add_option("--trials", trials, "Monte Carlo trials per grid point");
  auto* seed_opt = fig->add_option("--seed", seed, "RNG seed");
  fig->add_option("--engines", engines_s, "analytic,mc");
  fig->add_option("--out", out_path, "Output path (default stdout)");
  fig->add_option("--config", config_path, "JSON system config merged under the flags");
  fig->add_flag("--json", as_json, "Emit a JSON array instead of CSV");

  // table2
  auto* t2 = app.add_subcommand("table2", "Series convergence table");
  std::string t2_out;
  bool t2_json = false;
  t2->add_option("--out", t2_out, "Output path (default stdout)");
  t2->add_flag("--json", t2_json, "Emit a JSON array instead of CSV");

  // validate
  auto* val = app.add_subcommand("validate", "Analytic vs Monte Carlo agreement over a config corpus");
  std::string corpus_path, val_out;
  std::uint64_t val_trials = 1000000, val_seed = 1;
  double perturb = 0.0;
  bool val_json = false;
  val->add_option("--corpus", corpus_path, "JSON corpus of configs")->required();
  val->add_option("--trials", val_trials, "Trials per config")->check(CLI::PositiveNumber);
  val->add_option("--seed", val_seed, "RNG seed");
  val->add_option("--perturb", perturb, "Add this offset to every analytic value (mutation check)");
  val->add_option("--out", val_out, "Report path (default stdout)");
  val->add_flag("--json", val_json, "Emit a JSON array instead of CSV");

  // specfun eval
  auto* sfc = app.add_subcommand("specfun", "Special-function inspection");
  sfc->group("");
  auto* ev = sfc->add_subcommand("eval", "Evaluate one special function");
  sfc->require_subcommand(1);
  std::string fn;
  std::vector<std::string> fn_args;
  bool use_oracle = false;
  ev->add_option("fn", fn, "lower_gamma | upper_gamma | bessel_k | whittaker_w | inv_exp_moment_integral")
      ->required();
  ev->add_option("args", fn_args, "Function arguments");
  ev->add_flag("--oracle", use_oracle, "Evaluate by adaptive quadrature instead");

  CLI11_PARSE(app, argc, argv);

  try {
    McOptions mc;
    mc.model = parse_model(model);
    mc.mac_term = parse_mac(mac);

    if (*fig) {
      FigureOverrides ov;
      ov.threads = threads;
      ov.mc = mc;
      if (!config_path.empty()) ov.config = read_json_file(config_path);
      if (!snr_s.empty()) ov.snr_db = Range::parse(snr_s);
      if (!beta_s.empty()) ov.beta = Range::parse(beta_s);
      if (!mu_s.empty()) ov.mu = Range::parse(mu_s);
      if (!rate_s.empty()) ov.rate = Range::parse(rate_s);
      if (!engines_s.empty()) ov.engines = Engines::parse(engines_s);
      if (trials_opt->count()) ov.trials = trials;
      if (seed_opt->count()) ov.seed = seed;
      emit(run_figure(parse_figure(fig_id), ov), out_path, as_json);
      return 0;
    }
    if (*t2) {
      emit(run_table2(), t2_out, t2_json);
      return 0;
    }
    if (*val) {
      const auto corpus = load_corpus(read_json_file(corpus_path));
      const ValidateResult r = run_validate(corpus, val_trials, val_seed, threads, perturb, mc);
      emit(r.out, val_out, val_json);
      std::cerr << "validate: " << corpus.size() << " configs, max |z| = " << fmt(r.max_abs_z) << " -> "
                << (r.pass ? "pass" : "FAIL") << '\n';
      return r.pass ? 0 : 1;
    }
    if (*ev) {
      const long double v = eval_specfun(fn, fn_args, use_oracle);
      std::cout << std::setprecision(std::numeric_limits<long double>::max_digits10) << v << '\n';
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "crn: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "crn: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "crn: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
