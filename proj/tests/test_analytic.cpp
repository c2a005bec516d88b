#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "crn/analytic.hpp"
#include "crn/experiments.hpp"

using namespace crn;
namespace sf = crn::specfun;

namespace {

std::string six(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool has_branch(const AnalyticReport& r, const std::string& b) {
  return std::find(r.branch_taken.begin(), r.branch_taken.end(), b) != r.branch_taken.end();
}

SystemConfig table_config(double snr_db) {
  SystemConfig c;
  c.set_snr_db(snr_db);
  c.set_mu(0.7);
  return c;
}

double gamma_cdf(int m, long double rate, long double x) {
  return static_cast<double>(sf::regularized_lower_gamma<long double>(m, std::max<long double>(x * rate, 0)));
}

long double gamma_pdf(int m, long double rate, long double x) {
  if (x <= 0) return 0;
  return std::exp(m * std::log(rate) + (m - 1) * std::log(x) - rate * x - std::lgamma(static_cast<long double>(m)));
}

// Decode probability by one-dimensional quadrature over |h_{a,i}|^2.
double decode_by_quadrature(Relay i, const SystemConfig& c) {
  const auto d = derive(c);
  const int my = c.m(i, Pu::a), mz = c.m(i, Pu::b);
  const long double a = my / static_cast<long double>(d.om(i, Pu::a));
  const long double b = mz / static_cast<long double>(d.om(i, Pu::b));
  const long double ra = d.rho[0], rb = d.rho[1];
  const long double y0 = (d.varphi[1] - 1) / ra, z0 = (d.varphi[0] - 1) / rb;
  const long double t = d.varphi[0] * d.varphi[1] - 1;
  auto f = [&](long double y) {
    const long double zmin = std::max(z0, (t - ra * y) / rb);
    return gamma_pdf(my, a, y) * (1 - gamma_cdf(mz, b, zmin));
  };
  const long double corner = (t - rb * z0) / ra;
  return static_cast<double>(oracle(f, y0, corner) + oracle_to_inf(f, corner));
}

// Primary SNR CDF by one-dimensional quadrature over the gain towards PU j.
double primary_cdf_by_quadrature(Relay i, Pu j, double gamma, const SystemConfig& c) {
  const auto d = derive(c);
  const long double mu = c.mu(i);
  const long double phi = mu - (1 - mu) * gamma;
  if (phi <= 0) return 1.0;
  const Pu o = other(j);
  const int mg = c.m(i, j), mo = c.m(i, o);
  const long double rg = mg / static_cast<long double>(d.om(i, j)), ro = mo / static_cast<long double>(d.om(i, o));
  const long double zg = d.zt(i, j), zo = d.zt(i, o);
  const long double gh = std::sqrt(gamma / (phi * zg));
  auto f = [&](long double g) {
    if (g <= 0) return 0.0L;
    return gamma_pdf(mg, rg, g) * gamma_cdf(mo, ro, (gamma / phi / g - zg * g) / zo);
  };
  return static_cast<double>(oracle(f, 0.0L, gh));
}

struct Case {
  const char* name;
  SystemConfig cfg;
};

std::vector<Case> mixed_cases() {
  std::vector<Case> v;
  {
    SystemConfig c = table_config(10);
    v.push_back({"table_10db", c});
  }
  {
    SystemConfig c;
    c.set_snr_db(15);
    c.m_1a = 1;
    c.m_1b = 3;
    c.m_12 = 2;
    c.beta = 0.3;
    c.eta_1 = 0.6;
    c.mu_1 = 0.8;
    c.r_a = 0.25;
    c.r_b = 0.3;
    c.r_1 = 0.2;
    c.r_2 = 0.4;
    c.d_1a = 1.2;
    c.d_1b = 0.8;
    c.d_12 = 1.1;
    v.push_back({"asym_15db", c});
  }
  {
    SystemConfig c;
    c.p_a = db_to_linear(5);
    c.p_b = db_to_linear(10);
    c.m_1a = 3;
    c.m_1b = 2;
    c.m_12 = 1;
    c.beta = 0.15;
    c.eta_1 = 0.8;
    c.mu_1 = 0.75;
    c.r_a = 0.3;
    c.r_b = 0.2;
    c.r_1 = 0.35;
    c.r_2 = 0.15;
    c.d_1a = 0.9;
    c.d_1b = 1.1;
    c.d_12 = 0.8;
    v.push_back({"unequal_power", c});
  }
  {
    SystemConfig c;
    c.set_snr_db(12);
    c.m_12 = 3;
    c.d_1a = c.d_1b = 1.0;
    c.mu_1 = 0.85;
    v.push_back({"equal_rate_param", c});
  }
  return v;
}

}  // namespace

// ------------------------------------------------------------- convergence table

TEST(ConvergenceTable, TerminalValues) {
  const auto out = experiments::run_table2();
  ASSERT_EQ(out.records.size(), 15u);
  const double want[4] = {0.639806, 0.110948, 0.324249, 0.0577399};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(*out.records.back().metrics[k].analytic, want[k], 5e-7) << k;
}

TEST(ConvergenceTable, StabilizationProfile) {
  const auto out = experiments::run_table2();
  // PU_a at 10 dB: constant at printed precision from index 8
  for (int p = 8; p < 15; ++p)
    EXPECT_EQ(six(*out.records[p].metrics[1].analytic), six(*out.records[7].metrics[1].analytic)) << p + 1;
  // every column: rows 14 and 15 agree at printed precision
  for (int k = 0; k < 4; ++k)
    EXPECT_EQ(six(*out.records[13].metrics[k].analytic), six(*out.records[14].metrics[k].analytic)) << k;
}

TEST(ConvergenceTable, MatchesReferenceRows) {
  const double reference[15][4] = {
      {0.720438, 0.129212, 0.408842, 0.0859022}, {0.618687, 0.108401, 0.359605, 0.0674041},
      {0.644159, 0.111233, 0.338323, 0.0610553}, {0.639092, 0.110922, 0.329713, 0.0588903},
      {0.639904, 0.11095, 0.326344, 0.0581447},  {0.639794, 0.110947, 0.325048, 0.0578843},
      {0.639807, 0.110948, 0.324553, 0.057792},  {0.639806, 0.110948, 0.324365, 0.0577589},
      {0.639806, 0.110948, 0.324293, 0.0577469}, {0.639806, 0.110948, 0.324266, 0.0577425},
      {0.639806, 0.110948, 0.324255, 0.0577408}, {0.639806, 0.110948, 0.324251, 0.0577402},
      {0.639806, 0.110948, 0.32425, 0.05774},    {0.639806, 0.110948, 0.324249, 0.0577399},
      {0.639806, 0.110948, 0.324249, 0.0577399}};
  const auto out = experiments::run_table2();
  for (int p = 0; p < 15; ++p)
    for (int k = 0; k < 4; ++k)
      EXPECT_EQ(std::stod(six(*out.records[p].metrics[k].analytic)), reference[p][k]) << "row " << p + 1 << " col " << k;
}

TEST(ConvergenceTable, TighterToleranceChangesNoPrintedDigit) {
  SeriesControl loose, tight;
  tight.rel_tol = loose.rel_tol * loose.rel_tol;
  tight.min_terms = 2 * loose.min_terms;
  tight.max_terms = 400;
  for (double snr : {5.0, 10.0, 15.0}) {
    const SystemConfig c = table_config(snr);
    const auto d = derive(c);
    EXPECT_EQ(six(primary_outage(Pu::a, c, d, loose).value), six(primary_outage(Pu::a, c, d, tight).value));
    EXPECT_EQ(six(iot_outage(Relay::iod1, c, d, loose).value), six(iot_outage(Relay::iod1, c, d, tight).value));
  }
}

// ------------------------------------------------- quadrature cross-checks

TEST(AnalyticOracle, DecodeProbMatchesQuadrature) {
  for (const auto& [name, c] : mixed_cases())
    for (double snr_shift : {-5.0, 0.0, 8.0}) {
      SystemConfig s = c;
      s.p_a *= db_to_linear(snr_shift);
      s.p_b *= db_to_linear(snr_shift);
      const double got = decode_prob(Relay::iod1, s, derive(s)).value;
      EXPECT_NEAR(got, decode_by_quadrature(Relay::iod1, s), 1e-11) << name << " shift " << snr_shift;
    }
}

TEST(AnalyticOracle, PrimaryCdfMatchesQuadrature) {
  int n = 0;
  for (const auto& [name, c] : mixed_cases())
    for (Pu j : {Pu::a, Pu::b})
      for (double scale : {0.3, 1.0, 2.0}) {
        const auto d = derive(c);
        const double g = d.gamma_th * scale;
        const auto r = cdf_primary_snr(Relay::iod1, j, g, c, d);
        EXPECT_NEAR(r.value, primary_cdf_by_quadrature(Relay::iod1, j, g, c), 1e-10)
            << name << " j=" << crn::name(j) << " scale " << scale;
        ++n;
      }
  EXPECT_EQ(n, 24);
}

// Values from an independent arbitrary-precision quadrature of the defining
// double integrals (decode region, primary SNR event, IoT SNR event), IoD_1.
TEST(AnalyticOracle, FrozenReferenceValues) {
  struct Ref {
    double decode, primary_a, primary_b, iot;
  };
  const Ref refs[] = {
#include "analytic_reference.inc"
  };
  const auto cases = mixed_cases();
  ASSERT_EQ(std::size(refs), cases.size());
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k].cfg;
    const auto d = derive(c);
    EXPECT_NEAR(decode_prob(Relay::iod1, c, d).value, refs[k].decode, 1e-10) << cases[k].name;
    EXPECT_NEAR(cdf_primary_snr(Relay::iod1, Pu::a, d.gamma_th, c, d).value, refs[k].primary_a, 1e-10)
        << cases[k].name;
    EXPECT_NEAR(cdf_primary_snr(Relay::iod1, Pu::b, d.gamma_th, c, d).value, refs[k].primary_b, 1e-10)
        << cases[k].name;
    EXPECT_NEAR(cdf_iot_snr(Relay::iod1, d.gammabar[0], c, d).value, refs[k].iot, 1e-9) << cases[k].name;
  }
}

// --------------------------------------------------------- branch continuity

namespace {

// Sets omega_1b so that the decode-probability rate parameters differ by a relative delta.
SystemConfig decode_pair_at(SystemConfig c, double delta) {
  const auto d = derive(c);
  const double a = c.m_1a / d.om(Relay::iod1, Pu::a);
  const double b = a * d.rho[1] / d.rho[0] * (1 + delta);
  c.omega_override.o_1b = c.m_1b / b;
  return c;
}

// Same for the rate pair of the PU_a CDF.
SystemConfig cdf_pair_at(SystemConfig c, double delta) {
  const auto d = derive(c);
  const double a = c.m_1a / d.om(Relay::iod1, Pu::a);
  const double b = a * d.zt(Relay::iod1, Pu::b) / d.zt(Relay::iod1, Pu::a) * (1 + delta);
  c.omega_override.o_1b = c.m_1b / b;
  return c;
}

std::vector<SystemConfig> continuity_sequences() {
  std::vector<SystemConfig> v;
  const int ms[][2] = {{1, 1}, {1, 2}, {2, 1}, {2, 2}, {3, 2}, {2, 3}, {3, 3}, {1, 3}, {4, 2}, {2, 4}};
  for (int k = 0; k < 10; ++k) {
    SystemConfig c;
    c.set_snr_db(4.0 + 2.0 * k);
    c.m_1a = ms[k][0];
    c.m_1b = ms[k][1];
    c.mu_1 = 0.65 + 0.03 * k;
    c.beta = 0.15 + 0.02 * k;
    v.push_back(c);
  }
  return v;
}

}  // namespace

TEST(BranchContinuity, DecodeProbability) {
  for (const auto& base : continuity_sequences()) {
    const SystemConfig eq = decode_pair_at(base, 0.0);
    const auto r0 = decode_prob(Relay::iod1, eq, derive(eq));
    ASSERT_TRUE(has_branch(r0, "decode.equal_rate_parameters"));
    for (double delta : {1e-2, 1e-4, 1e-6, 1e-8, -1e-8}) {
      const SystemConfig c = decode_pair_at(base, delta);
      const auto r = decode_prob(Relay::iod1, c, derive(c));
      ASSERT_TRUE(has_branch(r, "decode.distinct_rate_parameters"));
      const double gap = std::fabs(r.value - r0.value) / std::fabs(r0.value);
      if (std::fabs(delta) <= 1e-8) {
        EXPECT_LE(gap, 1e-6) << "m=" << base.m_1a << "," << base.m_1b;
      } else if (std::fabs(delta) <= 1e-6) {
        EXPECT_LE(gap, 1e-4);
      }
    }
  }
}

TEST(BranchContinuity, PrimaryCdf) {
  for (const auto& base : continuity_sequences()) {
    const SystemConfig eq = cdf_pair_at(base, 0.0);
    const auto d0 = derive(eq);
    const auto r0 = cdf_primary_snr(Relay::iod1, Pu::a, d0.gamma_th, eq, d0);
    ASSERT_TRUE(has_branch(r0, "primary_cdf.equal_rate_parameters"));
    for (double delta : {1e-2, 1e-4, 1e-6, 1e-8, -1e-8}) {
      const SystemConfig c = cdf_pair_at(base, delta);
      const auto d = derive(c);
      const auto r = cdf_primary_snr(Relay::iod1, Pu::a, d.gamma_th, c, d);
      ASSERT_TRUE(has_branch(r, "primary_cdf.distinct_rate_parameters"));
      const double gap = std::fabs(r.value - r0.value) / std::fabs(r0.value);
      if (std::fabs(delta) <= 1e-8) {
        EXPECT_LE(gap, 1e-6) << "m=" << base.m_1a << "," << base.m_1b;
      }
    }
  }
}

// ------------------------------------------------------------- feasibility

TEST(Feasibility, PrimaryCdfSaturatesBelowBound) {
  SystemConfig c;
  c.beta = 0.2;
  c.set_rates(1.0 / 3);
  c.set_snr_db(25);
  const auto d0 = derive(c);
  const double bound = d0.gamma_th / (1 + d0.gamma_th);
  EXPECT_GE(bound, 0.575);
  EXPECT_LE(bound, 0.585);
  for (double mu : {0.05, 0.2, 0.4, 0.5, 0.57, bound}) {
    c.set_mu(mu);
    const auto d = derive(c);
    for (Pu j : {Pu::a, Pu::b}) {
      const auto r = cdf_primary_snr(Relay::iod1, j, d.gamma_th, c, d);
      EXPECT_EQ(r.value, 1.0) << mu;
      EXPECT_TRUE(has_branch(r, "primary_cdf.infeasible_mu"));
    }
  }
  c.set_mu(0.59);
  const auto d = derive(c);
  EXPECT_LT(cdf_primary_snr(Relay::iod1, Pu::a, d.gamma_th, c, d).value, 1.0);
}

// -------------------------------------------------------- qualitative shape

TEST(AnalyticShape, OutagesDecreaseWithSnr) {
  SystemConfig c;
  c.set_mu(0.8);
  double prev_p = 2, prev_i = 2;
  for (double snr = 0; snr <= 30; snr += 2) {
    c.set_snr_db(snr);
    const auto d = derive(c);
    const double p = primary_outage(Pu::a, c, d).value, i = iot_outage(Relay::iod1, c, d).value;
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_LT(p, prev_p) << snr;
    EXPECT_LT(i, prev_i) << snr;
    prev_p = p;
    prev_i = i;
  }
}

TEST(AnalyticShape, QuadratureFallbackIsReported) {
  SystemConfig c;
  c.set_snr_db(0);
  c.d_1a = 3.0;  // weak PU_a link: large rate parameter on the Taylor variable
  c.mu_1 = 0.95;
  const auto d = derive(c);
  const auto r = cdf_primary_snr(Relay::iod1, Pu::a, d.gamma_th, c, d);
  EXPECT_TRUE(has_branch(r, "primary_cdf.quadrature"));
  EXPECT_NEAR(r.value, primary_cdf_by_quadrature(Relay::iod1, Pu::a, d.gamma_th, c), 1e-10);
}

TEST(AnalyticShape, DirectOutageClosedForm) {
  SystemConfig c;
  c.set_snr_db(20);
  c.direct = DirectLink{1, 2.0};
  // Rayleigh: 1 - exp(-gammatilde / (Omega rho))
  const double gt = std::exp2(2.0 / 3) - 1, om = std::pow(2.0, -3.0);
  EXPECT_NEAR(direct_outage(Pu::a, c), 1 - std::exp(-gt / (om * 100)), 1e-15);
  c.direct.reset();
  EXPECT_THROW(direct_outage(Pu::a, c), ConfigError);
}

TEST(AnalyticShape, CriticalMuIsACrossing) {
  SystemConfig c;
  c.set_snr_db(25);
  c.direct = DirectLink{2, 2.0};
  const auto cm = critical_mu(Pu::a, c);
  ASSERT_EQ(cm.kind, CriticalMu::Kind::crossing);
  EXPECT_GT(cm.mu, cm.lower_bound);
  EXPECT_LT(cm.mu, 1.0);
  auto at = [&](double mu) {
    SystemConfig s = c;
    s.set_mu(mu);
    return primary_outage(Pu::a, s, derive(s)).value - direct_outage(Pu::a, s);
  };
  EXPECT_GT(at(cm.mu - 2e-4), 0.0);
  EXPECT_LT(at(cm.mu + 2e-4), 0.0);
}

TEST(AnalyticShape, ThroughputDecomposes) {
  SystemConfig c;
  c.set_snr_db(10);
  c.set_mu(0.8);
  const auto d = derive(c);
  const auto t = throughput(c, d);
  EXPECT_NEAR(t.total, t.primary + t.iot, 1e-15);
  EXPECT_GT(t.primary, 0);
  EXPECT_NEAR(energy_efficiency(t, c), t.total / ((1 + 2 * c.beta) / 3 * (c.p_a + c.p_b)), 1e-15);
}

TEST(SeriesControlTest, RejectsBadSettingsAndReportsNonConvergence) {
  SeriesControl bad;
  bad.max_terms = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  SeriesControl starved;
  starved.min_terms = 1;
  starved.max_terms = 2;
  starved.rel_tol = 1e-30;
  const SystemConfig c = table_config(10);
  const auto d = derive(c);
  EXPECT_THROW(cdf_primary_snr(Relay::iod1, Pu::a, d.gamma_th, c, d, starved), SeriesNonConvergence);
  EXPECT_THROW(cdf_primary_snr(Relay::iod1, Pu::a, -1.0, c, d), std::domain_error);
}
