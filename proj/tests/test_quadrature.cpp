#include <gtest/gtest.h>

#include <cmath>

#include "crn/quadrature.hpp"

using namespace crn;

TEST(Quadrature, PolynomialsAreExact) {
  // Kronrod-15 integrates degree <= 22 exactly on one panel
  for (int n = 0; n <= 20; ++n) {
    const auto r = integrate([n](long double x) { return std::pow(x, n); }, -1.0L, 2.0L);
    const long double want = (std::pow(2.0L, n + 1) - std::pow(-1.0L, n + 1)) / (n + 1);
    EXPECT_NEAR(static_cast<double>(r.value / want), 1.0, 1e-16) << n;
    EXPECT_TRUE(r.converged);
  }
}

TEST(Quadrature, EndpointSingularity) {
  const auto r = integrate([](long double x) { return x > 0 ? 1.0L / std::sqrt(x) : 0.0L; }, 0.0L, 1.0L);
  EXPECT_NEAR(static_cast<double>(r.value), 2.0, 1e-11);
}

TEST(Quadrature, SemiInfinite) {
  const auto r = integrate_to_inf([](long double x) { return std::exp(-x) * x * x; }, 0.0L);
  EXPECT_NEAR(static_cast<double>(r.value), 2.0, 1e-13);
  const auto g = integrate_to_inf([](long double x) { return std::exp(-x * x); }, 0.0L);
  EXPECT_NEAR(static_cast<double>(g.value), std::sqrt(M_PI) / 2, 1e-13);
}

TEST(Quadrature, OracleThrowsWhenBudgetExhausted) {
  QuadratureSpec tight;
  tight.max_subdivisions = 2;
  EXPECT_THROW(oracle([](long double x) { return std::sin(1.0L / (x + 1e-3L)); }, 0.0L, 1.0L, tight),
               std::runtime_error);
}

TEST(Quadrature, SpecValidation) {
  QuadratureSpec s;
  s.rel_tol = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}
