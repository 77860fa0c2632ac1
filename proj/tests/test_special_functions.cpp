#include <cfloat>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <gtest/gtest.h>

#include "ehtrain/rng.hpp"
#include "ehtrain/special_functions.hpp"
#include "oracles.hpp"

using ehtrain::e1;
using ehtrain::exp_e1;

TEST(SpecialFunctions, KnownValues) {
  EXPECT_NEAR(e1(1.0), 0.21938393439552027368, 1e-15);
  EXPECT_NEAR(exp_e1(1.0), 0.59634736232319407434, 1e-15);
  EXPECT_NEAR(e1(0.5), 0.55977359477616081175, 1e-15);
  EXPECT_NEAR(e1(3.0) / 0.013048381094197037, 1.0, 1e-13);
}

TEST(SpecialFunctions, MatchesQuadratureOnLogGrid) {
  for (double x : oracle::log_grid(1e-10, 1e3, 200)) {
    const long double ref_scaled = oracle::exp_e1_quadrature(x);
    EXPECT_NEAR(exp_e1(x) / static_cast<double>(ref_scaled), 1.0, 1e-10) << "x = " << x;
    const long double ref = oracle::e1_quadrature(x);
    if (ref >= DBL_MIN) {
      EXPECT_NEAR(e1(x) / static_cast<double>(ref), 1.0, 1e-10) << "x = " << x;
    }
  }
}

TEST(SpecialFunctions, BranchBoundaryIsContinuous) {
  const double below = std::nextafter(1.0, 0.0);
  const double above = std::nextafter(1.0, 2.0);
  EXPECT_NEAR(exp_e1(below) / exp_e1(above), 1.0, 1e-14);
  EXPECT_NEAR(e1(below) / e1(above), 1.0, 1e-14);
}

TEST(SpecialFunctions, LargeArgumentAsymptote) {
  for (double x : {1e3, 1e4, 1e6, 1e9, 1e12}) {
    EXPECT_NEAR(x * exp_e1(x), 1.0, 0.01) << "x = " << x;
  }
}

TEST(SpecialFunctions, SmallArgumentLogBehaviour) {
  const double x = 1e-12;
  EXPECT_NEAR(e1(x), -ehtrain::special::kEulerGamma - std::log(x), 1e-10);
}

TEST(SpecialFunctions, BoundsAndMonotonicity) {
  ehtrain::CounterRng rng(ehtrain::RngSpec{7, 0});
  for (int i = 0; i < 1'000'000; ++i) {
    const double a = std::exp(-23.0 + 30.0 * rng.uniform());
    const double b = std::exp(-23.0 + 30.0 * rng.uniform());
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    if (lo == hi) continue;
    const double flo = exp_e1(lo);
    const double fhi = exp_e1(hi);
    ASSERT_GE(flo, fhi) << lo << " " << hi;
    ASSERT_GE(flo * (lo + 1.0), 1.0 - 1e-12) << lo;
    ASSERT_LE(flo * lo, 1.0 + 1e-12) << lo;
  }
}

TEST(SpecialFunctions, ScaledBoundsTight) {
  // 1/(x+1) < exp(x) E1(x) < 1/x
  for (double x : oracle::log_grid(1e-6, 1e6, 400)) {
    const double v = exp_e1(x);
    EXPECT_GT(v, 1.0 / (x + 1.0) * (1.0 - 1e-14));
    EXPECT_LT(v, 1.0 / x * (1.0 + 1e-14));
  }
}

TEST(SpecialFunctions, DomainErrors) {
  EXPECT_THROW(e1(0.0), std::domain_error);
  EXPECT_THROW(e1(-1.0), std::domain_error);
  EXPECT_THROW(exp_e1(0.0), std::domain_error);
  EXPECT_THROW(exp_e1(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  EXPECT_EQ(e1(std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_EQ(exp_e1(std::numeric_limits<double>::infinity()), 0.0);
}

TEST(SpecialFunctions, UnderflowGoesToZero) {
  EXPECT_EQ(e1(800.0), 0.0);
  EXPECT_GT(exp_e1(800.0), 0.0);
}
