#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "tepcvsr/formulation.hpp"

using namespace tepcvsr;

TEST_CASE("hand values") {
  const auto r = cvsr_susceptance_bounds(0.1, 0.0, 0.02);
  CHECK(std::abs(r.b_min - (-1.0 / 0.6)) <= 1e-9);
  CHECK(std::abs(r.b_min - (-1.66667)) <= 1e-5);
  CHECK(std::abs(r.b_max) <= 1e-9);

  const auto s = cvsr_susceptance_bounds(0.2, 0.01, 0.04);
  // 1/0.2 - 1/0.24 and 1/0.2 - 1/0.21
  CHECK(std::abs(s.b_min - (5.0 - 1.0 / 0.24) * -1.0) <= 1e-9);
  CHECK(std::abs(s.b_max - (5.0 - 1.0 / 0.21) * -1.0) <= 1e-9);
}

TEST_CASE("identity 1/x + b = 1/(x + x_v) over random samples") {
  std::mt19937_64 rng(20261014);
  std::uniform_real_distribution<double> xk(0.01, 1.0), frac(0.0, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const double x = xk(rng);
    double a = frac(rng) * x, b = frac(rng) * x;
    if (a > b) std::swap(a, b);
    const auto r = cvsr_susceptance_bounds(x, a, b);
    CHECK(std::abs(1.0 / x + r.b_min - 1.0 / (x + b)) <= 1e-9);
    CHECK(std::abs(1.0 / x + r.b_max - 1.0 / (x + a)) <= 1e-9);
    CHECK(r.b_min <= r.b_max);
    CHECK(r.b_max <= 0.0);
  }
}

TEST_CASE("big-M constants") {
  const auto m = big_m_values(10.0, -1.0 / 0.6);
  CHECK(m.m_k == doctest::Approx((1.0 / 0.6) * kThetaMax).epsilon(1e-12));
  CHECK(m.m_prime == doctest::Approx(10.0 * 3.141592653589793).epsilon(1e-12));
}

TEST_CASE("discounting") {
  CHECK(std::abs(discounted_cost(1.0, 6, 0.05) - 0.783526) <= 1e-6);
  CHECK(discounted_cost(7.0, 1, 0.05) == 7.0);
  double sum = 0.0;
  for (int y = 6; y <= 10; ++y) sum += 1.0 / std::pow(1.05, y - 1);
  CHECK(std::abs(discounted_annuity(6, 5, 0.05) - sum) <= 1e-12);
}
