#include "commitgate/chisq.hpp"
#include "commitgate/error.hpp"
#include "commitgate/stats.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace commitgate;

TEST_CASE("mann-whitney and cliff's delta match exhaustive pair counts") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 30);
  std::uniform_int_distribution<int> value(0, 12);  // small range forces ties
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    for (auto& v : a) v = value(rng);
    for (auto& v : b) v = value(rng);
    const auto r = mann_whitney_u(a, b);
    CHECK(r.u_a == oracle::mann_whitney_u(a, b));
    CHECK(r.u_b == oracle::mann_whitney_u(b, a));
    CHECK(r.u_a + r.u_b == static_cast<double>(a.size() * b.size()));
    CHECK(cliffs_delta(a, b) == oracle::cliffs_delta(a, b));
    CHECK(r.p_two_sided >= 0);
    CHECK(r.p_two_sided <= 1);
  }
}

TEST_CASE("mann-whitney edge cases") {
  const std::vector<double> same = {1, 1, 1};
  const auto r = mann_whitney_u(same, same);
  CHECK(r.p_two_sided == 1.0);
  CHECK(cliffs_delta(std::vector<double>{3, 4}, std::vector<double>{1, 2}) == 1.0);
  CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, same), InputError);
}

TEST_CASE("mann-whitney normal approximation on a textbook example") {
  // Without ties: U = 3 of 25 pairs; var = 5*5*11/12, z = (|3-12.5| - 0.5)/sd.
  const std::vector<double> a = {1, 2, 3, 4, 9}, b = {5, 6, 7, 8, 10};
  const auto r = mann_whitney_u(a, b);
  CHECK(r.u_a == 4);
  const double sd = std::sqrt(25.0 * 11 / 12);
  const double z = (12.5 - 4 - 0.5) / sd;
  CHECK(r.p_two_sided == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("chi-square tail against closed forms") {
  // df = 2: exp(-x/2). df = 1: erfc(sqrt(x/2)).
  for (double x : {0.01, 0.5, 1.0, 3.84, 10.0, 50.0, 200.0}) {
    CAPTURE(x);
    CHECK(chisq_upper_tail(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-10));
    CHECK(chisq_upper_tail(x, 1) == doctest::Approx(std::erfc(std::sqrt(x / 2))).epsilon(1e-10));
    // df = 4: exp(-x/2) (1 + x/2)
    CHECK(chisq_upper_tail(x, 4) == doctest::Approx(std::exp(-x / 2) * (1 + x / 2)).epsilon(1e-10));
  }
  CHECK(chisq_upper_tail(0, 5) == 1.0);
  CHECK(chisq_upper_tail(570.2, 15) < 2.2e-16);
  CHECK(regularized_gamma_p(3.5, 2.0) + regularized_gamma_q(3.5, 2.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chisq_upper_tail(1, 0), InputError);
}
