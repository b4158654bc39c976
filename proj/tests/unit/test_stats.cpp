#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

#include "liahr/error.hpp"
#include "liahr/stats.hpp"

using namespace liahr;
namespace mp = boost::multiprecision;

namespace {

/// Exact P(X >= k), X ~ Bin(n, 1/2), by big-integer binomial sums.
double exact_upper_tail(int k, int n) {
  mp::cpp_int sum = 0, c = 1;
  for (int i = 0; i <= n; ++i) {
    if (i >= k) sum += c;
    c = c * (n - i) / (i + 1);
  }
  mp::cpp_bin_float_100 num(sum);
  mp::cpp_bin_float_100 den(mp::cpp_int(1) << n);
  return static_cast<double>(num / den);
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

}  // namespace

TEST_CASE("published chi-square p-values") {
  struct Case {
    stats::ContingencyTable2x2 t;
    double p;
  };
  const Case cases[] = {{{25, 5, 4, 26}, 2.38e-7},   {{42, 18, 12, 27}, 2.90e-4}, {{33, 7, 17, 23}, 5.32e-4},
                        {{34, 6, 17, 23}, 1.98e-4},  {{28, 9, 6, 17}, 4.64e-4},   {{30, 10, 21, 19}, 6.28e-2},
                        {{19, 11, 15, 15}, 4.34e-1}};
  for (const auto& c : cases) {
    const auto r = stats::chi2_independence_yates(c.t);
    CHECK(r.df == 1);
    CHECK(rel_close(r.p_value, c.p, 0.01));
  }
}

TEST_CASE("Yates statistic by hand") {
  // E = 15 for every cell of [[25,5],[5,25]]: 4 * (10 - 0.5)^2 / 15
  const auto r = stats::chi2_independence_yates({25, 5, 5, 25});
  CHECK(r.statistic == doctest::Approx(4 * 9.5 * 9.5 / 15));
  // |O - E| below 0.5 clamps to zero.
  CHECK(stats::chi2_independence_yates({10, 10, 10, 10}).statistic == 0.0);
  CHECK(stats::chi2_independence_yates({10, 10, 10, 10}).p_value == doctest::Approx(1.0));
  CHECK(stats::chi2_independence_yates({25, 5, 4, 26}).p_value ==
        doctest::Approx(stats::chi2_independence_yates(stats::ContingencyTable2x2{25, 5, 4, 26}.transposed()).p_value));
}

TEST_CASE("degenerate tables are rejected") {
  CHECK_THROWS_AS(stats::chi2_independence_yates({0, 0, 5, 5}), ValidationError);
  CHECK_THROWS_AS(stats::chi2_independence_yates({-1, 2, 3, 4}), ValidationError);
}

TEST_CASE("published binomial p-values") {
  struct Case {
    int k, n;
    double p;
  };
  const Case cases[] = {{41, 56, 6.86e-4}, {38, 60, 5.19e-2}, {26, 38, 3.36e-2}, {31, 39, 2.94e-4},
                        {25, 26, 8.05e-7}, {33, 60, 5.19e-1}};
  for (const auto& c : cases) CHECK(rel_close(stats::binomial_two_sided_doubled(c.k, c.n).p_value, c.p, 0.01));
  CHECK(stats::binomial_two_sided_doubled(28, 60).p_value == 1.0);
}

TEST_CASE("binomial tails agree with exact big-integer sums") {
  for (int n : {1, 2, 7, 26, 60, 200, 1000}) {
    for (int k = 0; k <= n; k += std::max(1, n / 17)) {
      const double want = exact_upper_tail(k, n);
      const double got = stats::binomial_upper_tail_half(k, n);
      CHECK(rel_close(got, want, 1e-10));
    }
  }
  CHECK(stats::binomial_one_sided(41, 56).p_value == doctest::Approx(exact_upper_tail(41, 56)));
  CHECK(stats::binomial_upper_tail_half(0, 10) == 1.0);
  CHECK_THROWS_AS(stats::binomial_two_sided_doubled(5, 4), ValidationError);
  CHECK_THROWS_AS(stats::binomial_two_sided_doubled(1, 0), ValidationError);
}

TEST_CASE("chi-square tail") {
  CHECK(stats::chi2_upper_tail(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::chi2_upper_tail(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::chi2_upper_tail(0.0, 3) == 1.0);
  // df = 2 has the closed form exp(-x/2).
  CHECK(stats::chi2_upper_tail(4.2, 2) == doctest::Approx(std::exp(-2.1)));
}

TEST_CASE("goodness of fit") {
  const std::vector<std::int64_t> obs{30, 20, 50};
  const std::vector<double> exp{0.3, 0.2, 0.5};
  const auto r = stats::chi2_goodness_of_fit(obs, exp);
  CHECK(r.statistic == 0.0);
  CHECK(r.df == 2);
  CHECK(r.p_value == doctest::Approx(1.0));
  const std::vector<std::int64_t> skew{60, 20, 20};
  const auto s = stats::chi2_goodness_of_fit(skew, exp);
  CHECK(s.statistic == doctest::Approx(30.0 * 30 / 30 + 0 + 30.0 * 30 / 50));
  CHECK(s.p_value < 1e-6);
  const std::vector<double> bad{0.5, 0.6, -0.1};
  CHECK_THROWS_AS(stats::chi2_goodness_of_fit(obs, bad), ValidationError);
  const std::vector<double> short_exp{0.5, 0.5};
  CHECK_THROWS_AS(stats::chi2_goodness_of_fit(obs, short_exp), ValidationError);
}
