#include "liahr/stats.hpp"

#include <cmath>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "liahr/error.hpp"

namespace liahr::stats {

nlohmann::ordered_json TestResult::to_json() const {
  return {{"method", method}, {"statistic", statistic}, {"df", df}, {"p_value", p_value}};
}

double chi2_upper_tail(double x, int df) {
  if (df < 1) throw ValidationError("chi-square df must be >= 1");
  if (x <= 0.0) return 1.0;
  if (df == 1) return std::erfc(std::sqrt(x / 2.0));
  return boost::math::gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

TestResult chi2_independence_yates(const ContingencyTable2x2& t) {
  if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) throw ValidationError("negative cell count");
  const double n = static_cast<double>(t.total());
  const double r1 = static_cast<double>(t.a + t.b), r2 = static_cast<double>(t.c + t.d);
  const double c1 = static_cast<double>(t.a + t.c), c2 = static_cast<double>(t.b + t.d);
  if (n <= 0 || r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    throw ValidationError("contingency table has a zero margin");
  }
  const double observed[4] = {static_cast<double>(t.a), static_cast<double>(t.b),
                              static_cast<double>(t.c), static_cast<double>(t.d)};
  const double expected[4] = {r1 * c1 / n, r1 * c2 / n, r2 * c1 / n, r2 * c2 / n};
  double stat = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double dev = std::max(std::abs(observed[i] - expected[i]) - 0.5, 0.0);
    stat += dev * dev / expected[i];
  }
  return {stat, chi2_upper_tail(stat, 1), "chi2_independence_yates", 1};
}

double binomial_upper_tail_half(std::int64_t k, std::int64_t n) {
  if (n < 1) throw ValidationError("binomial test needs n >= 1");
  if (k < 0 || k > n) throw ValidationError("binomial test needs 0 <= k <= n");
  if (k == 0) return 1.0;
  // Sum pmf(i) for i = k..n from pmf(k) = C(n,k) / 2^n using the ratio
  // pmf(i+1)/pmf(i) = (n-i)/(i+1). Terms shrink past the mode, so summing
  // from the far end keeps small terms from being swamped.
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double log_pmf_k = std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) -
                           nn * std::log(2.0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n - k + 1));
  double pmf = std::exp(log_pmf_k);
  for (std::int64_t i = k; i <= n; ++i) {
    terms.push_back(pmf);
    pmf *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  double sum = 0.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) sum += *it;
  return std::min(sum, 1.0);
}

TestResult binomial_two_sided_doubled(std::int64_t successes, std::int64_t trials) {
  const double tail = binomial_upper_tail_half(successes, trials);
  return {static_cast<double>(successes), std::min(1.0, 2.0 * tail), "binomial_two_sided_doubled", 0};
}

TestResult binomial_one_sided(std::int64_t successes, std::int64_t trials) {
  return {static_cast<double>(successes), binomial_upper_tail_half(successes, trials),
          "binomial_one_sided_upper", 0};
}

TestResult chi2_goodness_of_fit(std::span<const std::int64_t> observed,
                                std::span<const double> expected) {
  if (observed.size() != expected.size()) {
    throw ValidationError("goodness of fit: observed has " + std::to_string(observed.size()) +
                          " bins, expected has " + std::to_string(expected.size()));
  }
  if (observed.size() < 2) throw ValidationError("goodness of fit needs at least two bins");
  std::int64_t total = 0;
  for (auto o : observed) {
    if (o < 0) throw ValidationError("negative observed count");
    total += o;
  }
  if (total <= 0) throw ValidationError("goodness of fit needs a positive total count");
  double norm = 0.0;
  for (auto e : expected) {
    if (!(e > 0.0)) throw ValidationError("expected frequencies must be strictly positive");
    norm += e;
  }
  if (std::abs(norm - 1.0) > 1e-9) throw ValidationError("expected frequencies must sum to 1");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = expected[i] * static_cast<double>(total);
    const double diff = static_cast<double>(observed[i]) - e;
    stat += diff * diff / e;
  }
  const int df = static_cast<int>(observed.size()) - 1;
  return {stat, chi2_upper_tail(stat, df), "chi2_goodness_of_fit", df};
}

}  // namespace liahr::stats
