#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

namespace liahr::stats {

/// Rows: copy-correct / copy-wrong. Columns: human-reasonable /
/// human-unreasonable.
struct ContingencyTable2x2 {
  std::int64_t a = 0, b = 0, c = 0, d = 0;

  std::int64_t total() const { return a + b + c + d; }
  ContingencyTable2x2 transposed() const { return {a, c, b, d}; }
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  int df = 0;

  nlohmann::ordered_json to_json() const;
};

/// Upper tail of the chi-square distribution. df = 1 uses erfc(sqrt(x/2));
/// other df use the regularized upper incomplete gamma Q(df/2, x/2).
double chi2_upper_tail(double x, int df);

/// Pearson chi-square test of independence with Yates' continuity
/// correction, each cell term clamped at zero: sum(max(|O-E|-0.5, 0)^2 / E).
TestResult chi2_independence_yates(const ContingencyTable2x2& table);

/// Exact upper tail P(X >= k) for X ~ Binomial(n, 1/2).
double binomial_upper_tail_half(std::int64_t k, std::int64_t n);

/// min(1, 2 * P(X >= k)), X ~ Binomial(n, 1/2); k counts preferences for
/// the model's labels.
TestResult binomial_two_sided_doubled(std::int64_t successes, std::int64_t trials);
/// P(X >= k) alone.
TestResult binomial_one_sided(std::int64_t successes, std::int64_t trials);

/// Pearson goodness of fit; `expected` holds frequencies that are strictly
/// positive and sum to 1 (within 1e-9). df = bins - 1.
TestResult chi2_goodness_of_fit(std::span<const std::int64_t> observed,
                                std::span<const double> expected);

}  // namespace liahr::stats
