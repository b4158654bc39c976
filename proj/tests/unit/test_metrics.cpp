#include <doctest.h>

#include <cmath>

#include "liahr/error.hpp"
#include "liahr/metrics.hpp"
#include "liahr/sampler.hpp"
#include "metric_oracle.hpp"
#include "support.hpp"

using namespace liahr;
using metrics::LabelPair;

namespace {

std::vector<LabelPair> random_pairs(SeededSampler& s, std::size_t n, std::size_t k) {
  std::vector<LabelPair> v;
  const auto mask = k == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    // A quarter of the sets are empty so the both-empty conventions matter.
    auto draw = [&] { return s.uniform_index(4) == 0 ? LabelSet{} : LabelSet::from_bits(s.next_u64() & mask); };
    v.push_back({draw(), draw()});
  }
  return v;
}

}  // namespace

TEST_CASE("hand-computed example") {
  std::vector<LabelPair> v{{LabelSet::of({0, 1}), LabelSet::of({1})},
                           {LabelSet::of({2}), LabelSet::of({2})},
                           {LabelSet{}, LabelSet{}},
                           {LabelSet::of({0}), LabelSet::of({1})}};
  CHECK(metrics::jaccard_samples(v) == doctest::Approx((0.5 + 1 + 1 + 0) / 4));
  CHECK(metrics::jaccard_samples(v, metrics::EmptyPairRule::exclude) == doctest::Approx(1.5 / 3));
  CHECK(metrics::accuracy(v) == doctest::Approx(0.5));
  // tp = 2, fp = 2, fn = 1
  CHECK(metrics::micro_f1(v) == doctest::Approx(4.0 / 7.0));
  // per label: l0 tp0 fp2 fn0 -> 0; l1 tp1 fp0 fn1 -> 2/3; l2 tp1 -> 1
  CHECK(metrics::macro_f1(v, 3) == doctest::Approx((0 + 2.0 / 3 + 1) / 3));
}

TEST_CASE("kernels match the serial reference and the set oracle") {
  SeededSampler s(2024, "metric-oracle");
  for (int trial = 0; trial < 300; ++trial) {
    const auto k = 1 + s.uniform_index(11);
    const auto n = 1 + s.uniform_index(50);
    const auto v = random_pairs(s, n, k);
    const auto sets = testing::to_sets(v);
    CHECK(std::abs(metrics::jaccard_samples(v) - testing::oracle_jaccard(sets)) <= 1e-12);
    CHECK(std::abs(metrics::micro_f1(v) - testing::oracle_micro_f1(sets)) <= 1e-12);
    CHECK(std::abs(metrics::macro_f1(v, k) - testing::oracle_macro_f1(sets, k)) <= 1e-12);
    CHECK(std::abs(metrics::accuracy(v) - testing::oracle_accuracy(sets)) <= 1e-12);
    CHECK(metrics::jaccard_samples(v) == metrics::serial::jaccard_samples(v));
    CHECK(metrics::micro_f1(v) == metrics::serial::micro_f1(v));
    CHECK(metrics::macro_f1(v, k) == metrics::serial::macro_f1(v, k));
    CHECK(metrics::accuracy(v) == metrics::serial::accuracy(v));
  }
}

TEST_CASE("large inputs cross the block size and stay thread-count independent") {
  SeededSampler s(5, "large");
  const auto v = random_pairs(s, 10'007, 20);
  const auto j = metrics::jaccard_samples(v);
  CHECK(std::abs(j - metrics::serial::jaccard_samples(v)) <= 1e-12);
  CHECK(metrics::micro_f1(v) == doctest::Approx(metrics::serial::micro_f1(v)).epsilon(1e-14));
  const auto c1 = metrics::label_counts(v);
  const auto c2 = metrics::serial::label_counts(v);
  CHECK(c1.tp == c2.tp);
  CHECK(c1.fp == c2.fp);
  CHECK(c1.fn == c2.fn);
  // Same inputs, same bits on every call.
  CHECK(metrics::jaccard_samples(v) == j);
}

TEST_CASE("micro F1 when nothing is labelled anywhere") {
  std::vector<LabelPair> v{{LabelSet{}, LabelSet{}}};
  CHECK(metrics::micro_f1(v) == 1.0);
  CHECK(metrics::macro_f1(v, 3) == 0.0);
  CHECK_THROWS_AS(metrics::jaccard_samples(v, metrics::EmptyPairRule::exclude), ValidationError);
}

TEST_CASE("empty input is rejected") {
  std::vector<LabelPair> v;
  CHECK_THROWS_AS(metrics::jaccard_samples(v), ValidationError);
  CHECK_THROWS_AS(metrics::accuracy(v), ValidationError);
}

TEST_CASE("binary ROC-AUC from hard predictions") {
  auto space = testing::make_space(2, TaskKind::binary);  // positive = l1
  const auto pos = LabelSet::of({1}), neg = LabelSet::of({0});
  std::vector<LabelPair> v{{pos, pos}, {neg, pos}, {neg, neg}, {neg, neg}, {pos, neg}};
  // TPR = 1/2, TNR = 2/3
  CHECK(metrics::roc_auc_binary(v, *space) == doctest::Approx((0.5 + 2.0 / 3.0) / 2));
  std::vector<LabelPair> one_class{{pos, pos}};
  CHECK_THROWS_AS(metrics::roc_auc_binary(one_class, *space), ValidationError);
  auto report = metrics::evaluate(v, *space);
  REQUIRE(report.roc_auc.has_value());
  CHECK(report.n == 5);
}

TEST_CASE("report records both-empty handling") {
  auto space = testing::make_space(3);
  std::vector<LabelPair> v{{LabelSet{}, LabelSet{}}, {LabelSet::of({0}), LabelSet::of({0, 1})}};
  auto r = metrics::evaluate(v, *space, 2);
  CHECK(r.n_both_empty == 1);
  CHECK(r.n_unparsed == 2);
  REQUIRE(r.jaccard_excluding_empty.has_value());
  CHECK(*r.jaccard_excluding_empty == doctest::Approx(0.5));
  CHECK(r.jaccard_samples == doctest::Approx(0.75));
  const auto j = r.to_json();
  CHECK(j.contains("micro_f1"));
}
