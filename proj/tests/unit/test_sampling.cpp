#include <doctest.h>

#include <map>
#include <set>

#include "liahr/error.hpp"
#include "liahr/sampler.hpp"
#include "liahr/sampling.hpp"
#include "liahr/stats.hpp"
#include "support.hpp"

using namespace liahr;

TEST_CASE("same seed and stream reproduce the same draws") {
  SeededSampler a(7, "demos"), b(7, "demos"), c(8, "demos"), d(7, "other");
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
    vd.push_back(d.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("uniform_index stays in range and covers it") {
  SeededSampler s(1, "range");
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = s.uniform_index(7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  std::vector<std::int64_t> obs(hits.begin(), hits.end());
  std::vector<double> exp(7, 1.0 / 7.0);
  CHECK(stats::chi2_goodness_of_fit(obs, exp).p_value > 0.001);
}

TEST_CASE("uniform01 is in [0, 1)") {
  SeededSampler s(3, "u");
  double lo = 1, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("shuffle is a permutation") {
  SeededSampler s(5, "shuffle");
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  s.shuffle(std::span<int>(v));
  std::set<int> seen(v.begin(), v.end());
  CHECK(seen.size() == 10);
}

TEST_CASE("sample_demos draws distinct examples and honors exclusion") {
  auto space = testing::make_space(5);
  auto c = testing::synthetic_corpus(space, 40, 1);
  SeededSampler s(0, "demos");
  auto picks = sample_demos(c, 6, {"ex-00000", "ex-00001"}, s);
  CHECK(picks.size() == 6);
  std::set<std::size_t> uniq(picks.begin(), picks.end());
  CHECK(uniq.size() == 6);
  for (auto i : picks) {
    CHECK(c.at(i).effective_split() == Split::train);
    CHECK(c.at(i).id != "ex-00000");
    CHECK(c.at(i).id != "ex-00001");
  }
}

TEST_CASE("excluding an unpicked id leaves the draw unchanged") {
  auto space = testing::make_space(5);
  auto c = testing::synthetic_corpus(space, 40, 1);
  SeededSampler s1(9, "demos"), s2(9, "demos");
  auto base = sample_demos(c, 4, {}, s1);
  std::string other;
  for (auto i : c.indices_in({Split::train})) {
    if (std::find(base.begin(), base.end(), i) == base.end()) {
      other = c.at(i).id;
      break;
    }
  }
  auto again = sample_demos(c, 4, {other}, s2);
  CHECK(base == again);
}

TEST_CASE("insufficient pool is a sampling error") {
  auto space = testing::make_space(5);
  auto c = testing::synthetic_corpus(space, 6, 1);
  SeededSampler s(0, "demos");
  CHECK_THROWS_AS(sample_demos(c, 4, {}, s), SamplingError);
}

TEST_CASE("donor labels are never empty nor the target's gold") {
  auto space = testing::make_space(4);
  auto c = testing::synthetic_corpus(space, 60, 2);
  SeededSampler s(0, "random");
  for (const auto& ex : c.examples()) {
    for (int k = 0; k < 5; ++k) {
      auto r = sample_random_labels(c, ex, s);
      CHECK_FALSE(r.empty());
      CHECK(r != ex.gold);
    }
  }
}

TEST_CASE("rare donors fall back to an exact pick") {
  // 2000 copies of one set and a single different donor.
  auto space = testing::make_space(3);
  std::vector<AnnotatedExample> ex;
  for (int i = 0; i < 2000; ++i) {
    ex.push_back({"c" + std::to_string(i), "t", LabelSet::of({0}), {}, {}, Split::train});
  }
  ex.push_back({"rare", "t", LabelSet::of({1, 2}), {}, {}, Split::train});
  Corpus c(space, std::move(ex));
  SeededSampler s(0, "random");
  for (int i = 0; i < 20; ++i) CHECK(sample_random_labels(c, c.at(0), s) == LabelSet::of({1, 2}));
}

TEST_CASE("no eligible donor is a sampling error") {
  auto space = testing::make_space(3);
  std::vector<AnnotatedExample> ex{{"a", "t", LabelSet::of({0}), {}, {}, Split::train},
                                   {"b", "t", LabelSet::of({0}), {}, {}, Split::train},
                                   {"c", "t", LabelSet{}, {}, {}, Split::train}};
  Corpus c(space, std::move(ex));
  SeededSampler s(0, "random");
  CHECK_THROWS_AS(sample_random_labels(c, c.at(0), s), SamplingError);
}

TEST_CASE("uniform_subset mode and binary flips") {
  auto space = testing::make_space(3);
  auto c = testing::synthetic_corpus(space, 10, 3);
  SeededSampler s(0, "random");
  for (int i = 0; i < 50; ++i) {
    auto r = sample_random_labels(c, c.at(0), s, RandomLabelMode::uniform_subset);
    CHECK_FALSE(r.empty());
    CHECK(r != c.at(0).gold);
  }
  auto bin = testing::make_space(2, TaskKind::binary);
  CHECK(flip_binary_label(LabelSet::of({0}), *bin) == LabelSet::of({1}));
  CHECK(flip_binary_label(LabelSet::of({1}), *bin) == LabelSet::of({0}));
}

TEST_CASE("donor draws follow the donor-pool distribution") {
  auto space = testing::make_space(4);
  auto c = testing::synthetic_corpus(space, 80, 4);
  const auto& target = c.at(0);
  std::map<std::uint64_t, double> weight;
  double total = 0;
  for (const auto& ex : c.examples()) {
    if (ex.gold.empty() || ex.gold == target.gold) continue;
    weight[ex.gold.bits()] += 1;
    total += 1;
  }
  std::map<std::uint64_t, std::int64_t> seen;
  SeededSampler s(11, "gof");
  for (int i = 0; i < 10000; ++i) ++seen[sample_random_labels(c, target, s).bits()];
  std::vector<std::int64_t> obs;
  std::vector<double> exp;
  for (const auto& [bits, w] : weight) {
    obs.push_back(seen[bits]);
    exp.push_back(w / total);
  }
  CHECK(seen.size() == weight.size());
  CHECK(stats::chi2_goodness_of_fit(obs, exp).p_value > 0.01);
}
