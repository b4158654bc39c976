#include "liahr/metrics.hpp"

#include <bit>
#include <vector>

#include "liahr/error.hpp"

namespace liahr::metrics {

namespace {

constexpr std::size_t kBlock = 512;

void require_nonempty(std::span<const LabelPair> pairs) {
  if (pairs.empty()) throw ValidationError("metric over an empty list of pairs");
}

std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

struct JaccardPartial {
  double sum = 0.0;
  std::int64_t count = 0;
};

}  // namespace

std::string_view to_string(EmptyPairRule rule) {
  return rule == EmptyPairRule::count_as_one ? "both_empty_counts_as_one" : "both_empty_excluded";
}

std::int64_t LabelCounts::total_tp() const {
  std::int64_t s = 0;
  for (auto v : tp) s += v;
  return s;
}
std::int64_t LabelCounts::total_fp() const {
  std::int64_t s = 0;
  for (auto v : fp) s += v;
  return s;
}
std::int64_t LabelCounts::total_fn() const {
  std::int64_t s = 0;
  for (auto v : fn) s += v;
  return s;
}

double LabelCounts::f1(std::size_t label) const {
  const auto denom = 2 * tp[label] + fp[label] + fn[label];
  if (denom == 0) return 0.0;
  return static_cast<double>(2 * tp[label]) / static_cast<double>(denom);
}

double jaccard_samples(std::span<const LabelPair> pairs, EmptyPairRule rule) {
  require_nonempty(pairs);
  const auto n_blocks = block_count(pairs.size());
  std::vector<JaccardPartial> partial(n_blocks);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(n_blocks); ++b) {
    const auto lo = static_cast<std::size_t>(b) * kBlock;
    const auto hi = std::min(lo + kBlock, pairs.size());
    JaccardPartial acc;
    for (auto i = lo; i < hi; ++i) {
      const auto& p = pairs[i];
      if (rule == EmptyPairRule::exclude && p.predicted.empty() && p.reference.empty()) continue;
      acc.sum += jaccard(p.predicted, p.reference);
      ++acc.count;
    }
    partial[static_cast<std::size_t>(b)] = acc;
  }
  JaccardPartial total;
  for (const auto& p : partial) {
    total.sum += p.sum;
    total.count += p.count;
  }
  if (total.count == 0) throw ValidationError("every pair is both-empty; Jaccard undefined under exclusion");
  return total.sum / static_cast<double>(total.count);
}

LabelCounts label_counts(std::span<const LabelPair> pairs) {
  const auto n_blocks = block_count(pairs.size());
  std::vector<LabelCounts> partial(n_blocks);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(n_blocks); ++b) {
    const auto lo = static_cast<std::size_t>(b) * kBlock;
    const auto hi = std::min(lo + kBlock, pairs.size());
    auto& acc = partial[static_cast<std::size_t>(b)];
    for (auto i = lo; i < hi; ++i) {
      const auto pred = pairs[i].predicted.bits();
      const auto ref = pairs[i].reference.bits();
      for (auto bits = pred & ref; bits; bits &= bits - 1) ++acc.tp[std::countr_zero(bits)];
      for (auto bits = pred & ~ref; bits; bits &= bits - 1) ++acc.fp[std::countr_zero(bits)];
      for (auto bits = ~pred & ref; bits; bits &= bits - 1) ++acc.fn[std::countr_zero(bits)];
    }
  }
  LabelCounts total;
  for (const auto& p : partial) {
    for (std::size_t l = 0; l < LabelSet::kMaxLabels; ++l) {
      total.tp[l] += p.tp[l];
      total.fp[l] += p.fp[l];
      total.fn[l] += p.fn[l];
    }
  }
  return total;
}

namespace {

double micro_from_counts(const LabelCounts& c) {
  const auto tp = c.total_tp();
  const auto denom = 2 * tp + c.total_fp() + c.total_fn();
  // No labels on either side anywhere: every pair agrees.
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

double macro_from_counts(const LabelCounts& c, std::size_t n_labels) {
  if (n_labels == 0 || n_labels > LabelSet::kMaxLabels) throw ValidationError("bad label count");
  double s = 0.0;
  for (std::size_t l = 0; l < n_labels; ++l) s += c.f1(l);
  return s / static_cast<double>(n_labels);
}

}  // namespace

double micro_f1(std::span<const LabelPair> pairs) {
  require_nonempty(pairs);
  return micro_from_counts(label_counts(pairs));
}

double macro_f1(std::span<const LabelPair> pairs, std::size_t n_labels) {
  require_nonempty(pairs);
  return macro_from_counts(label_counts(pairs), n_labels);
}

double accuracy(std::span<const LabelPair> pairs) {
  require_nonempty(pairs);
  std::int64_t hits = 0;
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    if (p.predicted == p.reference) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double roc_auc_binary(std::span<const LabelPair> pairs, const LabelSpace& space) {
  if (space.kind() != TaskKind::binary) throw ValidationError("roc_auc_binary needs a binary space");
  require_nonempty(pairs);
  const auto pos = space.require_index(*space.binary_positive());
  std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& p : pairs) {
    const bool gold_pos = p.reference.contains(pos);
    const bool pred_pos = p.predicted.contains(pos);
    if (gold_pos) {
      (pred_pos ? tp : fn) += 1;
    } else {
      (pred_pos ? fp : tn) += 1;
    }
  }
  if (tp + fn == 0 || tn + fp == 0) {
    throw ValidationError("roc_auc_binary needs both gold classes present");
  }
  const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return (tpr + tnr) / 2.0;
}

namespace serial {

double jaccard_samples(std::span<const LabelPair> pairs, EmptyPairRule rule) {
  require_nonempty(pairs);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : pairs) {
    if (rule == EmptyPairRule::exclude && p.predicted.empty() && p.reference.empty()) continue;
    sum += jaccard(p.predicted, p.reference);
    ++count;
  }
  if (count == 0) throw ValidationError("every pair is both-empty; Jaccard undefined under exclusion");
  return sum / static_cast<double>(count);
}

LabelCounts label_counts(std::span<const LabelPair> pairs) {
  LabelCounts c;
  for (const auto& p : pairs) {
    for (std::size_t l = 0; l < LabelSet::kMaxLabels; ++l) {
      const bool a = p.predicted.contains(l);
      const bool b = p.reference.contains(l);
      if (a && b) ++c.tp[l];
      if (a && !b) ++c.fp[l];
      if (!a && b) ++c.fn[l];
    }
  }
  return c;
}

double micro_f1(std::span<const LabelPair> pairs) {
  require_nonempty(pairs);
  return micro_from_counts(serial::label_counts(pairs));
}

double macro_f1(std::span<const LabelPair> pairs, std::size_t n_labels) {
  require_nonempty(pairs);
  return macro_from_counts(serial::label_counts(pairs), n_labels);
}

double accuracy(std::span<const LabelPair> pairs) {
  require_nonempty(pairs);
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += (p.predicted == p.reference) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

}  // namespace serial

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["jaccard_samples"] = jaccard_samples;
  j["jaccard_rule"] = std::string(to_string(jaccard_rule));
  j["jaccard_excluding_empty"] = jaccard_excluding_empty ? nlohmann::ordered_json(*jaccard_excluding_empty)
                                                         : nlohmann::ordered_json(nullptr);
  j["micro_f1"] = micro_f1;
  j["macro_f1"] = macro_f1;
  j["accuracy"] = accuracy;
  j["roc_auc"] = roc_auc ? nlohmann::ordered_json(*roc_auc) : nlohmann::ordered_json(nullptr);
  j["n"] = n;
  j["n_unparsed"] = n_unparsed;
  j["n_both_empty"] = n_both_empty;
  return j;
}

MetricReport evaluate(std::span<const LabelPair> pairs, const LabelSpace& space,
                      std::size_t n_unparsed) {
  require_nonempty(pairs);
  MetricReport r;
  r.n = pairs.size();
  r.n_unparsed = n_unparsed;
  r.jaccard_samples = jaccard_samples(pairs);
  for (const auto& p : pairs) r.n_both_empty += (p.predicted.empty() && p.reference.empty()) ? 1 : 0;
  if (r.n_both_empty < r.n) r.jaccard_excluding_empty = jaccard_samples(pairs, EmptyPairRule::exclude);
  const auto counts = label_counts(pairs);
  r.micro_f1 = micro_from_counts(counts);
  r.macro_f1 = macro_from_counts(counts, space.size());
  r.accuracy = accuracy(pairs);
  if (space.kind() == TaskKind::binary) {
    try {
      r.roc_auc = roc_auc_binary(pairs, space);
    } catch (const ValidationError&) {
      r.roc_auc.reset();
    }
  }
  return r;
}

}  // namespace liahr::metrics
