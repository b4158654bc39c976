#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "liahr/label_space.hpp"

namespace liahr::metrics {

/// One scored item. Every metric here except roc_auc_binary is symmetric in
/// the two members.
struct LabelPair {
  LabelSet predicted;
  LabelSet reference;
};

enum class EmptyPairRule {
  count_as_one,  ///< both-empty pair contributes Jaccard 1
  exclude,       ///< both-empty pairs are dropped from the mean
};

std::string_view to_string(EmptyPairRule rule);

struct LabelCounts {
  std::array<std::int64_t, LabelSet::kMaxLabels> tp{};
  std::array<std::int64_t, LabelSet::kMaxLabels> fp{};
  std::array<std::int64_t, LabelSet::kMaxLabels> fn{};

  std::int64_t total_tp() const;
  std::int64_t total_fp() const;
  std::int64_t total_fn() const;
  /// F1 of one label; 0 when the label never occurs on either side.
  double f1(std::size_t label) const;
};

// OpenMP kernels. Reductions run over fixed-size blocks combined in block
// order, so results do not depend on the thread count.

double jaccard_samples(std::span<const LabelPair> pairs,
                       EmptyPairRule rule = EmptyPairRule::count_as_one);
LabelCounts label_counts(std::span<const LabelPair> pairs);
double micro_f1(std::span<const LabelPair> pairs);
double macro_f1(std::span<const LabelPair> pairs, std::size_t n_labels);
double accuracy(std::span<const LabelPair> pairs);
/// (TPR + TNR) / 2 from hard predictions.
double roc_auc_binary(std::span<const LabelPair> pairs, const LabelSpace& space);

/// Plain loops; kept as the reference the kernels are tested and
/// benchmarked against.
namespace serial {
double jaccard_samples(std::span<const LabelPair> pairs,
                       EmptyPairRule rule = EmptyPairRule::count_as_one);
LabelCounts label_counts(std::span<const LabelPair> pairs);
double micro_f1(std::span<const LabelPair> pairs);
double macro_f1(std::span<const LabelPair> pairs, std::size_t n_labels);
double accuracy(std::span<const LabelPair> pairs);
}  // namespace serial

struct MetricReport {
  double jaccard_samples = 0.0;
  /// Jaccard under the other both-empty convention; nullopt when every pair
  /// is both-empty.
  std::optional<double> jaccard_excluding_empty;
  EmptyPairRule jaccard_rule = EmptyPairRule::count_as_one;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> roc_auc;
  std::size_t n = 0;
  std::size_t n_unparsed = 0;
  /// Pairs where both sides are empty (the convention matters for these).
  std::size_t n_both_empty = 0;

  nlohmann::ordered_json to_json() const;
};

MetricReport evaluate(std::span<const LabelPair> pairs, const LabelSpace& space,
                      std::size_t n_unparsed = 0);

}  // namespace liahr::metrics
