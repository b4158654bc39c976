#pragma once

#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "liahr/corpus.hpp"
#include "liahr/sampler.hpp"

namespace liahr {

enum class RandomLabelMode {
  donor,           ///< gold of another example (keeps the label distribution)
  uniform_subset,  ///< uniform non-empty subset / other class (ablation)
};

/// Draws `n_shots` distinct demo examples uniformly without replacement from
/// `pool` (corpus indices), skipping ids in `exclude`. Returns corpus indices
/// in draw order.
///
/// Draws are made over the whole pool and excluded or repeated picks are
/// rejected, so two calls on the same stream that differ only in `exclude`
/// agree on every pick the exclusion does not touch.
std::vector<std::size_t> sample_demos(const Corpus& corpus, std::span<const std::size_t> pool,
                                      std::size_t n_shots,
                                      const std::unordered_set<std::string>& exclude,
                                      SeededSampler& sampler);

/// Pool defaults to the train split.
std::vector<std::size_t> sample_demos(const Corpus& corpus, std::size_t n_shots,
                                      const std::unordered_set<std::string>& exclude,
                                      SeededSampler& sampler);

/// Random label set for `target`. Donor mode returns the gold of another
/// uniformly drawn example whose gold is non-empty and differs from
/// target.gold; never returns the empty set or target.gold.
LabelSet sample_random_labels(const Corpus& corpus, const AnnotatedExample& target,
                              SeededSampler& sampler,
                              RandomLabelMode mode = RandomLabelMode::donor);

/// The other class of a binary space.
LabelSet flip_binary_label(LabelSet label, const LabelSpace& space);

}  // namespace liahr
