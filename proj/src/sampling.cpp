#include "liahr/sampling.hpp"

#include "liahr/error.hpp"

namespace liahr {

namespace {
constexpr int kMaxDonorAttempts = 1000;
}

std::vector<std::size_t> sample_demos(const Corpus& corpus, std::span<const std::size_t> pool,
                                      std::size_t n_shots,
                                      const std::unordered_set<std::string>& exclude,
                                      SeededSampler& sampler) {
  std::size_t eligible = 0;
  for (auto i : pool) {
    if (!exclude.contains(corpus.at(i).id)) ++eligible;
  }
  if (eligible < n_shots) {
    throw SamplingError("insufficient demo pool: need " + std::to_string(n_shots) + ", have " +
                        std::to_string(eligible));
  }
  std::vector<std::size_t> picked;
  picked.reserve(n_shots);
  std::vector<bool> taken(pool.size(), false);
  while (picked.size() < n_shots) {
    const auto slot = static_cast<std::size_t>(sampler.uniform_index(pool.size()));
    if (taken[slot]) continue;
    taken[slot] = true;
    const auto idx = pool[slot];
    if (exclude.contains(corpus.at(idx).id)) continue;
    picked.push_back(idx);
  }
  return picked;
}

std::vector<std::size_t> sample_demos(const Corpus& corpus, std::size_t n_shots,
                                      const std::unordered_set<std::string>& exclude,
                                      SeededSampler& sampler) {
  const auto pool = corpus.indices_in({Split::train});
  return sample_demos(corpus, pool, n_shots, exclude, sampler);
}

namespace {

LabelSet uniform_random_labels(const LabelSpace& space, LabelSet gold, SeededSampler& sampler) {
  const auto n = space.size();
  if (space.kind() == TaskKind::multilabel) {
    const std::uint64_t subsets = space.all().bits();  // 2^n - 1 non-empty subsets
    if (subsets == 1 && gold.bits() == 1) throw SamplingError("no alternative label set");
    while (true) {
      const auto bits = 1 + sampler.uniform_index(subsets);
      auto s = LabelSet::from_bits(bits);
      if (s != gold) return s;
    }
  }
  while (true) {
    auto s = LabelSet::of({static_cast<std::size_t>(sampler.uniform_index(n))});
    if (s != gold) return s;
  }
}

}  // namespace

LabelSet sample_random_labels(const Corpus& corpus, const AnnotatedExample& target,
                              SeededSampler& sampler, RandomLabelMode mode) {
  if (mode == RandomLabelMode::uniform_subset) {
    return uniform_random_labels(corpus.space(), target.gold, sampler);
  }
  auto eligible = [&](const AnnotatedExample& ex) {
    return !ex.gold.empty() && ex.gold != target.gold;
  };
  const auto n = corpus.size();
  if (n == 0) throw SamplingError("no eligible donor example: corpus is empty");
  for (int attempt = 0; attempt < kMaxDonorAttempts; ++attempt) {
    const auto& donor = corpus.at(static_cast<std::size_t>(sampler.uniform_index(n)));
    if (eligible(donor)) return donor.gold;
  }
  // Rare donors: fall back to an exact uniform pick over the eligible set,
  // which has the same distribution as continued rejection.
  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < n; ++i) {
    if (eligible(corpus.at(i))) donors.push_back(i);
  }
  if (donors.empty()) {
    throw SamplingError("no eligible donor example for '" + target.id +
                        "': every other gold is empty or identical");
  }
  return corpus.at(donors[static_cast<std::size_t>(sampler.uniform_index(donors.size()))]).gold;
}

LabelSet flip_binary_label(LabelSet label, const LabelSpace& space) {
  if (space.kind() != TaskKind::binary) {
    throw ValidationError("flip_binary_label needs a binary space, got " +
                          std::string(to_string(space.kind())));
  }
  space.validate(label);
  return LabelSet::from_bits(space.all().bits() & ~label.bits());
}

}  // namespace liahr
