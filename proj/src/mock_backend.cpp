#include "liahr/mock_backend.hpp"

#include "liahr/error.hpp"
#include "liahr/hash.hpp"

namespace liahr {

std::optional<LabelSet> labels_for_source(const AnnotatedExample& example, std::string_view source) {
  if (source == "gold") return example.gold;
  auto lookup = [](const std::map<std::string, LabelSet>& m,
                   std::string_view key) -> std::optional<LabelSet> {
    auto it = m.find(std::string(key));
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
  if (source.starts_with("annotator:")) return lookup(example.annotator_labels, source.substr(10));
  if (source.starts_with("alt:")) return lookup(example.alt_gold, source.substr(4));
  throw ConfigError("unknown label source '" + std::string(source) + "'");
}

namespace {

constexpr std::uint64_t kMixTag = 0x6d6978;  // "mix"

}  // namespace

MockBackend::MockBackend(MockSpec spec, Corpus oracle)
    : spec_(std::move(spec)), oracle_(std::move(oracle)), prior_(spec_.prior) {
  const auto& space = oracle_.space();
  if (prior_.empty()) {
    prior_.assign(space.size(), 0.0);
    if (oracle_.size() > 0) {
      for (const auto& ex : oracle_.examples()) {
        for (auto i : ex.gold.indices()) prior_[i] += 1.0;
      }
      for (auto& p : prior_) p /= static_cast<double>(oracle_.size());
    }
  } else if (prior_.size() != space.size()) {
    throw ConfigError("mock prior has " + std::to_string(prior_.size()) + " entries, space has " +
                      std::to_string(space.size()));
  }
}

std::string MockBackend::model_id() const { return "mock:" + std::string(to_string(spec_.kind)); }

LabelSet MockBackend::truth(const std::string& example_id) const {
  const auto* ex = oracle_.find(example_id);
  if (!ex) throw ValidationError("mock oracle has no example '" + example_id + "'");
  auto labels = labels_for_source(*ex, spec_.oracle_source);
  if (!labels) {
    throw ValidationError("mock oracle: example '" + example_id + "' has no " + spec_.oracle_source +
                          " labels");
  }
  return *labels;
}

double MockBackend::draw(const std::string& key, std::uint64_t tag) const {
  const auto h = mix64(mix64(spec_.seed ^ mix64(fnv1a64(key))) ^ mix64(tag + 0x1234567ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

LabelSet MockBackend::belief(const std::string& key, const std::string& example_id) const {
  const auto& space = oracle_.space();
  const auto t = truth(example_id);
  LabelSet out;
  double best = -1.0;
  std::size_t best_idx = 0;
  for (std::size_t l = 0; l < space.size(); ++l) {
    const double score = (t.contains(l) ? 1.0 : 0.0) + prior_[l] * draw(key, l);
    if (score >= spec_.threshold) out.insert(l);
    if (score > best) {
      best = score;
      best_idx = l;
    }
  }
  if (space.kind() != TaskKind::multilabel) return LabelSet::of({best_idx});
  return out;
}

std::string MockBackend::format_labels(LabelSet set) const {
  const auto& space = oracle_.space();
  if (space.kind() == TaskKind::binary) return render_label_plain(set, space);
  return render_label_json(set, space);
}

Completion MockBackend::complete(const CompletionRequest& request) {
  const auto& plan = request.prompt.plan;
  const auto& space = oracle_.space();
  Completion c;

  auto assessment = [](bool reasonable) {
    return std::string(reasonable ? kReasonable : kUnreasonable);
  };
  auto fallback_for_icl = [&]() {
    return space.kind() == TaskKind::multilabel ? LabelSet{} : LabelSet::of({0});
  };

  switch (spec_.kind) {
    case MockKind::echo_query_label: {
      if (plan.mode == PromptMode::baseline) {
        c.text = assessment(true);
      } else {
        c.text = format_labels(plan.query_label.value_or(fallback_for_icl()));
      }
      break;
    }
    case MockKind::gold_oracle: {
      const auto t = truth(plan.query);
      if (plan.mode == PromptMode::baseline) {
        c.text = assessment(plan.query_label == t);
      } else {
        c.text = format_labels(t);
      }
      break;
    }
    case MockKind::scripted: {
      auto it = spec_.script.find(request.prompt.fingerprint);
      if (it == spec_.script.end()) it = spec_.script.find("id:" + plan.query);
      if (it == spec_.script.end()) it = spec_.script.find("*");
      if (it == spec_.script.end()) {
        throw ConfigError("scripted mock has no entry for '" + plan.query + "' (fingerprint " +
                          request.prompt.fingerprint + ")");
      }
      c.text = it->second;
      break;
    }
    case MockKind::prior_biased: {
      const bool has_shown = plan.mode != PromptMode::icl && plan.query_label.has_value();
      const bool copy = has_shown && draw(request.key, kMixTag) < spec_.mixing;
      const auto own = copy ? *plan.query_label : belief(request.key, plan.query);
      if (plan.mode == PromptMode::baseline) {
        c.text = assessment(own == *plan.query_label);
      } else {
        c.text = format_labels(own);
      }
      break;
    }
  }
  c.usage.prompt_tokens = static_cast<int>(request.prompt.text.size() / 4);
  c.usage.completion_tokens = static_cast<int>(c.text.size() / 4);
  return c;
}

}  // namespace liahr
