#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "liahr/gateway.hpp"

namespace liahr {

/// Deterministic local backend; see MockSpec for the answer rules.
/// Stateless per request, so a single instance is safe to share.
class MockBackend final : public Backend {
 public:
  MockBackend(MockSpec spec, Corpus oracle);

  Completion complete(const CompletionRequest& request) override;
  std::string model_id() const override;

  /// The label set the mock would output for the query, before formatting.
  /// Exposed for tests that simulate the mock's rule directly.
  LabelSet belief(const std::string& key, const std::string& example_id) const;
  /// Per-label prior actually in use (explicit or empirical).
  const std::vector<double>& prior() const { return prior_; }

 private:
  LabelSet truth(const std::string& example_id) const;
  double draw(const std::string& key, std::uint64_t tag) const;
  std::string format_labels(LabelSet set) const;

  MockSpec spec_;
  Corpus oracle_;
  std::vector<double> prior_;
};

/// Reference labels for `example` under a source name ("gold",
/// "annotator:<k>", "alt:<name>"); nullopt when the example lacks them.
std::optional<LabelSet> labels_for_source(const AnnotatedExample& example, std::string_view source);

}  // namespace liahr
