#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/corpus.hpp"
#include "liahr/engine.hpp"

namespace liahr {

enum class PipelineMode { original, replaced, replaced_trn, filtered, bsl_filtered, predictions };

std::string_view to_string(PipelineMode mode);
PipelineMode pipeline_mode_from_string(std::string_view s);

enum class ChangeAction { kept, replaced, removed };
std::string_view to_string(ChangeAction a);

struct ChangeEntry {
  std::string id;
  Split split = Split::train;
  ChangeAction action = ChangeAction::kept;
  LabelSet old_labels;
  std::optional<LabelSet> new_labels;
  std::optional<std::string> warning;
};

struct ChangeManifest {
  std::string mode;
  std::vector<ChangeEntry> entries;  ///< corpus order; one per input example
  std::vector<std::string> sources;  ///< consumed run logs
  std::vector<std::string> touched_splits;

  std::size_t count(ChangeAction a) const;
  std::size_t count(ChangeAction a, Split s) const;
  std::vector<std::string> warnings() const;

  nlohmann::ordered_json to_json(const LabelSpace& space) const;
  /// Markdown table of action counts by split.
  std::string summary_table() const;
};

struct PipelineInputs {
  const RunLog* liahr = nullptr;
  const RunLog* baseline = nullptr;
  const RunLog* icl = nullptr;
};

struct PipelineOptions {
  /// `replaced` touches every split by default; set to leave test alone.
  bool exclude_test = false;
  /// Splits the `predictions` mode relabels (default: all).
  std::vector<Split> prediction_splits{Split::train, Split::dev, Split::test};
};

/// Builds the corrected corpus for `mode` from verdict logs.
///
///  - original: identity.
///  - replaced / replaced_trn: flagged examples take the liahr alternative
///    (replaced_trn only in train).
///  - filtered / bsl_filtered: flagged train examples (liahr / baseline) are
///    removed.
///  - predictions: labels become the icl predictions.
///
/// Throws CoverageError when a required log is absent or misses examples the
/// mode needs. Unparsed verdicts keep their labels and add a warning.
std::pair<Corpus, ChangeManifest> apply_pipeline(const Corpus& corpus, PipelineMode mode,
                                                 const PipelineInputs& logs,
                                                 const PipelineOptions& options = {});

}  // namespace liahr
