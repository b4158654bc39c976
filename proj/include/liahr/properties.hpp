#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/engine.hpp"

namespace liahr::properties {

enum class Outcome { met, not_met, trend };
std::string_view to_string(Outcome o);

/// Defaults carry provenance "toolkit default": the underlying criteria are
/// qualitative, so every threshold is configurable.
struct Thresholds {
  double gap = 0.10;                      ///< nonconformity: liahr gold copy - icl
  std::pair<double, double> flag_band{0.02, 0.30};
  double drop = 0.25;                     ///< noise rejection degradation
  double trend_band = 0.05;               ///< rectification "trend" width
  double annotator_spread = 0.15;         ///< diversity
  double position_range = 0.10;           ///< position sweep
  double per_label_sigma = 2.0;           ///< per-label outlier cut

  nlohmann::ordered_json to_json() const;
};

struct PropertyReport {
  std::string property;
  /// Identifies the consumed runs (source, mode, corpus hash).
  std::vector<std::string> inputs;
  /// Insertion-ordered named scores.
  std::vector<std::pair<std::string, double>> scores;
  Outcome outcome = Outcome::not_met;
  /// Outcome under each similarity semantics where both apply.
  std::map<std::string, Outcome> outcomes_by_semantics;
  nlohmann::ordered_json thresholds;
  /// Property-specific tables (per-position rates, per-label F1, ...).
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  double score(const std::string& name) const;
  bool has_score(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
  /// Two-column markdown table of the scores plus the outcome.
  std::string summary_table() const;
};

PropertyReport nonconformity(const RunLog& gold_run, const RunLog& icl_run,
                             const Thresholds& t = {});
PropertyReport noise_rejection(const RunLog& gold_run, const RunLog& random_run,
                               const Thresholds& t = {});
PropertyReport rectification(const RunLog& random_run, const Thresholds& t = {});
/// Runs are keyed by their own query label source. Binary spaces add a
/// per-group ROC-AUC of predicted vs shown labels.
PropertyReport diversity(const std::vector<RunLog>& runs, const LabelSpace& space,
                         const Thresholds& t = {});
PropertyReport per_label_rates(const RunLog& run, const LabelSpace& space,
                               const Thresholds& t = {});

struct PositionSweep {
  PropertyReport report;
  std::vector<RunLog> runs;  ///< one per query position
};
PositionSweep position_sweep(const Corpus& corpus, const RunConfig& base_config, Gateway& gateway,
                             const Thresholds& t = {});

/// CSV with a header row; one row per report score.
std::string scores_csv(const std::vector<PropertyReport>& reports);

}  // namespace liahr::properties
