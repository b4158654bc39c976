#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/corpus.hpp"
#include "liahr/gateway.hpp"
#include "liahr/prompt.hpp"
#include "liahr/sampling.hpp"

namespace liahr {

enum class LabelSourceKind { gold, random, annotator, alt, flipped };

/// Which label set is shown for the query: "gold", "random",
/// "annotator:<k>", "alt:<name>" or "flipped".
struct LabelSource {
  LabelSourceKind kind = LabelSourceKind::gold;
  std::string name;

  static LabelSource parse(std::string_view s);
  std::string str() const;
  friend bool operator==(const LabelSource&, const LabelSource&) = default;
};

struct RunConfig {
  PromptMode mode = PromptMode::liahr;
  std::size_t n_shots = 4;
  LabelSource query_label_source;
  /// For annotator/alt sources: demos show the same perspective as the
  /// query. When false, demos always show gold.
  bool demos_use_source_labels = true;
  std::size_t query_position = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t queries_per_seed = 100;
  /// Every example of the query splits becomes a query (pipeline runs).
  bool full_corpus = false;
  std::vector<Split> demo_splits{Split::train};
  std::vector<Split> query_splits{Split::dev};
  BackendConfig backend;
  /// LiaHR/ICL flag an example when jaccard(predicted, provided) < tolerance;
  /// 1.0 means "flag unless copied exactly".
  double flag_tolerance = 1.0;
  /// Re-requests after an unparseable completion.
  int parse_retries = 1;
  RandomLabelMode random_mode = RandomLabelMode::donor;
  std::string instruction;
  std::string layout;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

struct Verdict {
  std::string id;
  std::uint64_t seed = 0;
  PromptMode mode = PromptMode::liahr;
  std::string source;
  /// Label shown for the query (liahr, baseline); gold for icl.
  LabelSet provided;
  /// Parsed label output (liahr, icl).
  std::optional<LabelSet> predicted;
  /// Parsed assessment (baseline).
  std::optional<std::string> assessment;
  LabelSet gold;
  bool copied_exact = false;
  double jaccard_to_provided = 0.0;
  double jaccard_to_gold = 0.0;
  bool flagged = false;
  std::optional<LabelSet> alternative;
  bool unparsed = false;
  std::size_t unknown_labels = 0;
  std::size_t query_position = 0;
  std::vector<std::string> demos;
  std::string raw;
  std::string fingerprint;
  int attempts = 0;

  nlohmann::ordered_json to_json(const LabelSpace& space) const;
  static Verdict from_json(const nlohmann::json& j, const LabelSpace& space);
};

struct SeedStatus {
  std::uint64_t seed = 0;
  std::vector<std::string> queries;
  /// The seed's demo draw before per-query exclusion of the query itself.
  std::vector<std::string> demos;
  std::optional<std::string> error;
};

struct RunManifest {
  static constexpr std::string_view kFormatVersion = "liahr-run/1";
  nlohmann::ordered_json config;
  std::string corpus_hash;
  std::string corpus_source;
  std::string space_name;
  std::vector<SeedStatus> seeds;
  std::size_t n_verdicts = 0;
  std::size_t n_unparsed = 0;
  std::size_t n_flagged = 0;

  bool complete() const;
  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

struct RunLog {
  RunManifest manifest;
  std::vector<Verdict> verdicts;

  PromptMode mode() const;
  LabelSource source() const;
  std::size_t n_shots() const;
};

/// One query ready to send.
struct PreparedQuery {
  std::uint64_t seed = 0;
  std::string id;
  LabelSet provided;
  std::vector<std::string> demos;
  CompletionRequest request;
};

struct PreparedRun {
  std::vector<PreparedQuery> queries;
  std::vector<SeedStatus> seeds;
};

/// Samples queries, demos and shown labels and renders every prompt, without
/// contacting a backend. A sampling failure aborts only its seed.
PreparedRun prepare_run(const Corpus& corpus, const RunConfig& config);

/// Full run: prepare, complete through the gateway, parse, and assemble
/// verdicts ordered by (seed, example id).
RunLog run(const Corpus& corpus, const RunConfig& config, Gateway& gateway);
RunLog run(const Corpus& corpus, const RunConfig& config);

RunLog run_liahr(const Corpus& corpus, const RunConfig& config, Gateway& gateway);
RunLog run_baseline(const Corpus& corpus, const RunConfig& config, Gateway& gateway);
RunLog run_icl(const Corpus& corpus, const RunConfig& config, Gateway& gateway);

/// Copy-success aggregates over parsed verdicts.
struct RunSummary {
  std::size_t n = 0;
  std::size_t n_parsed = 0;
  std::size_t n_unparsed = 0;
  std::size_t n_flagged = 0;
  double exact_rate = 0.0;
  double jaccard_rate = 0.0;
  double flag_rate = 0.0;
  double mean_jaccard_to_gold = 0.0;
  std::vector<std::pair<std::uint64_t, double>> jaccard_rate_by_seed;
  /// "higher_is_better" for gold-like sources, "lower_is_better" for random
  /// and flipped ones.
  std::string orientation;

  nlohmann::ordered_json to_json() const;
};

RunSummary summarize(const RunLog& log);

std::string verdicts_to_jsonl(const RunLog& log, const LabelSpace& space);
void write_run_log(const RunLog& log, const LabelSpace& space, const std::filesystem::path& dir);
RunLog read_run_log(const std::filesystem::path& dir, const LabelSpace& space);

}  // namespace liahr
