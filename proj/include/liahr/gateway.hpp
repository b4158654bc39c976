#pragma once

#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/corpus.hpp"
#include "liahr/prompt.hpp"

namespace liahr {

struct RetryPolicy {
  int max_attempts = 3;
  /// Delay before attempt k+1 is backoff_ms[min(k-1, size-1)].
  std::vector<int> backoff_ms{500, 2000, 8000};
};

struct RequestParams {
  double temperature = 0.0;
  int max_tokens = 256;
  int timeout_ms = 60'000;
  RetryPolicy retry;
};

enum class BackendKind { http_chat, mock };
enum class MockKind { echo_query_label, gold_oracle, scripted, prior_biased };

std::string_view to_string(MockKind kind);
MockKind mock_kind_from_string(std::string_view s);

/// Deterministic stand-in models used for harness testing.
///
/// prior_biased: with probability `mixing` (λ) the mock copies the label
/// shown for the query; otherwise it answers from its own belief, which
/// contains label l iff 1[l in truth] + prior[l]·u_l >= threshold (τ), with
/// u_l uniform in [0,1). All draws are hash-keyed on (seed, request key), so
/// runs that differ only in the shown label see the same draws.
struct MockSpec {
  MockKind kind = MockKind::echo_query_label;
  /// Scripted outputs keyed by prompt fingerprint, "id:<example id>", or "*".
  std::map<std::string, std::string> script;
  std::vector<double> prior;  ///< empty: empirical label frequencies of the oracle corpus
  double mixing = 0.0;
  double threshold = 1.0;
  std::uint64_t seed = 0;
  /// Reference labels for gold_oracle / prior_biased: "gold",
  /// "annotator:<k>" or "alt:<name>".
  std::string oracle_source = "gold";
  /// Optional separate corpus holding the oracle's reference labels.
  std::optional<std::filesystem::path> oracle_corpus;
};

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;     ///< full chat-completions URL
  std::string model;
  std::string api_key_env;  ///< name of the env var holding the token
  std::string system_message;
  RequestParams params;
  int concurrency = 4;
  MockSpec mock;
  std::optional<std::filesystem::path> cache_dir;
  bool bypass_cache = false;

  void validate() const;
  std::string model_id() const;
};

BackendConfig backend_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const BackendConfig& c);
/// Applies a CLI shorthand such as "mock:echo", "mock:oracle" or
/// "mock:prior".
void apply_backend_shorthand(BackendConfig& config, std::string_view shorthand);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct Completion {
  std::string text;
  Usage usage;
  double latency_ms = 0.0;
  int attempts = 1;
  bool cached = false;
};

/// `key` identifies the request to the caller ("<seed>/<example id>") and
/// keys the mocks' draws.
struct CompletionRequest {
  std::string key;
  RenderedPrompt prompt;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

/// Builds the backend for a run. Mocks resolve their oracle against
/// `corpus` unless the spec names a separate oracle corpus.
std::unique_ptr<Backend> make_backend(const BackendConfig& config, const Corpus& corpus);

/// On-disk response cache keyed by (model, prompt fingerprint).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<Completion> get(const std::string& model, const std::string& fingerprint) const;
  void put(const std::string& model, const std::string& fingerprint, const Completion& c) const;

 private:
  std::filesystem::path path_for(const std::string& model, const std::string& fingerprint) const;
  std::filesystem::path dir_;
};

struct BatchOutcome {
  std::optional<Completion> completion;
  std::exception_ptr error;
};

/// Uniform completion front-end: caching plus bounded fan-out.
class Gateway {
 public:
  Gateway(std::unique_ptr<Backend> backend, BackendConfig config);

  Completion complete(const CompletionRequest& request, bool bypass_cache = false);

  /// Completes every request with at most `concurrency` in flight.
  /// Outcomes are positionally aligned with `requests` regardless of the
  /// order in which they finish.
  std::vector<BatchOutcome> complete_batch(std::span<const CompletionRequest> requests,
                                           bool bypass_cache = false);
  /// Reference implementation of complete_batch, one request at a time.
  std::vector<BatchOutcome> complete_batch_serial(std::span<const CompletionRequest> requests,
                                                  bool bypass_cache = false);

  const BackendConfig& config() const { return config_; }
  Backend& backend() { return *backend_; }

 private:
  std::unique_ptr<Backend> backend_;
  BackendConfig config_;
  std::optional<ResponseCache> cache_;
};

}  // namespace liahr
