#include "liahr/gateway.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <omp.h>

#include "liahr/error.hpp"
#include "liahr/hash.hpp"
#include "liahr/http_backend.hpp"
#include "liahr/mock_backend.hpp"

namespace liahr {

std::string_view to_string(MockKind kind) {
  switch (kind) {
    case MockKind::echo_query_label: return "echo_query_label";
    case MockKind::gold_oracle: return "gold_oracle";
    case MockKind::scripted: return "scripted";
    case MockKind::prior_biased: return "prior_biased";
  }
  return "?";
}

MockKind mock_kind_from_string(std::string_view s) {
  if (s == "echo_query_label" || s == "echo") return MockKind::echo_query_label;
  if (s == "gold_oracle" || s == "oracle") return MockKind::gold_oracle;
  if (s == "scripted") return MockKind::scripted;
  if (s == "prior_biased" || s == "prior") return MockKind::prior_biased;
  throw ConfigError("unknown mock kind '" + std::string(s) + "'");
}

void BackendConfig::validate() const {
  if (params.temperature < 0) throw ConfigError("temperature must be >= 0");
  if (concurrency < 1) throw ConfigError("concurrency limit must be >= 1");
  if (params.retry.max_attempts < 1 || params.retry.max_attempts > 20) {
    throw ConfigError("retry max_attempts must be in [1, 20]");
  }
  if (params.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (kind == BackendKind::http_chat) {
    if (endpoint.empty()) throw ConfigError("http_chat backend needs an endpoint");
    if (model.empty()) throw ConfigError("http_chat backend needs a model name");
  } else {
    if (mock.mixing < 0 || mock.mixing > 1) throw ConfigError("mock mixing must be in [0, 1]");
    for (double p : mock.prior) {
      if (p < 0) throw ConfigError("mock prior entries must be >= 0");
    }
  }
}

std::string BackendConfig::model_id() const {
  if (kind == BackendKind::http_chat) return model;
  return "mock:" + std::string(to_string(mock.kind));
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

BackendConfig backend_config_from_json(const nlohmann::json& j) {
  BackendConfig c;
  try {
    const auto kind = j.value("kind", std::string("mock"));
    if (kind == "http_chat") {
      c.kind = BackendKind::http_chat;
    } else if (kind == "mock") {
      c.kind = BackendKind::mock;
    } else {
      throw ConfigError("unknown backend kind '" + kind + "'");
    }
    maybe(j, "endpoint", c.endpoint);
    maybe(j, "model", c.model);
    maybe(j, "api_key_env", c.api_key_env);
    maybe(j, "system_message", c.system_message);
    maybe(j, "temperature", c.params.temperature);
    maybe(j, "max_tokens", c.params.max_tokens);
    maybe(j, "timeout_ms", c.params.timeout_ms);
    maybe(j, "concurrency", c.concurrency);
    maybe(j, "bypass_cache", c.bypass_cache);
    if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      maybe(r, "max_attempts", c.params.retry.max_attempts);
      maybe(r, "backoff_ms", c.params.retry.backoff_ms);
    }
    if (j.contains("mock")) {
      const auto& m = j.at("mock");
      c.mock.kind = mock_kind_from_string(m.value("kind", std::string("echo_query_label")));
      maybe(m, "script", c.mock.script);
      maybe(m, "prior", c.mock.prior);
      maybe(m, "mixing", c.mock.mixing);
      maybe(m, "threshold", c.mock.threshold);
      maybe(m, "seed", c.mock.seed);
      maybe(m, "oracle_source", c.mock.oracle_source);
      if (m.contains("oracle_corpus")) c.mock.oracle_corpus = m.at("oracle_corpus").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("backend config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const BackendConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = c.kind == BackendKind::http_chat ? "http_chat" : "mock";
  if (c.kind == BackendKind::http_chat) {
    j["endpoint"] = c.endpoint;
    j["model"] = c.model;
    j["api_key_env"] = c.api_key_env;
  }
  if (!c.system_message.empty()) j["system_message"] = c.system_message;
  j["temperature"] = c.params.temperature;
  j["max_tokens"] = c.params.max_tokens;
  j["timeout_ms"] = c.params.timeout_ms;
  j["retry"] = {{"max_attempts", c.params.retry.max_attempts},
                {"backoff_ms", c.params.retry.backoff_ms}};
  j["concurrency"] = c.concurrency;
  if (c.cache_dir) j["cache_dir"] = c.cache_dir->string();
  j["bypass_cache"] = c.bypass_cache;
  if (c.kind == BackendKind::mock) {
    nlohmann::ordered_json m;
    m["kind"] = std::string(to_string(c.mock.kind));
    if (!c.mock.script.empty()) m["script"] = c.mock.script;
    if (!c.mock.prior.empty()) m["prior"] = c.mock.prior;
    m["mixing"] = c.mock.mixing;
    m["threshold"] = c.mock.threshold;
    m["seed"] = c.mock.seed;
    m["oracle_source"] = c.mock.oracle_source;
    if (c.mock.oracle_corpus) m["oracle_corpus"] = c.mock.oracle_corpus->string();
    j["mock"] = std::move(m);
  }
  return j;
}

void apply_backend_shorthand(BackendConfig& config, std::string_view shorthand) {
  constexpr std::string_view prefix = "mock:";
  if (shorthand.substr(0, prefix.size()) != prefix) {
    throw ConfigError("backend shorthand must look like mock:<kind>, got '" +
                      std::string(shorthand) + "'");
  }
  config.kind = BackendKind::mock;
  config.mock.kind = mock_kind_from_string(shorthand.substr(prefix.size()));
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config, const Corpus& corpus) {
  config.validate();
  if (config.kind == BackendKind::http_chat) return std::make_unique<HttpChatBackend>(config);
  if (config.mock.oracle_corpus) {
    auto oracle = load_corpus(*config.mock.oracle_corpus, corpus.space_ptr());
    return std::make_unique<MockBackend>(config.mock, std::move(oracle));
  }
  return std::make_unique<MockBackend>(config.mock, corpus);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::path_for(const std::string& model,
                                              const std::string& fingerprint) const {
  return dir_ / (sha256_hex(model + '\n' + fingerprint) + ".json");
}

std::optional<Completion> ResponseCache::get(const std::string& model,
                                             const std::string& fingerprint) const {
  std::ifstream in(path_for(model, fingerprint));
  if (!in) return std::nullopt;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("text")) return std::nullopt;
  Completion c;
  c.text = j.at("text").get<std::string>();
  c.usage.prompt_tokens = j.value("prompt_tokens", 0);
  c.usage.completion_tokens = j.value("completion_tokens", 0);
  c.attempts = 0;
  c.cached = true;
  return c;
}

void ResponseCache::put(const std::string& model, const std::string& fingerprint,
                        const Completion& c) const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["fingerprint"] = fingerprint;
  j["text"] = c.text;
  j["prompt_tokens"] = c.usage.prompt_tokens;
  j["completion_tokens"] = c.usage.completion_tokens;
  const auto final_path = path_for(model, fingerprint);
  auto tmp = final_path;
  tmp += ".tmp" + std::to_string(omp_get_thread_num());
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump() << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
}

Gateway::Gateway(std::unique_ptr<Backend> backend, BackendConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  config_.validate();
  if (config_.cache_dir) cache_.emplace(*config_.cache_dir);
}

Completion Gateway::complete(const CompletionRequest& request, bool bypass_cache) {
  if (request.prompt.text.empty()) throw ValidationError("empty prompt for '" + request.key + "'");
  const bool use_cache = cache_ && !bypass_cache && !config_.bypass_cache;
  const auto model = backend_->model_id();
  if (use_cache) {
    if (auto hit = cache_->get(model, request.prompt.fingerprint)) return *hit;
  }
  const auto start = std::chrono::steady_clock::now();
  auto c = backend_->complete(request);
  c.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (cache_) cache_->put(model, request.prompt.fingerprint, c);
  return c;
}

std::vector<BatchOutcome> Gateway::complete_batch(std::span<const CompletionRequest> requests,
                                                  bool bypass_cache) {
  std::vector<BatchOutcome> out(requests.size());
  const auto n = static_cast<std::int64_t>(requests.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(config_.concurrency)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)].completion = complete(requests[static_cast<std::size_t>(i)], bypass_cache);
    } catch (...) {
      out[static_cast<std::size_t>(i)].error = std::current_exception();
    }
  }
  return out;
}

std::vector<BatchOutcome> Gateway::complete_batch_serial(std::span<const CompletionRequest> requests,
                                                         bool bypass_cache) {
  std::vector<BatchOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].completion = complete(requests[i], bypass_cache);
    } catch (...) {
      out[i].error = std::current_exception();
    }
  }
  return out;
}

}  // namespace liahr
