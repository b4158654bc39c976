#include "liahr/http_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "liahr/error.hpp"

namespace liahr {

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = url;
    out.path = "/";
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  if (out.scheme_host_port.size() <= scheme_end + 3) throw ConfigError("endpoint URL has no host: " + url);
  return out;
}

HttpChatBackend::HttpChatBackend(BackendConfig config)
    : config_(std::move(config)), url_(parse_url(config_.endpoint)) {
  if (!config_.api_key_env.empty()) {
    const char* token = std::getenv(config_.api_key_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw ConfigError("environment variable " + config_.api_key_env + " (API token) is not set");
    }
    token_ = token;
  }
}

nlohmann::json HttpChatBackend::request_body(const BackendConfig& config, const std::string& prompt) {
  nlohmann::json messages = nlohmann::json::array();
  if (!config.system_message.empty()) {
    messages.push_back({{"role", "system"}, {"content", config.system_message}});
  }
  messages.push_back({{"role", "user"}, {"content", prompt}});
  return {{"model", config.model},
          {"messages", messages},
          {"temperature", config.params.temperature},
          {"max_tokens", config.params.max_tokens}};
}

Completion HttpChatBackend::parse_response(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("response is not JSON");
  try {
    Completion c;
    const auto& content = j.at("choices").at(0).at("message").at("content");
    c.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (j.contains("usage") && j.at("usage").is_object()) {
      c.usage.prompt_tokens = j.at("usage").value("prompt_tokens", 0);
      c.usage.completion_tokens = j.at("usage").value("completion_tokens", 0);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected response shape: ") + e.what());
  }
}

namespace {

int backoff_for(const RetryPolicy& policy, int attempt) {
  if (policy.backoff_ms.empty()) return 0;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), policy.backoff_ms.size() - 1);
  return policy.backoff_ms[i];
}

}  // namespace

Completion HttpChatBackend::complete(const CompletionRequest& request) {
  const auto body = request_body(config_, request.prompt.text).dump();
  const auto& policy = config_.params.retry;
  std::string last_cause;

  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    httplib::Client client(url_.scheme_host_port);
    const auto timeout = std::chrono::milliseconds(config_.params.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    int wait_ms = backoff_for(policy, attempt);
    auto res = client.Post(url_.path, headers, body, "application/json");
    if (!res) {
      last_cause = "transport: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      auto c = parse_response(res->body);
      c.attempts = attempt;
      return c;
    } else if (res->status == 401 || res->status == 403) {
      throw AuthError("authentication failed (HTTP " + std::to_string(res->status) + "): " + res->body);
    } else if (res->status == 408 || res->status == 429 || res->status >= 500) {
      last_cause = "HTTP " + std::to_string(res->status);
      if (res->status == 429 && res->has_header("Retry-After")) {
        const auto retry_after = std::atoi(res->get_header_value("Retry-After").c_str());
        wait_ms = std::max(wait_ms, retry_after * 1000);
      }
    } else {
      throw TransportError("HTTP " + std::to_string(res->status) + " (not retryable): " + res->body);
    }
    if (attempt < policy.max_attempts && wait_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
    }
  }
  throw TransportError("request '" + request.key + "' failed after " +
                       std::to_string(policy.max_attempts) + " attempts; last cause: " + last_cause);
}

}  // namespace liahr
