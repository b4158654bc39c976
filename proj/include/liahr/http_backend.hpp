#pragma once

#include <string>

#include "liahr/gateway.hpp"

namespace liahr {

struct ParsedUrl {
  std::string scheme_host_port;  ///< "https://api.example.com:443"
  std::string path;              ///< "/v1/chat/completions"
};

ParsedUrl parse_url(const std::string& url);

/// Chat-completions client: one user message per prompt (optionally after a
/// system message), temperature and max_tokens from the config.
///
/// 401/403 raise AuthError immediately. Timeouts, connection failures, 408,
/// 429 and 5xx are retried per the retry policy (429 honors Retry-After when
/// it is longer than the scheduled backoff). Anything else is a
/// non-retryable TransportError.
class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(BackendConfig config);

  Completion complete(const CompletionRequest& request) override;
  std::string model_id() const override { return config_.model; }

  /// Request body for a prompt; exposed for wire-format tests.
  static nlohmann::json request_body(const BackendConfig& config, const std::string& prompt);
  /// Extracts choices[0].message.content and usage from a response body.
  static Completion parse_response(const std::string& body);

 private:
  BackendConfig config_;
  ParsedUrl url_;
  std::string token_;
};

}  // namespace liahr
