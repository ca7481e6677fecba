#pragma once

#include <string>
#include <vector>

namespace ccas {

struct RetryPolicy {
  int max_retries = 2;
  int backoff_initial_ms = 250;
  double backoff_factor = 2.0;
};

/// "https://host:port/v1" -> {"https://host:port", "/v1"}
struct HttpEndpoint {
  std::string host_part;
  std::string path_prefix;
};
HttpEndpoint split_base_url(const std::string& base_url);

/// POST application/json against an OpenAI-compatible service, retrying
/// transport failures, 429 and 5xx with exponential backoff. The bearer
/// credential is sent when non-empty and never appears in errors or logs.
class JsonHttpClient {
public:
  JsonHttpClient(std::string base_url, std::string api_key, RetryPolicy retry = {});

  /// Response body for 2xx; throws Error(Upstream) once retries are exhausted.
  std::string post_json(const std::string& path, const std::string& body);

  /// Retries consumed by the most recent post_json call.
  int last_retries() const noexcept { return last_retries_; }

private:
  std::string base_url_;
  std::string api_key_;
  RetryPolicy retry_;
  int last_retries_ = 0;
};

/// Single-turn chat completion: one user message in, choices[0] text out.
class ChatClient {
public:
  ChatClient(std::string base_url, std::string api_key, RetryPolicy retry = {});

  std::string complete(const std::string& model_id, const std::string& user_message,
                       double temperature);
  int last_retries() const noexcept { return http_.last_retries(); }

private:
  JsonHttpClient http_;
};

/// Batch embeddings: one vector per input text, order-aligned.
class EmbeddingClient {
public:
  EmbeddingClient(std::string base_url, std::string api_key, RetryPolicy retry = {});

  std::vector<std::vector<double>> embed(const std::string& model_id,
                                         const std::vector<std::string>& texts);
  int last_retries() const noexcept { return http_.last_retries(); }

private:
  JsonHttpClient http_;
};

}  // namespace ccas
