#include "ccas/http_client.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "ccas/errors.hpp"

namespace ccas {

HttpEndpoint split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::Config, "base URL must start with http:// or https://: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

JsonHttpClient::JsonHttpClient(std::string base_url, std::string api_key, RetryPolicy retry)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), retry_(retry) {}

std::string JsonHttpClient::post_json(const std::string& path, const std::string& body) {
  const HttpEndpoint ep = split_base_url(base_url_);
  httplib::Client client(ep.host_part);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  if (!api_key_.empty()) {
    client.set_bearer_token_auth(api_key_);
  }

  last_retries_ = 0;
  double backoff_ms = retry_.backoff_initial_ms;
  std::string last_failure;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(backoff_ms)));
      backoff_ms *= retry_.backoff_factor;
      ++last_retries_;
    }
    auto res = client.Post(ep.path_prefix + path, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      return res->body;
    }
    last_failure = "HTTP " + std::to_string(res->status);
    const bool retriable = res->status == 429 || res->status >= 500;
    if (!retriable) break;
  }
  throw Error(ErrorKind::Upstream, "POST " + ep.path_prefix + path + " failed after " +
                                       std::to_string(last_retries_) + " retries (" + last_failure +
                                       ")");
}

ChatClient::ChatClient(std::string base_url, std::string api_key, RetryPolicy retry)
    : http_(std::move(base_url), std::move(api_key), retry) {}

std::string ChatClient::complete(const std::string& model_id, const std::string& user_message,
                                 double temperature) {
  nlohmann::json body = {
      {"model", model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", user_message}}})},
      {"temperature", temperature},
  };
  const std::string reply = http_.post_json("/chat/completions", body.dump());
  nlohmann::json doc = nlohmann::json::parse(reply, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty() || !doc["choices"][0].contains("message") ||
      !doc["choices"][0]["message"].contains("content")) {
    throw Error(ErrorKind::Upstream, "chat completion response missing choices[0].message.content",
                reply);
  }
  return doc["choices"][0]["message"]["content"].get<std::string>();
}

EmbeddingClient::EmbeddingClient(std::string base_url, std::string api_key, RetryPolicy retry)
    : http_(std::move(base_url), std::move(api_key), retry) {}

std::vector<std::vector<double>> EmbeddingClient::embed(const std::string& model_id,
                                                        const std::vector<std::string>& texts) {
  nlohmann::json body = {{"model", model_id}, {"input", texts}};
  const std::string reply = http_.post_json("/embeddings", body.dump());
  nlohmann::json doc = nlohmann::json::parse(reply, nullptr, false);
  if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array()) {
    throw Error(ErrorKind::Upstream, "embeddings response missing data array", reply);
  }
  std::vector<std::vector<double>> out(doc["data"].size());
  std::size_t fallback_index = 0;
  for (const auto& item : doc["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw Error(ErrorKind::Upstream, "embeddings response entry missing embedding array", reply);
    }
    const std::size_t index =
        item.contains("index") ? item["index"].get<std::size_t>() : fallback_index;
    if (index >= out.size()) {
      throw Error(ErrorKind::Upstream,
                  "embeddings response index " + std::to_string(index) + " out of range", reply);
    }
    out[index] = item["embedding"].get<std::vector<double>>();
    ++fallback_index;
  }
  return out;
}

}  // namespace ccas
