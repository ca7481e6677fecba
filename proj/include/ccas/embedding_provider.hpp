#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccas/core.hpp"
#include "ccas/http_client.hpp"

namespace ccas {

/// Advisory file cache: one JSON record per (model, normalized text) key under
/// a run-scoped directory. Misses fall through to the service; a disabled
/// cache (empty directory path) is always a miss.
class EmbeddingCache {
public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path dir);

  bool enabled() const noexcept { return !dir_.empty(); }
  std::optional<EmbeddingVector> lookup(const std::string& model_id, const std::string& text) const;
  void store(const std::string& model_id, const std::string& text, const EmbeddingVector& vector) const;

  /// FNV-1a hex over model id and normalized text.
  static std::string cache_key(const std::string& model_id, const std::string& text);

private:
  std::filesystem::path dir_;
};

class EmbeddingProvider {
public:
  struct Options {
    std::string base_url;
    std::string api_key;
    RetryPolicy retry;
    std::filesystem::path cache_dir;
    std::size_t batch_size = 128;
  };

  explicit EmbeddingProvider(Options options);

  /// One vector per input text, order-aligned. Texts are normalized and
  /// deduplicated before the upstream call, so identical texts share one
  /// request and one vector. Validates that the service returns exactly one
  /// vector per text and a single dimension across the batch.
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                           const std::string& model_id);

  int last_retries() const noexcept { return client_.last_retries(); }

private:
  Options options_;
  EmbeddingClient client_;
  EmbeddingCache cache_;
};

// Embedding file: JSON Lines, one {"text": str, "model": str, "vector": [...]}
// per line, UTF-8, LF. Values survive a save/load round trip bit-exactly.
std::map<std::string, EmbeddingVector> load_embedding_file(const std::filesystem::path& path);
void save_embedding_file(const std::map<std::string, EmbeddingVector>& embeddings,
                         const std::filesystem::path& path);

}  // namespace ccas
