#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "embedreg/embedding.hpp"

namespace embedreg {

/// SHA-256 (hex) over endpoint id, model id and text bytes, NUL-separated.
std::string cache_key(const std::string& endpoint, const std::string& model,
                      const std::string& text);

/// Content-addressed store of embedding vectors.
///
/// With a path, records are appended to a line-delimited JSON file, one
/// `{"key": "<sha256 hex>", "dim": <int>, "values": [<float>, ...]}` per line.
/// Existing records are loaded on construction; a torn final line is ignored.
/// Reads and writes are thread-safe; writes are serialized.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;  // memory only
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<std::vector<double>> get(const std::string& key) const;
  void put(const std::string& key, const std::vector<double>& values);
  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  mutable std::mutex mu_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  std::unordered_map<std::string, std::vector<double>> entries_;
};

struct RemoteConfig {
  /// Full URL of the embedding route, e.g. "http://127.0.0.1:8080/embed".
  std::string endpoint;
  std::string model;
  std::size_t batch_size = 32;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{30000};
  /// Bearer token; when unset the EMBED_API_KEY environment variable is used.
  std::optional<std::string> api_key;

  std::string config_hash() const;
};

/// Client for the generic embedding service:
///   POST {"model": "<id>", "texts": [...]}  ->  {"embeddings": [[...], ...]}
class RemoteEmbeddingClient {
 public:
  RemoteEmbeddingClient(RemoteConfig cfg, std::shared_ptr<EmbeddingCache> cache);

  /// Rows follow input order. Cache hits never touch the network.
  EmbeddingMatrix embed(const std::vector<std::string>& texts);

  /// HTTP requests issued so far, retries included.
  std::size_t requests_sent() const { return requests_.load(); }
  const RemoteConfig& config() const { return cfg_; }

 private:
  std::vector<std::vector<double>> request_batch(const std::vector<std::string>& batch);

  RemoteConfig cfg_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::string base_url_;
  std::string path_;
  std::atomic<std::size_t> requests_{0};
};

EmbeddingMatrix embed_remote(const std::vector<std::string>& texts, const RemoteConfig& cfg,
                             std::shared_ptr<EmbeddingCache> cache);

/// Embedding widths of the reference service models, keyed by model name
/// ("t5-small", ..., "gemini-ultra").
std::optional<std::size_t> reference_embedding_dim(const std::string& model);

}  // namespace embedreg
