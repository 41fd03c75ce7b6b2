#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace embedreg::testing {

/// Local embedding service speaking the remote client's protocol:
/// POST {"model", "texts": [...]} -> {"embeddings": [[...], ...]}.
class MockEmbeddingServer {
 public:
  explicit MockEmbeddingServer(std::size_t dim = 8);
  ~MockEmbeddingServer();
  MockEmbeddingServer(const MockEmbeddingServer&) = delete;
  MockEmbeddingServer& operator=(const MockEmbeddingServer&) = delete;

  std::string endpoint() const;

  /// The next `n` requests get HTTP 503.
  void fail_next(int n) { fail_budget_ = n; }
  void always_fail(bool on) { always_fail_ = on; }
  /// Reply with one row fewer than requested.
  void short_reply(bool on) { short_reply_ = on; }
  /// Every second row comes back one entry short.
  void mixed_dims(bool on) { mixed_dims_ = on; }

  std::size_t requests() const { return requests_.load(); }
  std::vector<std::size_t> batch_sizes() const;
  std::vector<std::string> texts_seen() const;
  std::string last_authorization() const;

  /// Deterministic row the server returns for `text`.
  static std::vector<double> embedding_for(const std::string& text, std::size_t dim);

 private:
  std::size_t dim_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> fail_budget_{0};
  std::atomic<bool> always_fail_{false};
  std::atomic<bool> short_reply_{false};
  std::atomic<bool> mixed_dims_{false};
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mu_;
  std::vector<std::size_t> batch_sizes_;
  std::vector<std::string> texts_;
  std::string authorization_;
};

}  // namespace embedreg::testing
