#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "mock_server.hpp"

#include "embedreg/hash.hpp"
#include "httplib.h"
#include "json.hpp"

namespace embedreg::testing {

MockEmbeddingServer::MockEmbeddingServer(std::size_t dim)
    : dim_(dim), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    std::vector<std::string> texts;
    if (!body.is_discarded() && body.contains("texts")) texts = body["texts"].get<std::vector<std::string>>();
    {
      std::lock_guard lock(mu_);
      batch_sizes_.push_back(texts.size());
      texts_.insert(texts_.end(), texts.begin(), texts.end());
      authorization_ = req.get_header_value("Authorization");
    }
    if (always_fail_ || fail_budget_.fetch_sub(1) > 0) {
      res.status = 503;
      res.set_content("unavailable", "text/plain");
      return;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < texts.size(); ++i) {
      rows.push_back(embedding_for(texts[i], mixed_dims_ && i % 2 ? dim_ - 1 : dim_));
    }
    if (short_reply_ && !rows.empty()) rows.erase(rows.end() - 1);
    res.set_content(nlohmann::json{{"embeddings", rows}}.dump(), "application/json");
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockEmbeddingServer::~MockEmbeddingServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockEmbeddingServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/embed";
}

std::vector<std::size_t> MockEmbeddingServer::batch_sizes() const {
  std::lock_guard lock(mu_);
  return batch_sizes_;
}

std::vector<std::string> MockEmbeddingServer::texts_seen() const {
  std::lock_guard lock(mu_);
  return texts_;
}

std::string MockEmbeddingServer::last_authorization() const {
  std::lock_guard lock(mu_);
  return authorization_;
}

std::vector<double> MockEmbeddingServer::embedding_for(const std::string& text, std::size_t dim) {
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const auto digest = sha256(text + "#" + std::to_string(i / 32));
    out[i] = static_cast<double>(digest[i % 32]) / 255.0 - 0.5;
  }
  return out;
}

}  // namespace embedreg::testing
