#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "embedreg/remote.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <set>
#include <thread>

#include "embedreg/error.hpp"
#include "embedreg/hash.hpp"
#include "httplib.h"
#include "json.hpp"

namespace embedreg {

std::string cache_key(const std::string& endpoint, const std::string& model,
                      const std::string& text) {
  std::string material;
  material.reserve(endpoint.size() + model.size() + text.size() + 2);
  material += endpoint;
  material.push_back('\0');
  material += model;
  material.push_back('\0');
  material += text;
  return sha256_hex(material);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  {
    std::ifstream in(*path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json rec = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (rec.is_discarded() || !rec.contains("key") || !rec.contains("values")) continue;
      auto values = rec["values"].get<std::vector<double>>();
      if (rec.value("dim", values.size()) != values.size()) continue;
      entries_[rec["key"].get<std::string>()] = std::move(values);
    }
  }
  out_.open(*path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open embedding cache " + path_->string());
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& key, const std::vector<double>& values) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, values).second) return;
  if (out_.is_open()) {
    nlohmann::json rec{{"key", key}, {"dim", values.size()}, {"values", values}};
    out_ << rec.dump() << '\n';
    out_.flush();
  }
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string RemoteConfig::config_hash() const {
  return sha256_hex("remote:" + endpoint + "\n" + model).substr(0, 16);
}

namespace {

void split_url(const std::string& url, std::string& base, std::string& path) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint must be an http(s) URL");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base = url;
    path = "/";
  } else {
    base = url.substr(0, path_start);
    path = url.substr(path_start);
  }
}

}  // namespace

RemoteEmbeddingClient::RemoteEmbeddingClient(RemoteConfig cfg,
                                             std::shared_ptr<EmbeddingCache> cache)
    : cfg_(std::move(cfg)), cache_(std::move(cache)) {
  if (!cache_) cache_ = std::make_shared<EmbeddingCache>();
  if (cfg_.batch_size == 0 || cfg_.max_in_flight == 0 || cfg_.max_attempts < 1) {
    throw ValidationError("remote embedder: batch size, in-flight limit and attempts must be positive");
  }
  if (cfg_.model.empty()) throw ValidationError("remote embedder: model id is required");
  split_url(cfg_.endpoint, base_url_, path_);
  if (!cfg_.api_key) {
    if (const char* key = std::getenv("EMBED_API_KEY")) cfg_.api_key = key;
  }
}

std::vector<std::vector<double>> RemoteEmbeddingClient::request_batch(
    const std::vector<std::string>& batch) {
  const nlohmann::json body{{"model", cfg_.model}, {"texts", batch}};
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(cfg_.initial_backoff * (1 << (attempt - 2)));
    }
    httplib::Client client(base_url_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (cfg_.api_key && !cfg_.api_key->empty()) {
      headers.emplace("Authorization", "Bearer " + *cfg_.api_key);
    }
    ++requests_;
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("embeddings") || !reply["embeddings"].is_array()) {
      throw EmbeddingFormatError("embedding service returned a malformed body");
    }
    const auto& rows = reply["embeddings"];
    if (rows.size() != batch.size()) {
      throw EmbeddingFormatError("embedding service returned " + std::to_string(rows.size()) +
                                 " rows for " + std::to_string(batch.size()) + " texts");
    }
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
      if (!row.is_array()) throw EmbeddingFormatError("embedding row is not an array");
      std::vector<double> v;
      v.reserve(row.size());
      for (const auto& x : row) {
        if (!x.is_number()) throw EmbeddingFormatError("embedding entry is not a number");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw EmbeddingFormatError("embedding entry is not finite");
        v.push_back(d);
      }
      out.push_back(std::move(v));
    }
    return out;
  }
  throw TransportError("embedding request failed after " + std::to_string(cfg_.max_attempts) +
                       " attempts: " + last_error);
}

EmbeddingMatrix RemoteEmbeddingClient::embed(const std::vector<std::string>& texts) {
  const Provenance provenance{"remote", cfg_.config_hash()};
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  std::map<std::string, std::vector<double>> resolved;
  std::vector<std::string> missing;  // unique texts, first-appearance order
  std::vector<std::string> missing_keys;
  std::set<std::string> pending;
  for (const auto& t : texts) {
    keys.push_back(cache_key(cfg_.endpoint, cfg_.model, t));
    if (resolved.count(keys.back())) continue;
    if (auto hit = cache_->get(keys.back())) {
      resolved.emplace(keys.back(), std::move(*hit));
    } else if (pending.insert(keys.back()).second) {
      missing.push_back(t);
      missing_keys.push_back(keys.back());
    }
  }

  if (!missing.empty()) {
    std::vector<std::vector<std::string>> batches;
    for (std::size_t i = 0; i < missing.size(); i += cfg_.batch_size) {
      const auto end = std::min(missing.size(), i + cfg_.batch_size);
      batches.emplace_back(missing.begin() + static_cast<std::ptrdiff_t>(i),
                           missing.begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::vector<std::vector<std::vector<double>>> results(batches.size());
    std::vector<std::exception_ptr> errors(batches.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t b = next++; b < batches.size(); b = next++) {
        try {
          results[b] = request_batch(batches[b]);
        } catch (...) {
          errors[b] = std::current_exception();
        }
      }
    };
    const std::size_t n_workers = std::min(cfg_.max_in_flight, batches.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    std::optional<std::size_t> dim;
    if (!resolved.empty()) dim = resolved.begin()->second.size();
    for (const auto& batch : results) {
      for (const auto& row : batch) {
        if (!dim) dim = row.size();
        if (row.size() != *dim || row.empty()) {
          throw EmbeddingFormatError("inconsistent embedding dimensions across responses");
        }
      }
    }
    std::size_t k = 0;
    for (const auto& batch : results) {
      for (const auto& row : batch) {
        cache_->put(missing_keys[k], row);
        resolved.emplace(missing_keys[k], row);
        ++k;
      }
    }
  }

  std::size_t dim = resolved.empty() ? 0 : resolved.begin()->second.size();
  for (const auto& [key, v] : resolved) {
    if (v.size() != dim) throw EmbeddingFormatError("inconsistent embedding dimensions in cache");
  }
  RowMatrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < texts.size(); ++r) {
    const auto& v = resolved.at(keys[r]);
    for (std::size_t c = 0; c < dim; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
    }
  }
  return EmbeddingMatrix(std::move(out), provenance);
}

EmbeddingMatrix embed_remote(const std::vector<std::string>& texts, const RemoteConfig& cfg,
                             std::shared_ptr<EmbeddingCache> cache) {
  RemoteEmbeddingClient client(cfg, std::move(cache));
  return client.embed(texts);
}

std::optional<std::size_t> reference_embedding_dim(const std::string& model) {
  static const std::map<std::string, std::size_t> dims{
      {"t5-small", 512},      {"t5-large", 1024},    {"t5-xl", 2048},
      {"t5-xxl", 4096},       {"gemini-nano", 1536}, {"gemini-pro", 6144},
      {"gemini-ultra", 14336}};
  auto it = dims.find(model);
  if (it == dims.end()) return std::nullopt;
  return it->second;
}

}  // namespace embedreg
