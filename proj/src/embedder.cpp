#include "embedreg/embedder.hpp"

#include <cmath>
#include <cstring>

#include "embedreg/error.hpp"
#include "embedreg/hash.hpp"

namespace embedreg {

EmbeddingMatrix embed_traditional(const RegressionTask& task, const std::vector<Assignment>& xs) {
  const auto width = TraditionalFeatureLayout::of(task).width;
  RowMatrix out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const auto row = featurize_traditional(task, xs[r]);
    for (std::size_t c = 0; c < width; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return EmbeddingMatrix(std::move(out), {"traditional", "minmax-onehot-v1"});
}

EmbeddingMatrix embed_hash_scramble(const RegressionTask& task, const std::vector<Assignment>& xs,
                                    const std::string& salt) {
  const EmbeddingMatrix base = embed_traditional(task, xs);
  RowMatrix out = base.values();
  const StringFormat exact{StringFormat::Variant::full_dict, 17, false};
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const std::string key = "hash_scramble:" + salt + ":" + serialize(task, xs[r], exact);
    Sha256Digest digest{};
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const auto slot = static_cast<std::size_t>(c % 8);
      if (slot == 0) digest = sha256(key + "#" + std::to_string(c / 8));
      std::uint32_t word = 0;
      for (std::size_t k = 0; k < 4; ++k) word = (word << 8) | digest[slot * 4 + k];
      const double shifted = out(static_cast<Eigen::Index>(r), c) + word * 0x1.0p-32;
      out(static_cast<Eigen::Index>(r), c) = shifted - std::floor(shifted);
    }
  }
  return EmbeddingMatrix(std::move(out),
                         {"hash_scramble", sha256_hex("scramble-v1:" + salt).substr(0, 16)});
}

EmbeddingMatrix TraditionalEmbedder::embed(const RegressionTask& task,
                                           const std::vector<Assignment>& xs) const {
  return embed_traditional(task, xs);
}

Provenance TraditionalEmbedder::provenance() const { return {"traditional", "minmax-onehot-v1"}; }

EmbeddingMatrix HashScrambleEmbedder::embed(const RegressionTask& task,
                                            const std::vector<Assignment>& xs) const {
  return embed_hash_scramble(task, xs, salt_);
}

Provenance HashScrambleEmbedder::provenance() const {
  return {"hash_scramble", sha256_hex("scramble-v1:" + salt_).substr(0, 16)};
}

EmbeddingMatrix TextEmbedder::embed(const RegressionTask& task,
                                    const std::vector<Assignment>& xs) const {
  std::vector<std::string> texts;
  texts.reserve(xs.size());
  for (const auto& x : xs) texts.push_back(serialize(task, x, format_));
  if (texts.empty()) return EmbeddingMatrix(RowMatrix(0, 0), provenance());
  EmbeddingMatrix m = embed_texts(texts);
  return EmbeddingMatrix(m.values(), provenance());
}

std::string TextEmbedder::format_hash() const {
  return std::string("fmt=") + StringFormat::variant_name(format_.variant) +
         ",sig=" + std::to_string(format_.float_precision) +
         ",space=" + (format_.space_after_comma ? "1" : "0");
}

VocabPoolEmbedder::VocabPoolEmbedder(std::string name, StringFormat format, std::size_t width,
                                     std::uint64_t seed)
    : TextEmbedder(std::move(name), format), table_(VocabTable::generate(width, seed)) {}

EmbeddingMatrix VocabPoolEmbedder::embed_texts(const std::vector<std::string>& texts) const {
  return embed_vocab_pool(texts, table_);
}

Provenance VocabPoolEmbedder::provenance() const {
  return {"vocab_pool", sha256_hex(table_.config_hash() + format_hash()).substr(0, 16)};
}

SyntheticTransformerEmbedder::SyntheticTransformerEmbedder(std::string name, StringFormat format,
                                                           SyntheticTransformerConfig cfg)
    : TextEmbedder(std::move(name), format), cfg_(cfg),
      table_(VocabTable::generate(cfg.model_dim, cfg.seed)) {
  cfg_.validate();
}

EmbeddingMatrix SyntheticTransformerEmbedder::embed_texts(
    const std::vector<std::string>& texts) const {
  return embed_synthetic_transformer(texts, cfg_, table_);
}

Provenance SyntheticTransformerEmbedder::provenance() const {
  return {"synthetic_transformer",
          sha256_hex(cfg_.config_hash() + table_.config_hash() + format_hash()).substr(0, 16)};
}

RemoteEmbedder::RemoteEmbedder(std::string name, StringFormat format, RemoteConfig cfg,
                               std::shared_ptr<EmbeddingCache> cache)
    : TextEmbedder(std::move(name), format),
      client_(std::make_unique<RemoteEmbeddingClient>(std::move(cfg), std::move(cache))) {}

EmbeddingMatrix RemoteEmbedder::embed_texts(const std::vector<std::string>& texts) const {
  return client_->embed(texts);
}

Provenance RemoteEmbedder::provenance() const {
  return {"remote", sha256_hex(client_->config().config_hash() + format_hash()).substr(0, 16)};
}

StringFormat string_format_from_json(const nlohmann::json& j, const StringFormat& defaults) {
  StringFormat fmt = defaults;
  if (j.contains("string_format")) {
    fmt.variant = StringFormat::parse_variant(j["string_format"].get<std::string>());
  }
  fmt.float_precision = j.value("float_sig_digits", fmt.float_precision);
  fmt.space_after_comma = j.value("space_after_comma", fmt.space_after_comma);
  if (fmt.float_precision < 1) throw ValidationError("float_sig_digits must be positive");
  return fmt;
}

std::unique_ptr<Embedder> make_embedder(const nlohmann::json& spec,
                                        const StringFormat& default_format) {
  try {
    const std::string type = spec.at("type").get<std::string>();
    const std::string name = spec.value("name", type);
    const StringFormat fmt = string_format_from_json(spec, default_format);
    if (type == "traditional") return std::make_unique<TraditionalEmbedder>(name);
    if (type == "hash_scramble") {
      return std::make_unique<HashScrambleEmbedder>(name, spec.value("salt", std::string{}));
    }
    if (type == "vocab_pool") {
      return std::make_unique<VocabPoolEmbedder>(name, fmt, spec.value("width", std::size_t{64}),
                                                 spec.value("seed", std::uint64_t{0}));
    }
    if (type == "synthetic_transformer") {
      SyntheticTransformerConfig cfg;
      cfg.layers = spec.value("layers", cfg.layers);
      cfg.model_dim = spec.value("model_dim", cfg.model_dim);
      cfg.heads = spec.value("heads", cfg.heads);
      cfg.ff_dim = spec.value("ff_dim", cfg.ff_dim);
      cfg.seed = spec.value("seed", cfg.seed);
      return std::make_unique<SyntheticTransformerEmbedder>(name, fmt, cfg);
    }
    if (type == "remote") {
      RemoteConfig cfg;
      cfg.endpoint = spec.at("endpoint").get<std::string>();
      cfg.model = spec.at("model").get<std::string>();
      cfg.batch_size = spec.value("batch_size", cfg.batch_size);
      cfg.max_in_flight = spec.value("max_in_flight", cfg.max_in_flight);
      cfg.max_attempts = spec.value("max_attempts", cfg.max_attempts);
      cfg.initial_backoff = std::chrono::milliseconds(
          spec.value("backoff_ms", static_cast<long>(cfg.initial_backoff.count())));
      std::shared_ptr<EmbeddingCache> cache;
      if (spec.contains("cache")) {
        cache = std::make_shared<EmbeddingCache>(spec["cache"].get<std::string>());
      }
      return std::make_unique<RemoteEmbedder>(name, fmt, std::move(cfg), std::move(cache));
    }
    throw ValidationError("unknown embedder type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("embedder spec: ") + e.what());
  }
}

}  // namespace embedreg
