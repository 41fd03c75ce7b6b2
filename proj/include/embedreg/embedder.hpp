#pragma once

#include <memory>
#include <string>
#include <vector>

#include "embedreg/embedding.hpp"
#include "embedreg/featurizer.hpp"
#include "embedreg/remote.hpp"
#include "embedreg/task.hpp"
#include "embedreg/transformer.hpp"
#include "json.hpp"

namespace embedreg {

/// phi: inputs of a task -> R^d. Implementations are read-only after construction
/// and may be called from several threads.
class Embedder {
 public:
  explicit Embedder(std::string name) : name_(std::move(name)) {}
  virtual ~Embedder() = default;

  virtual EmbeddingMatrix embed(const RegressionTask& task,
                                const std::vector<Assignment>& xs) const = 0;
  virtual Provenance provenance() const = 0;
  virtual bool uses_network() const { return false; }

  /// Display label from the experiment config (e.g. "trad", "t5-xxl").
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Rowwise featurize_traditional; an empty input yields a 0 x d_trad matrix.
EmbeddingMatrix embed_traditional(const RegressionTask& task, const std::vector<Assignment>& xs);

/// Traditional features with each coordinate cyclically shifted by a per-point offset
/// drawn from SHA-256 of the point's full-precision serialization: v -> frac(v + u_k).
/// Points are kept distinct but neighborhoods are destroyed, which makes this a
/// deliberately non-smooth reference representation.
EmbeddingMatrix embed_hash_scramble(const RegressionTask& task,
                                    const std::vector<Assignment>& xs,
                                    const std::string& salt = {});

class TraditionalEmbedder final : public Embedder {
 public:
  explicit TraditionalEmbedder(std::string name = "traditional") : Embedder(std::move(name)) {}
  EmbeddingMatrix embed(const RegressionTask& task,
                        const std::vector<Assignment>& xs) const override;
  Provenance provenance() const override;
};

class HashScrambleEmbedder final : public Embedder {
 public:
  HashScrambleEmbedder(std::string name, std::string salt)
      : Embedder(std::move(name)), salt_(std::move(salt)) {}
  EmbeddingMatrix embed(const RegressionTask& task,
                        const std::vector<Assignment>& xs) const override;
  Provenance provenance() const override;

 private:
  std::string salt_;
};

/// Serializes each input, then embeds the strings.
class TextEmbedder : public Embedder {
 public:
  TextEmbedder(std::string name, StringFormat format)
      : Embedder(std::move(name)), format_(format) {}
  EmbeddingMatrix embed(const RegressionTask& task,
                        const std::vector<Assignment>& xs) const final;
  virtual EmbeddingMatrix embed_texts(const std::vector<std::string>& texts) const = 0;
  const StringFormat& format() const { return format_; }

 protected:
  std::string format_hash() const;

 private:
  StringFormat format_;
};

class VocabPoolEmbedder final : public TextEmbedder {
 public:
  VocabPoolEmbedder(std::string name, StringFormat format, std::size_t width, std::uint64_t seed);
  EmbeddingMatrix embed_texts(const std::vector<std::string>& texts) const override;
  Provenance provenance() const override;

 private:
  VocabTable table_;
};

class SyntheticTransformerEmbedder final : public TextEmbedder {
 public:
  SyntheticTransformerEmbedder(std::string name, StringFormat format,
                               SyntheticTransformerConfig cfg);
  EmbeddingMatrix embed_texts(const std::vector<std::string>& texts) const override;
  Provenance provenance() const override;

 private:
  SyntheticTransformerConfig cfg_;
  VocabTable table_;
};

class RemoteEmbedder final : public TextEmbedder {
 public:
  RemoteEmbedder(std::string name, StringFormat format, RemoteConfig cfg,
                 std::shared_ptr<EmbeddingCache> cache);
  EmbeddingMatrix embed_texts(const std::vector<std::string>& texts) const override;
  Provenance provenance() const override;
  bool uses_network() const override { return true; }
  const RemoteEmbeddingClient& client() const { return *client_; }

 private:
  std::unique_ptr<RemoteEmbeddingClient> client_;
};

/// Reads string-format keys ("string_format", "float_sig_digits", "space_after_comma")
/// from `j`, falling back to `defaults`.
StringFormat string_format_from_json(const nlohmann::json& j, const StringFormat& defaults = {});

/// Builds an embedder from a spec such as
///   {"name": "trad", "type": "traditional"}
///   {"name": "vocab", "type": "vocab_pool", "width": 64, "seed": 0}
///   {"name": "rand", "type": "synthetic_transformer", "layers": 2, "model_dim": 64, ...}
///   {"name": "scrambled", "type": "hash_scramble"}
///   {"name": "t5", "type": "remote", "endpoint": "http://...", "model": "t5-xxl", "cache": "..."}
std::unique_ptr<Embedder> make_embedder(const nlohmann::json& spec,
                                        const StringFormat& default_format = {});

}  // namespace embedreg
