#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace embedreg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Which backend produced a matrix, and a hash of the exact backend config.
struct Provenance {
  std::string backend;
  std::string config_hash;

  std::string str() const { return backend + ":" + config_hash; }
  bool operator==(const Provenance&) const = default;
};

/// n x d matrix of finite reals, one row per input.
class EmbeddingMatrix {
 public:
  /// Throws EmbeddingFormatError on non-finite entries or an empty provenance.
  EmbeddingMatrix(RowMatrix values, Provenance provenance);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  const RowMatrix& values() const { return values_; }
  const Provenance& provenance() const { return provenance_; }

 private:
  RowMatrix values_;
  Provenance provenance_;
};

/// Byte-level tokens (vocabulary of 256).
struct TokenSequence {
  static constexpr std::size_t kVocabSize = 256;
  std::vector<std::uint32_t> ids;

  std::size_t length() const { return ids.size(); }
};

/// Each UTF-8 byte becomes one token. Throws EmptyInputError on "" and
/// ValidationError on malformed UTF-8.
TokenSequence tokenize(std::string_view text);

/// v x width lookup table, entries i.i.d. N(0, 1) / sqrt(width).
struct VocabTable {
  std::size_t vocab_size = TokenSequence::kVocabSize;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  RowMatrix entries;

  static VocabTable generate(std::size_t width, std::uint64_t seed,
                             std::size_t vocab_size = TokenSequence::kVocabSize);
  std::string config_hash() const;
};

/// Token lookup then mean over positions, with no forward pass.
EmbeddingMatrix embed_vocab_pool(const std::vector<std::string>& texts, const VocabTable& table);

}  // namespace embedreg
