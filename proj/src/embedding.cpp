#include "embedreg/embedding.hpp"

#include <cmath>

#include "embedreg/error.hpp"
#include "embedreg/hash.hpp"
#include "embedreg/random.hpp"

namespace embedreg {

EmbeddingMatrix::EmbeddingMatrix(RowMatrix values, Provenance provenance)
    : values_(std::move(values)), provenance_(std::move(provenance)) {
  if (provenance_.backend.empty()) throw EmbeddingFormatError("embedding provenance is empty");
  if (!values_.allFinite()) throw EmbeddingFormatError("embedding contains non-finite entries");
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, and out-of-range code points.
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  if (text.empty()) throw EmptyInputError("tokenize: empty string");
  if (!valid_utf8(text)) throw ValidationError("tokenize: input is not valid UTF-8");
  TokenSequence seq;
  seq.ids.reserve(text.size());
  for (char c : text) seq.ids.push_back(static_cast<unsigned char>(c));
  return seq;
}

VocabTable VocabTable::generate(std::size_t width, std::uint64_t seed, std::size_t vocab_size) {
  if (width == 0 || vocab_size == 0) throw ValidationError("vocab table needs positive sizes");
  VocabTable t;
  t.vocab_size = vocab_size;
  t.width = width;
  t.seed = seed;
  t.entries.resize(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(width));
  Rng rng(derive_seed(seed, "vocab_table"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  for (Eigen::Index r = 0; r < t.entries.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.entries.cols(); ++c) t.entries(r, c) = rng.normal() * scale;
  }
  return t;
}

std::string VocabTable::config_hash() const {
  return sha256_hex("vocab:v=" + std::to_string(vocab_size) + ",w=" + std::to_string(width) +
                    ",seed=" + std::to_string(seed))
      .substr(0, 16);
}

EmbeddingMatrix embed_vocab_pool(const std::vector<std::string>& texts, const VocabTable& table) {
  if (texts.empty()) throw EmptyInputError("embed_vocab_pool: no texts");
  RowMatrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(table.width));
  for (std::size_t r = 0; r < texts.size(); ++r) {
    const auto tokens = tokenize(texts[r]);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(table.width));
    for (auto id : tokens.ids) {
      if (id >= table.vocab_size) throw ValidationError("token id outside vocabulary");
      acc += table.entries.row(id);
    }
    out.row(static_cast<Eigen::Index>(r)) = acc / static_cast<double>(tokens.length());
  }
  return EmbeddingMatrix(std::move(out), {"vocab_pool", table.config_hash()});
}

}  // namespace embedreg
