#include "embedreg/transformer.hpp"

#include <cmath>

#include "embedreg/error.hpp"
#include "embedreg/hash.hpp"
#include "embedreg/random.hpp"

namespace embedreg {
namespace {

Eigen::MatrixXd gaussian(Rng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal() * scale;
  }
  return m;
}

// Unit-gain layer normalization over each row.
RowMatrix layer_norm(const RowMatrix& h) {
  constexpr double kEps = 1e-5;
  RowMatrix out(h.rows(), h.cols());
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    const double mean = h.row(r).mean();
    const double var = (h.row(r).array() - mean).square().mean();
    out.row(r) = (h.row(r).array() - mean) / std::sqrt(var + kEps);
  }
  return out;
}

void softmax_rows(RowMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

void SyntheticTransformerConfig::validate() const {
  if (layers == 0 || model_dim == 0 || heads == 0 || ff_dim == 0) {
    throw ValidationError("transformer config sizes must be positive");
  }
  if (model_dim % heads != 0) throw ValidationError("model_dim must be divisible by heads");
}

std::string SyntheticTransformerConfig::config_hash() const {
  return sha256_hex("transformer:layers=" + std::to_string(layers) +
                    ",dim=" + std::to_string(model_dim) + ",heads=" + std::to_string(heads) +
                    ",ff=" + std::to_string(ff_dim) + ",seed=" + std::to_string(seed))
      .substr(0, 16);
}

SyntheticTransformer::SyntheticTransformer(const SyntheticTransformerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(cfg_.seed, "synthetic_transformer"));
  const std::size_t d = cfg_.model_dim;
  const std::size_t f = cfg_.ff_dim;
  blocks_.reserve(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    Block b;
    b.wq = gaussian(rng, d, d, d);
    b.wk = gaussian(rng, d, d, d);
    b.wv = gaussian(rng, d, d, d);
    b.wo = gaussian(rng, d, d, d);
    b.ff1 = gaussian(rng, d, f, d);
    b.ff1_bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(f));
    b.ff2 = gaussian(rng, f, d, f);
    b.ff2_bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
    blocks_.push_back(std::move(b));
  }
}

RowMatrix SyntheticTransformer::forward(const TokenSequence& tokens, const VocabTable& table,
                                        const AttentionObserver& observer) const {
  if (table.width != cfg_.model_dim) {
    throw DimensionMismatchError("vocab width " + std::to_string(table.width) +
                                 " != model_dim " + std::to_string(cfg_.model_dim));
  }
  const auto L = static_cast<Eigen::Index>(tokens.length());
  const auto d = static_cast<Eigen::Index>(cfg_.model_dim);
  if (L == 0) throw EmptyInputError("transformer: empty token sequence");

  // Lookup rows have norm ~1; scaling by sqrt(d) puts them on the same footing as
  // the unit-amplitude position encodings.
  const double embed_scale = std::sqrt(static_cast<double>(d));
  RowMatrix h(L, d);
  for (Eigen::Index p = 0; p < L; ++p) {
    const auto id = tokens.ids[static_cast<std::size_t>(p)];
    if (id >= table.vocab_size) throw ValidationError("token id outside vocabulary");
    h.row(p) = table.entries.row(id) * embed_scale;
    for (Eigen::Index i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(p) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      h(p, i) += std::sin(angle);
      if (i + 1 < d) h(p, i + 1) += std::cos(angle);
    }
  }

  const auto heads = static_cast<Eigen::Index>(cfg_.heads);
  const Eigen::Index dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const RowMatrix x = layer_norm(h);
    const RowMatrix q = x * b.wq;
    const RowMatrix k = x * b.wk;
    const RowMatrix v = x * b.wv;
    RowMatrix attended(L, d);
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      RowMatrix scores =
          (q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose()) * inv_sqrt_dh;
      softmax_rows(scores);
      if (observer) observer(l, static_cast<std::size_t>(hd), scores);
      attended.middleCols(hd * dh, dh) = scores * v.middleCols(hd * dh, dh);
    }
    h += attended * b.wo;

    const RowMatrix y = layer_norm(h);
    RowMatrix hidden = (y * b.ff1).rowwise() + b.ff1_bias;
    hidden = hidden.cwiseMax(0.0);
    h += (hidden * b.ff2).rowwise() + b.ff2_bias;
  }
  return h;
}

Eigen::RowVectorXd SyntheticTransformer::encode(const TokenSequence& tokens,
                                                const VocabTable& table,
                                                const AttentionObserver& observer) const {
  return forward(tokens, table, observer).colwise().mean();
}

EmbeddingMatrix embed_synthetic_transformer(const std::vector<std::string>& texts,
                                            const SyntheticTransformerConfig& cfg,
                                            const VocabTable& table,
                                            const AttentionObserver& observer) {
  if (table.width != cfg.model_dim) {
    throw DimensionMismatchError("vocab width " + std::to_string(table.width) +
                                 " != model_dim " + std::to_string(cfg.model_dim));
  }
  if (texts.empty()) throw EmptyInputError("embed_synthetic_transformer: no texts");
  const SyntheticTransformer model(cfg);
  RowMatrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(cfg.model_dim));
  for (std::size_t r = 0; r < texts.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = model.encode(tokenize(texts[r]), table, observer);
  }
  return EmbeddingMatrix(std::move(out),
                         {"synthetic_transformer",
                          sha256_hex(cfg.config_hash() + table.config_hash()).substr(0, 16)});
}

}  // namespace embedreg
