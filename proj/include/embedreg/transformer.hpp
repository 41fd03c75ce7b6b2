#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "embedreg/embedding.hpp"

namespace embedreg {

struct SyntheticTransformerConfig {
  std::size_t layers = 2;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  std::uint64_t seed = 0;

  void validate() const;
  std::string config_hash() const;
};

/// Called once per (layer, head) with the L x L attention weights.
using AttentionObserver =
    std::function<void(std::size_t layer, std::size_t head, const RowMatrix& weights)>;

/// Randomly initialized pre-LN encoder. Weights are a pure function of the config seed
/// and are never trained.
class SyntheticTransformer {
 public:
  explicit SyntheticTransformer(const SyntheticTransformerConfig& cfg);

  const SyntheticTransformerConfig& config() const { return cfg_; }

  /// L x model_dim hidden states after the last block.
  RowMatrix forward(const TokenSequence& tokens, const VocabTable& table,
                    const AttentionObserver& observer = {}) const;

  /// Mean over positions of forward().
  Eigen::RowVectorXd encode(const TokenSequence& tokens, const VocabTable& table,
                            const AttentionObserver& observer = {}) const;

 private:
  struct Block {
    Eigen::MatrixXd wq, wk, wv, wo;  // model_dim x model_dim, applied as H * W
    Eigen::MatrixXd ff1;             // model_dim x ff_dim
    Eigen::RowVectorXd ff1_bias;
    Eigen::MatrixXd ff2;             // ff_dim x model_dim
    Eigen::RowVectorXd ff2_bias;
  };

  SyntheticTransformerConfig cfg_;
  std::vector<Block> blocks_;
};

/// Tokenize, look up, run the encoder, mean-pool. Throws DimensionMismatchError when
/// table.width != cfg.model_dim.
EmbeddingMatrix embed_synthetic_transformer(const std::vector<std::string>& texts,
                                            const SyntheticTransformerConfig& cfg,
                                            const VocabTable& table,
                                            const AttentionObserver& observer = {});

}  // namespace embedreg
