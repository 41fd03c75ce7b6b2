#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embedreg/embedding.hpp"
#include "embedreg/error.hpp"
#include "embedreg/metrics.hpp"

namespace embedreg {

inline constexpr std::size_t kHiddenWidth = 256;

/// Offsets of each tensor inside the flat parameter vector. Matrices are
/// column-major: w1 is hidden x input_dim, w2 hidden x hidden, w3 a hidden-wide row.
struct MlpLayout {
  std::size_t input_dim = 0;
  std::size_t hidden = kHiddenWidth;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return hidden * input_dim; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + hidden * hidden; }
  std::size_t w3() const { return b2() + hidden; }
  std::size_t b3() const { return w3() + hidden; }
  std::size_t size() const { return b3() + 1; }
};

/// input -> 256 -> ReLU -> 256 -> ReLU -> scalar. Only input_dim varies between embedders;
/// the hidden width is adjustable for tests.
class MlpModel {
 public:
  MlpModel(std::size_t input_dim, std::size_t hidden = kHiddenWidth);  // all zeros

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static MlpModel he_uniform(std::size_t input_dim, std::uint64_t seed,
                             std::size_t hidden = kHiddenWidth);

  const MlpLayout& layout() const { return layout_; }
  std::size_t input_dim() const { return layout_.input_dim; }
  std::size_t hidden() const { return layout_.hidden; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<const Eigen::MatrixXd> w1() const;
  Eigen::Map<const Eigen::VectorXd> b1() const;
  Eigen::Map<const Eigen::MatrixXd> w2() const;
  Eigen::Map<const Eigen::VectorXd> b2() const;
  Eigen::Map<const Eigen::RowVectorXd> w3() const;
  double b3() const { return params_[static_cast<Eigen::Index>(layout_.b3())]; }

 private:
  MlpLayout layout_;
  Eigen::VectorXd params_;
};

/// Normalized predictions, one per row.
Eigen::VectorXd forward(const MlpModel& model, const RowMatrix& features);
Eigen::VectorXd forward(const MlpModel& model, const EmbeddingMatrix& features);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // same layout as MlpModel::params()
};

/// Mean squared error and its gradient by reverse-mode accumulation.
/// The ReLU subgradient at 0 is taken as 0.
LossAndGrad loss_and_grad(const MlpModel& model, const RowMatrix& features,
                          std::span<const double> targets);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t size);
};

/// One AdamW update with decoupled weight decay and bias correction.
/// Throws TrainingDivergedError on a non-finite gradient.
void adamw_step(MlpModel& model, const Eigen::VectorXd& grad, double lr, double weight_decay,
                AdamState& state, const AdamHyper& hyper = {});

/// y -> (y - mu) / sigma with statistics from the training split.
struct YNormalizer {
  double mu = 0.0;
  double sigma = 1.0;

  /// Population standard deviation; sigma below 1e-12 is replaced by 1.
  static YNormalizer fit(std::span<const double> train_y);
  double normalize(double y) const { return (y - mu) / sigma; }
  double denormalize(double v) const { return v * sigma + mu; }
  std::vector<double> normalize(std::span<const double> ys) const;
};

struct TrainConfig {
  std::vector<double> learning_rates{1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
  std::vector<double> weight_decays{0.0, 1e-1, 1.0};
  std::size_t max_epochs = 300;
  std::size_t patience = 20;
  /// 0 selects full-batch when n <= 1024 and minibatches of 256 otherwise.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  std::size_t hidden = kHiddenWidth;
  /// Grid cells trained concurrently; results do not depend on this.
  std::size_t threads = 1;

  void validate() const;
};

struct SweepEntry {
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  double best_val_mse = 0.0;  // normalized-target MSE; +inf when diverged
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool diverged = false;
};

struct TrainResult {
  MlpModel model;
  YNormalizer normalizer;
  std::vector<SweepEntry> sweep;
  std::size_t chosen = 0;  // index into sweep

  const SweepEntry& chosen_entry() const { return sweep[chosen]; }
};

class TrainingFailedError : public Error {
 public:
  TrainingFailedError(const std::string& what, std::vector<SweepEntry> sweep)
      : Error(what), sweep_(std::move(sweep)) {}
  const std::vector<SweepEntry>& sweep() const { return sweep_; }

 private:
  std::vector<SweepEntry> sweep_;
};

/// Grid search over (learning rate, weight decay). Each cell trains from the same
/// seeded init with early stopping on validation MSE and keeps its best weights;
/// the cell with the lowest validation MSE wins (first in grid order on ties).
TrainResult train(const RowMatrix& train_x, std::span<const double> train_y,
                  const RowMatrix& val_x, std::span<const double> val_y, const TrainConfig& cfg);

/// Denormalized predictions.
std::vector<double> predict(const TrainResult& result, const RowMatrix& features);

struct RegressionReport {
  metrics::MetricBundle test;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  std::size_t epochs_run = 0;
  std::vector<SweepEntry> sweep;
};

RegressionReport make_report(const TrainResult& result, const RowMatrix& test_x,
                             std::span<const double> test_y);

// Versioned model file (JSON): dims, weights, normalizer, embedder provenance.
void save_model(const std::filesystem::path& path, const TrainResult& result,
                const Provenance& embedder);

struct LoadedModel {
  MlpModel model;
  YNormalizer normalizer;
  Provenance embedder;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace embedreg
