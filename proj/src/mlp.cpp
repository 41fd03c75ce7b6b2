#include "embedreg/mlp.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "embedreg/random.hpp"
#include "json.hpp"

namespace embedreg {
namespace {

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

struct Activations {
  Eigen::MatrixXd z1, a1, z2, a2;
  Eigen::VectorXd out;
};

Activations run_forward(const MlpModel& m, const RowMatrix& x) {
  if (static_cast<std::size_t>(x.cols()) != m.input_dim()) {
    throw DimensionMismatchError("mlp: features have " + std::to_string(x.cols()) +
                                 " columns, model expects " + std::to_string(m.input_dim()));
  }
  Activations a;
  a.z1 = (x * m.w1().transpose()).rowwise() + m.b1().transpose();
  a.a1 = a.z1.cwiseMax(0.0);
  a.z2 = (a.a1 * m.w2().transpose()).rowwise() + m.b2().transpose();
  a.a2 = a.z2.cwiseMax(0.0);
  a.out = (a.a2 * m.w3().transpose()).array() + m.b3();
  return a;
}

double val_mse(const MlpModel& m, const RowMatrix& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd pred = forward(m, x);
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

RowMatrix gather_rows(const RowMatrix& x, std::span<const std::size_t> rows) {
  RowMatrix out(idx(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(idx(i)) = x.row(idx(rows[i]));
  return out;
}

}  // namespace

MlpModel::MlpModel(std::size_t input_dim, std::size_t hidden)
    : layout_{input_dim, hidden}, params_(Eigen::VectorXd::Zero(idx(layout_.size()))) {
  if (input_dim == 0 || hidden == 0) throw ValidationError("mlp: dimensions must be positive");
}

MlpModel MlpModel::he_uniform(std::size_t input_dim, std::uint64_t seed, std::size_t hidden) {
  MlpModel m(input_dim, hidden);
  Rng rng(derive_seed(seed, "mlp_init"));
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) m.params_[idx(offset + i)] = rng.uniform(-bound, bound);
  };
  const auto& l = m.layout_;
  fill(l.w1(), hidden * input_dim, input_dim);
  fill(l.w2(), hidden * hidden, hidden);
  fill(l.w3(), hidden, hidden);
  return m;
}

Eigen::Map<const Eigen::MatrixXd> MlpModel::w1() const {
  return {params_.data() + layout_.w1(), idx(layout_.hidden), idx(layout_.input_dim)};
}
Eigen::Map<const Eigen::VectorXd> MlpModel::b1() const {
  return {params_.data() + layout_.b1(), idx(layout_.hidden)};
}
Eigen::Map<const Eigen::MatrixXd> MlpModel::w2() const {
  return {params_.data() + layout_.w2(), idx(layout_.hidden), idx(layout_.hidden)};
}
Eigen::Map<const Eigen::VectorXd> MlpModel::b2() const {
  return {params_.data() + layout_.b2(), idx(layout_.hidden)};
}
Eigen::Map<const Eigen::RowVectorXd> MlpModel::w3() const {
  return {params_.data() + layout_.w3(), idx(layout_.hidden)};
}

Eigen::VectorXd forward(const MlpModel& model, const RowMatrix& features) {
  return run_forward(model, features).out;
}

Eigen::VectorXd forward(const MlpModel& model, const EmbeddingMatrix& features) {
  return forward(model, features.values());
}

LossAndGrad loss_and_grad(const MlpModel& model, const RowMatrix& features,
                          std::span<const double> targets) {
  if (static_cast<std::size_t>(features.rows()) != targets.size()) {
    throw DimensionMismatchError("mlp: " + std::to_string(features.rows()) + " rows but " +
                                 std::to_string(targets.size()) + " targets");
  }
  if (targets.empty()) throw EmptyInputError("mlp: no rows");
  const Activations a = run_forward(model, features);
  const auto n = static_cast<double>(targets.size());
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), idx(targets.size()));
  const Eigen::VectorXd residual = a.out - y;

  LossAndGrad out;
  out.loss = residual.squaredNorm() / n;
  out.grad.resize(model.params().size());
  const auto& l = model.layout();
  const Index h = idx(l.hidden);
  const Index d = idx(l.input_dim);

  const Eigen::VectorXd dout = residual * (2.0 / n);
  out.grad.segment(idx(l.w3()), h) = (dout.transpose() * a.a2).transpose();
  out.grad[idx(l.b3())] = dout.sum();

  Eigen::MatrixXd dz2 = dout * model.w3();
  dz2.array() *= (a.z2.array() > 0.0).cast<double>();
  Eigen::Map<Eigen::MatrixXd>(out.grad.data() + l.w2(), h, h) = dz2.transpose() * a.a1;
  out.grad.segment(idx(l.b2()), h) = dz2.colwise().sum().transpose();

  Eigen::MatrixXd dz1 = dz2 * model.w2();
  dz1.array() *= (a.z1.array() > 0.0).cast<double>();
  Eigen::Map<Eigen::MatrixXd>(out.grad.data() + l.w1(), h, d) = dz1.transpose() * features;
  out.grad.segment(idx(l.b1()), h) = dz1.colwise().sum().transpose();
  return out;
}

AdamState AdamState::zeros(std::size_t size) {
  return {Eigen::VectorXd::Zero(idx(size)), Eigen::VectorXd::Zero(idx(size)), 0};
}

void adamw_step(MlpModel& model, const Eigen::VectorXd& grad, double lr, double weight_decay,
                AdamState& state, const AdamHyper& hyper) {
  auto& theta = model.params();
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw DimensionMismatchError("adamw: gradient/state size does not match the model");
  }
  if (!grad.allFinite()) throw TrainingDivergedError("adamw: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  theta *= (1.0 - lr * weight_decay);
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad.cwiseAbs2();
  theta.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + hyper.eps);
}

YNormalizer YNormalizer::fit(std::span<const double> train_y) {
  if (train_y.size() < 2) throw ValidationError("y-normalizer needs at least 2 values");
  const double n = static_cast<double>(train_y.size());
  const double mu = std::accumulate(train_y.begin(), train_y.end(), 0.0) / n;
  double ss = 0.0;
  for (double y : train_y) ss += (y - mu) * (y - mu);
  double sigma = std::sqrt(ss / n);
  if (!(sigma >= 1e-12)) sigma = 1.0;
  return {mu, sigma};
}

std::vector<double> YNormalizer::normalize(std::span<const double> ys) const {
  std::vector<double> out;
  out.reserve(ys.size());
  for (double y : ys) out.push_back(normalize(y));
  return out;
}

void TrainConfig::validate() const {
  if (learning_rates.empty() || weight_decays.empty()) {
    throw ValidationError("train: hyperparameter grids must be non-empty");
  }
  if (max_epochs == 0) throw ValidationError("train: max_epochs must be positive");
  if (patience == 0) throw ValidationError("train: patience must be positive");
  if (hidden == 0) throw ValidationError("train: hidden width must be positive");
}

namespace {

struct CellOutcome {
  SweepEntry entry;
  Eigen::VectorXd best_params;
};

CellOutcome train_cell(const RowMatrix& train_x, const std::vector<double>& train_t,
                       const RowMatrix& val_x, const Eigen::VectorXd& val_t, double lr, double wd,
                       const TrainConfig& cfg) {
  CellOutcome out;
  out.entry.learning_rate = lr;
  out.entry.weight_decay = wd;
  MlpModel model = MlpModel::he_uniform(static_cast<std::size_t>(train_x.cols()), cfg.seed, cfg.hidden);
  AdamState state = AdamState::zeros(model.layout().size());

  const std::size_t n = train_t.size();
  const std::size_t batch = cfg.batch_size != 0 ? cfg.batch_size : (n <= 1024 ? n : 256);
  const bool full_batch = batch >= n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, "minibatch_order"));

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  out.best_params = model.params();
  try {
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      if (full_batch) {
        const auto lg = loss_and_grad(model, train_x, train_t);
        adamw_step(model, lg.grad, lr, wd, state);
      } else {
        shuffle(order, shuffle_rng);
        for (std::size_t start = 0; start < n; start += batch) {
          const std::size_t stop = std::min(n, start + batch);
          std::span<const std::size_t> rows(order.data() + start, stop - start);
          std::vector<double> targets;
          targets.reserve(rows.size());
          for (auto r : rows) targets.push_back(train_t[r]);
          const auto lg = loss_and_grad(model, gather_rows(train_x, rows), targets);
          adamw_step(model, lg.grad, lr, wd, state);
        }
      }
      out.entry.epochs_run = epoch;
      const double v = val_mse(model, val_x, val_t);
      if (!std::isfinite(v)) throw TrainingDivergedError("validation loss is not finite");
      if (v < best) {
        best = v;
        since_best = 0;
        out.entry.best_epoch = epoch;
        out.best_params = model.params();
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
    out.entry.best_val_mse = best;
  } catch (const TrainingDivergedError&) {
    out.entry.diverged = true;
    out.entry.best_val_mse = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

TrainResult train(const RowMatrix& train_x, std::span<const double> train_y,
                  const RowMatrix& val_x, std::span<const double> val_y, const TrainConfig& cfg) {
  cfg.validate();
  if (train_y.empty() || val_y.empty()) throw EmptyInputError("train: empty train or validation split");
  if (static_cast<std::size_t>(train_x.rows()) != train_y.size() ||
      static_cast<std::size_t>(val_x.rows()) != val_y.size()) {
    throw DimensionMismatchError("train: row counts do not match targets");
  }
  if (train_x.cols() != val_x.cols() || train_x.cols() == 0) {
    throw DimensionMismatchError("train: train and validation feature widths differ");
  }

  const YNormalizer norm = YNormalizer::fit(train_y);
  const std::vector<double> train_t = norm.normalize(train_y);
  const std::vector<double> val_norm = norm.normalize(val_y);
  const Eigen::VectorXd val_t = Eigen::Map<const Eigen::VectorXd>(val_norm.data(), idx(val_norm.size()));

  std::vector<std::pair<double, double>> grid;
  for (double lr : cfg.learning_rates) {
    for (double wd : cfg.weight_decays) grid.emplace_back(lr, wd);
  }
  std::vector<CellOutcome> outcomes(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      outcomes[i] = train_cell(train_x, train_t, val_x, val_t, grid[i].first, grid[i].second, cfg);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.threads, grid.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<SweepEntry> sweep;
  sweep.reserve(outcomes.size());
  std::size_t chosen = outcomes.size();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    sweep.push_back(outcomes[i].entry);
    if (outcomes[i].entry.diverged) continue;
    if (chosen == outcomes.size() || outcomes[i].entry.best_val_mse < sweep[chosen].best_val_mse) {
      chosen = i;
    }
  }
  if (chosen == outcomes.size()) throw TrainingFailedError("train: every grid cell diverged", sweep);

  MlpModel model(static_cast<std::size_t>(train_x.cols()), cfg.hidden);
  model.params() = std::move(outcomes[chosen].best_params);
  return TrainResult{std::move(model), norm, std::move(sweep), chosen};
}

std::vector<double> predict(const TrainResult& result, const RowMatrix& features) {
  const Eigen::VectorXd raw = forward(result.model, features);
  std::vector<double> out(static_cast<std::size_t>(raw.size()));
  for (Index i = 0; i < raw.size(); ++i) {
    out[static_cast<std::size_t>(i)] = result.normalizer.denormalize(raw[i]);
  }
  return out;
}

RegressionReport make_report(const TrainResult& result, const RowMatrix& test_x,
                             std::span<const double> test_y) {
  const auto yhat = predict(result, test_x);
  RegressionReport r;
  r.test = metrics::compute_all(test_y, yhat);
  r.learning_rate = result.chosen_entry().learning_rate;
  r.weight_decay = result.chosen_entry().weight_decay;
  r.epochs_run = result.chosen_entry().epochs_run;
  r.sweep = result.sweep;
  return r;
}

namespace {
constexpr const char* kModelFormat = "embedreg.mlp";
constexpr int kModelVersion = 1;
}  // namespace

void save_model(const std::filesystem::path& path, const TrainResult& result,
                const Provenance& embedder) {
  const auto& p = result.model.params();
  nlohmann::json j{
      {"format", kModelFormat},
      {"version", kModelVersion},
      {"input_dim", result.model.input_dim()},
      {"hidden", result.model.hidden()},
      {"normalizer", {{"mu", result.normalizer.mu}, {"sigma", result.normalizer.sigma}}},
      {"embedder", {{"backend", embedder.backend}, {"config_hash", embedder.config_hash}}},
      {"learning_rate", result.chosen_entry().learning_rate},
      {"weight_decay", result.chosen_entry().weight_decay},
      {"params", std::vector<double>(p.data(), p.data() + p.size())}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path.string());
  out << j.dump() << '\n';
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("format").get<std::string>() != kModelFormat) throw ValidationError("not a model file");
    if (j.at("version").get<int>() != kModelVersion) {
      throw ValidationError("unsupported model file version " + j["version"].dump());
    }
    MlpModel model(j.at("input_dim").get<std::size_t>(), j.at("hidden").get<std::size_t>());
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != model.layout().size()) throw ValidationError("model parameter count mismatch");
    model.params() = Eigen::Map<const Eigen::VectorXd>(params.data(), idx(params.size()));
    if (!model.params().allFinite()) throw ValidationError("model parameters are not finite");
    YNormalizer norm{j.at("normalizer").at("mu").get<double>(),
                     j.at("normalizer").at("sigma").get<double>()};
    Provenance prov{j.at("embedder").at("backend").get<std::string>(),
                    j.at("embedder").at("config_hash").get<std::string>()};
    return {std::move(model), norm, std::move(prov)};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path.string() + ": " + e.what());
  }
}

}  // namespace embedreg
