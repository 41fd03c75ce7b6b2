#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "embedreg/error.hpp"
#include "embedreg/mlp.hpp"
#include "embedreg/random.hpp"
#include "oracles.hpp"

using namespace embedreg;

namespace {

std::vector<double> as_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("y normalizer") {
  const auto n = YNormalizer::fit(std::vector<double>{1.0, 3.0});
  CHECK(n.mu == 2.0);
  CHECK(n.sigma == 1.0);
  const auto c = YNormalizer::fit(std::vector<double>{5.0, 5.0, 5.0});
  CHECK(c.mu == 5.0);
  CHECK(c.sigma == 1.0);
  const auto w = YNormalizer::fit(std::vector<double>{-3.5, 10.0, 2.25, 7.0});
  for (double y : {-3.5, 0.0, 123.456}) CHECK(w.denormalize(w.normalize(y)) == doctest::Approx(y).epsilon(1e-12));
  CHECK_THROWS_AS(YNormalizer::fit(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("forward basics") {
  MlpModel zero(4, 16);
  RowMatrix x = RowMatrix::Random(5, 4);
  CHECK(forward(zero, x).isZero());
  const auto m = MlpModel::he_uniform(4, 3, 16);
  const Eigen::VectorXd all = forward(m, x);
  for (Eigen::Index r = 0; r < 5; ++r) {
    const RowMatrix one = x.row(r);
    CHECK(forward(m, one)[0] == doctest::Approx(all[r]).epsilon(1e-14));
  }
  CHECK(all.allFinite());
  CHECK_THROWS_AS(forward(m, RowMatrix::Zero(2, 3)), DimensionMismatchError);
}

TEST_CASE("loss and gradient properties") {
  const auto m = MlpModel::he_uniform(4, 1, 16);
  RowMatrix x = RowMatrix::Random(8, 4);
  const Eigen::VectorXd pred = forward(m, x);
  std::vector<double> perfect(pred.data(), pred.data() + pred.size());
  const auto lg = loss_and_grad(m, x, perfect);
  CHECK(lg.loss == doctest::Approx(0.0));
  CHECK(lg.grad.segment(static_cast<Eigen::Index>(m.layout().w3()), 17).isZero(1e-15));

  std::vector<double> off1 = perfect, off2 = perfect;
  for (std::size_t i = 0; i < off1.size(); ++i) {
    off1[i] += 0.5 * (i % 2 ? 1 : -1);
    off2[i] += 1.0 * (i % 2 ? 1 : -1);
  }
  CHECK(loss_and_grad(m, x, off2).loss == doctest::Approx(4.0 * loss_and_grad(m, x, off1).loss));
}

TEST_CASE("analytic gradient matches finite differences on a dim-8, 16-row instance") {
  const auto inst = testing::make_grad_instance(8, 12, 16, 5);
  const auto lg = loss_and_grad(inst.model, inst.features, inst.y);
  const auto theta = as_vector(inst.model.params());
  CHECK(lg.loss == doctest::Approx(testing::naive_loss(theta, 8, 12, inst.x, inst.y).loss).epsilon(1e-12));
  std::vector<std::size_t> all(theta.size());
  std::iota(all.begin(), all.end(), 0);
  const auto g = testing::check_gradient(theta, as_vector(lg.grad), 8, 12, inst.x, inst.y, all);
  CHECK(g.checked + g.skipped_kinks == theta.size());
  CHECK(g.checked > theta.size() * 9 / 10);
  CHECK(g.worst_rel_err < 1e-4);
}

TEST_CASE("adamw step") {
  MlpModel m = MlpModel::he_uniform(3, 2, 8);
  const Eigen::VectorXd before = m.params();
  auto state = AdamState::zeros(m.layout().size());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(before.size());
  adamw_step(m, zero, 1e-2, 0.0, state);
  CHECK(m.params() == before);
  CHECK(state.step == 1);
  adamw_step(m, zero, 1e-2, 0.1, state);
  CHECK(m.params().isApprox(before * (1.0 - 1e-2 * 0.1), 1e-15));
  CHECK(state.step == 2);

  // First step moves every coordinate with a non-zero gradient by about lr against its sign.
  MlpModel fresh = MlpModel::he_uniform(3, 2, 8);
  auto s2 = AdamState::zeros(fresh.layout().size());
  Eigen::VectorXd g = Eigen::VectorXd::Constant(before.size(), 0.3);
  const Eigen::VectorXd p0 = fresh.params();
  adamw_step(fresh, g, 1e-3, 0.0, s2);
  CHECK(((p0 - fresh.params()).array() - 1e-3).abs().maxCoeff() < 1e-8);

  g[0] = std::nan("");
  CHECK_THROWS_AS(adamw_step(fresh, g, 1e-3, 0.0, s2), TrainingDivergedError);
}

TEST_CASE("training on a linear target") {
  Rng rng(21);
  auto make = [&](std::size_t n, RowMatrix& x, std::vector<double>& y) {
    x.resize(static_cast<Eigen::Index>(n), 4);
    y.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < 4; ++c) x(static_cast<Eigen::Index>(r), c) = rng.uniform();
      y[r] = x(static_cast<Eigen::Index>(r), 0);
    }
  };
  RowMatrix xtr, xva, xte;
  std::vector<double> ytr, yva, yte;
  make(400, xtr, ytr);
  make(50, xva, yva);
  make(50, xte, yte);
  TrainConfig cfg;
  cfg.seed = 4;
  cfg.hidden = 64;
  const auto result = train(xtr, ytr, xva, yva, cfg);
  CHECK(result.sweep.size() == 15);
  const auto report = make_report(result, xte, yte);
  CHECK(report.test.kendall_tau >= 0.95);

  const auto again = train(xtr, ytr, xva, yva, cfg);
  CHECK(again.chosen == result.chosen);
  CHECK(make_report(again, xte, yte).test.kendall_tau == report.test.kendall_tau);

  const auto path = std::filesystem::temp_directory_path() / "embedreg_model_test.json";
  save_model(path, result, {"traditional", "abc"});
  const auto loaded = load_model(path);
  CHECK(loaded.model.params() == result.model.params());
  CHECK(loaded.normalizer.mu == result.normalizer.mu);
  CHECK(loaded.embedder.config_hash == "abc");
}

TEST_CASE("divergent cells are recorded and skipped") {
  RowMatrix x = RowMatrix::Random(40, 3);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = x(static_cast<Eigen::Index>(i), 1);
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.max_epochs = 30;
  cfg.learning_rates = {1e300, 1e-3};
  cfg.weight_decays = {0.0};
  const auto r = train(x.topRows(30), std::vector<double>(y.begin(), y.begin() + 30), x.bottomRows(10),
                       std::vector<double>(y.begin() + 30, y.end()), cfg);
  CHECK(r.sweep[0].diverged);
  CHECK(r.chosen == 1);

  cfg.learning_rates = {1e300};
  CHECK_THROWS_AS(train(x.topRows(30), std::vector<double>(y.begin(), y.begin() + 30), x.bottomRows(10),
                        std::vector<double>(y.begin() + 30, y.end()), cfg),
                  TrainingFailedError);
}

TEST_CASE("threaded sweep equals sequential sweep") {
  RowMatrix x = RowMatrix::Random(60, 5);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) y[i] = x.row(static_cast<Eigen::Index>(i)).squaredNorm();
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.max_epochs = 20;
  const std::vector<double> ytr(y.begin(), y.begin() + 48), yva(y.begin() + 48, y.end());
  const auto a = train(x.topRows(48), ytr, x.bottomRows(12), yva, cfg);
  cfg.threads = 3;
  const auto b = train(x.topRows(48), ytr, x.bottomRows(12), yva, cfg);
  CHECK(a.chosen == b.chosen);
  CHECK(a.model.params() == b.model.params());
}
