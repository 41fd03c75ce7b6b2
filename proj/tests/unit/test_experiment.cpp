#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "embedreg/csv.hpp"
#include "embedreg/error.hpp"
#include "embedreg/experiment.hpp"

using namespace embedreg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("embedreg_exp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json tiny(json extra = json::object()) {
  json j{{"functions", {"sphere"}},
         {"dofs", {2}},
         {"samples", 40},
         {"seeds", 2},
         {"train", {{"hidden", 8}, {"max_epochs", 15}, {"learning_rates", {1e-2}}, {"weight_decays", {0.0}}}}};
  j.update(extra);
  return j;
}

using Table = std::vector<std::map<std::string, std::string>>;

Table read_table(const fs::path& path) {
  const auto rows = csv::read_file(path);
  REQUIRE(!rows.empty());
  Table out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::map<std::string, std::string> m;
    for (std::size_t c = 0; c < rows[0].size(); ++c) m[rows[0][c]] = rows[r][c];
    out.push_back(std::move(m));
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = ExperimentConfig::from_json(tiny());
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.embedders.size() == 1);
  CHECK(cfg.build_tasks().size() == 1);

  const auto defaults = ExperimentConfig::from_json(json{{"functions", {"sphere", "rastrigin"}}});
  CHECK(defaults.seeds.size() == 12);
  CHECK(defaults.dofs == std::vector<std::size_t>{5, 10, 25, 50, 100});
  CHECK(defaults.build_tasks().size() == 10);

  CHECK_THROWS_AS(ExperimentConfig::from_json(tiny({{"bogus", 1}})), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(tiny({{"train", {{"lr", 1}}}})), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(tiny({{"samples", 3}})), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(
                      tiny({{"embedders", {{{"type", "traditional"}}, {{"type", "traditional"}}}}})),
                  ValidationError);
}

TEST_CASE("experiment hash") {
  const auto a = ExperimentConfig::from_json(tiny());
  auto b = ExperimentConfig::from_json(tiny({{"workers", 3}}));
  CHECK(experiment_hash("sweep-dof", a) == experiment_hash("sweep-dof", b));
  CHECK(experiment_hash("sweep-dof", a) != experiment_hash("compare", a));
  const auto c = ExperimentConfig::from_json(tiny({{"samples", 41}}));
  CHECK(experiment_hash("sweep-dof", a) != experiment_hash("sweep-dof", c));
}

TEST_CASE("sweep-dof outputs, resume and force") {
  const auto root = scratch("sweep");
  const auto cfg = ExperimentConfig::from_json(tiny({{"dofs", {2, 3}}}));
  RunOptions opts{root, false, nullptr};
  const auto first = run_dof_sweep(cfg, opts);
  CHECK(first.cells == 4);
  CHECK(first.executed == 4);
  CHECK(first.failed == 0);
  const auto summary = read_table(first.dir / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].at("dof") == "2");
  CHECK(summary[0].at("runs") == "2");
  CHECK(read_table(first.dir / "cells.csv").size() == 4);
  const std::string before = slurp(first.dir / "summary.csv");

  const auto second = run_dof_sweep(cfg, opts);
  CHECK(second.dir == first.dir);
  CHECK(second.executed == 0);
  CHECK(second.reused == 4);
  CHECK(slurp(second.dir / "summary.csv") == before);

  opts.force = true;
  const auto third = run_dof_sweep(cfg, opts);
  CHECK(third.executed == 4);
  CHECK(slurp(third.dir / "summary.csv") == before);

  const auto regen = regenerate_report(first.dir);
  CHECK(regen.cells == 4);
  CHECK(slurp(first.dir / "summary.csv") == before);
}

TEST_CASE("torn records are skipped on resume") {
  const auto root = scratch("torn");
  const auto cfg = ExperimentConfig::from_json(tiny());
  RunOptions opts{root, false, nullptr};
  const auto first = run_dof_sweep(cfg, opts);
  {
    std::ofstream app(first.dir / "records.jsonl", std::ios::app);
    app << "{\"key\": \"sph";
  }
  const auto again = run_dof_sweep(cfg, opts);
  CHECK(again.reused == 2);
  CHECK(again.executed == 0);
}

TEST_CASE("compare an embedder with itself") {
  const auto root = scratch("compare");
  const auto cfg = ExperimentConfig::from_json(tiny(
      {{"embedders", {{{"name", "a"}, {"type", "traditional"}}, {{"name", "b"}, {"type", "traditional"}}}}}));
  const auto s = run_comparison(cfg, {root, false, nullptr});
  CHECK(s.failed == 0);
  const auto out = read_table(s.dir / "outperformance.csv");
  REQUIRE(out.size() == 1);
  CHECK(out[0].at("outperform_pct") == "0");
  const auto means = read_table(s.dir / "mean_kendall.csv");
  CHECK(means.size() == 4);  // (sphere, all) x 2 embedders
  CHECK(means[0].at("mean") == means[1].at("mean"));
  CHECK_THROWS_AS(run_comparison(ExperimentConfig::from_json(tiny()), {root, false, nullptr}),
                  ValidationError);
}

TEST_CASE("nlfd-corr is antisymmetric under swapping embedders") {
  const auto root = scratch("nlfdcorr");
  const json trad{{"name", "trad"}, {"type", "traditional"}};
  const json scr{{"name", "scr"}, {"type", "hash_scramble"}};
  const json base = tiny({{"functions", {"sphere", "rastrigin", "ellipsoidal"}}, {"seeds", 1}});
  auto j1 = base, j2 = base;
  j1["embedders"] = {trad, scr};
  j2["embedders"] = {scr, trad};
  const auto a = read_table(run_nlfd_correlation(ExperimentConfig::from_json(j1), {root, false, nullptr}).dir /
                            "scatter.csv");
  const auto b = read_table(run_nlfd_correlation(ExperimentConfig::from_json(j2), {root, false, nullptr}).dir /
                            "scatter.csv");
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::stod(a[i].at("z")) == doctest::Approx(-std::stod(b[i].at("z"))));
    CHECK(std::stod(a[i].at("gap")) == doctest::Approx(-std::stod(b[i].at("gap"))));
  }
  auto two = j1;
  two["functions"] = {"sphere", "rastrigin"};
  CHECK_THROWS_AS(run_nlfd_correlation(ExperimentConfig::from_json(two), {root, false, nullptr}),
                  UndefinedMetricError);
}

TEST_CASE("scale-data truncates the training split") {
  const auto root = scratch("scale");
  const auto cfg = ExperimentConfig::from_json(tiny(
      {{"embedders", {{{"name", "a"}, {"type", "traditional"}}, {{"name", "b"}, {"type", "traditional"}}}},
       {"train_sizes", {10, 20}}}));
  const auto s = run_data_scaling(cfg, {root, false, nullptr});
  const auto gaps = read_table(s.dir / "gaps.csv");
  REQUIRE(gaps.size() == 2);
  CHECK(gaps[0].at("train_size") == "10");
  CHECK(gaps[0].at("pairs") == "2");
  CHECK(std::stod(gaps[0].at("gap_mean")) == 0.0);
  CHECK(std::stod(gaps[0].at("gap_sd")) == 0.0);
}

TEST_CASE("ablate with identical embedders gives zero deltas") {
  const auto root = scratch("ablate");
  const auto cfg = ExperimentConfig::from_json(tiny(
      {{"embedders", {{{"name", "a"}, {"type", "vocab_pool"}, {"width", 8}},
                      {{"name", "b"}, {"type", "vocab_pool"}, {"width", 8}}}}}));
  const auto s = run_ablation(cfg, {root, false, nullptr});
  const auto rows = read_table(s.dir / "ablation.csv");
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) CHECK(std::stod(r.at("delta_vs_first_embedder")) == 0.0);
  CHECK(std::stod(rows[0].at("delta_vs_first_format")) == 0.0);
}

TEST_CASE("gap bands") {
  const auto b = gap_bands({1.0, 3.0});
  CHECK(b.mean == 2.0);
  CHECK(b.sd == doctest::Approx(std::sqrt(2.0)));
  CHECK(b.n == 2);
  CHECK(gap_bands({0.5}).sd == 0.0);
}
