#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "embedreg/csv.hpp"
#include "embedreg/error.hpp"
#include "embedreg/task.hpp"

using namespace embedreg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("embedreg_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RegressionTask mixed_task(const fs::path& data = "data.csv") {
  return RegressionTask("mixed",
                        {ParamSpec::continuous("lr", 0.0, 1.0),
                         ParamSpec::continuous("layers", 1.0, 8.0, true),
                         ParamSpec::categorical("act", {"relu", "selu"})},
                        OfflineSource{data});
}

}  // namespace

TEST_CASE("csv line parsing handles quotes") {
  const auto row = csv::parse_line(R"(a,"b,c","d""e",)");
  REQUIRE(row.size() == 4);
  CHECK(row[1] == "b,c");
  CHECK(row[2] == "d\"e");
  CHECK(row[3].empty());
  CHECK(csv::parse_line(csv::join({"x,y", "plain", "q\""})) == csv::Row{"x,y", "plain", "q\""});
}

TEST_CASE("task invariants") {
  CHECK_THROWS_AS(RegressionTask("t", {ParamSpec::continuous("a", 1.0, 0.0)}, OfflineSource{"d"}),
                  ValidationError);
  CHECK_THROWS_AS(RegressionTask("t", {ParamSpec::continuous("a", 0.0, 1.0),
                                       ParamSpec::continuous("a", 0.0, 1.0)},
                                 OfflineSource{"d"}),
                  ValidationError);
  CHECK_THROWS_AS(RegressionTask("t", {ParamSpec::continuous("y", 0.0, 1.0)}, OfflineSource{"d"}),
                  ValidationError);
  CHECK_THROWS(make_bbob_task("sphere", 0));
  const auto t = make_bbob_task("rastrigin", 3);
  CHECK(t.id() == "rastrigin_dof3");
  CHECK(t.dof() == 3);
  CHECK(t.params()[2].name == "x2");
  CHECK(t.is_synthetic());
}

TEST_CASE("sample_uniform on sphere") {
  const auto task = make_bbob_task("sphere", 2);
  const auto ds = sample_uniform(task, 3, 7);
  REQUIRE(ds.size() == 3);
  for (const auto& ex : ds.examples) {
    const double a = std::get<double>(ex.x[0]);
    const double b = std::get<double>(ex.x[1]);
    CHECK(a >= -5.0);
    CHECK(a <= 5.0);
    CHECK(b >= -5.0);
    CHECK(b <= 5.0);
    CHECK(ex.y == doctest::Approx(a * a + b * b).epsilon(1e-15));
  }
}

TEST_CASE("sample_uniform is deterministic") {
  const auto task = make_bbob_task("sphere", 5);
  const auto a = sample_uniform(task, 500, 0);
  const auto b = sample_uniform(task, 500, 0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.examples[i].x == b.examples[i].x);
    CHECK(a.examples[i].y == b.examples[i].y);
  }
  const auto c = sample_uniform(task, 500, 1);
  CHECK(c.examples[0].x != a.examples[0].x);
}

TEST_CASE("sample_uniform coordinate means are near zero") {
  const auto task = make_bbob_task("rastrigin", 10);
  const auto ds = sample_uniform(task, 500, 1);
  for (std::size_t k = 0; k < 10; ++k) {
    double s = 0.0;
    for (const auto& ex : ds.examples) s += std::get<double>(ex.x[k]);
    CHECK(std::abs(s / 500.0) < 0.5);
  }
}

TEST_CASE("sample_uniform rejects offline tasks") {
  CHECK_THROWS_AS(sample_uniform(mixed_task(), 10, 0), UnsupportedSourceError);
}

TEST_CASE("split sizes and determinism") {
  const auto task = make_bbob_task("sphere", 2);
  const auto ds = sample_uniform(task, 500, 0);
  const auto parts = split_dataset(ds, kDefaultSplit, 3);
  CHECK(parts[0].size() == 400);
  CHECK(parts[1].size() == 50);
  CHECK(parts[2].size() == 50);
  CHECK(parts[0].split == Split::train);
  CHECK(parts[2].split == Split::test);
  const auto again = split_dataset(ds, kDefaultSplit, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < parts[k].size(); ++i) {
      CHECK(parts[k].examples[i].x == again[k].examples[i].x);
    }
  }
  const auto small = split_dataset(sample_uniform(task, 10, 0), kDefaultSplit, 0);
  CHECK(small[0].size() == 8);
  CHECK(small[1].size() == 1);
  CHECK(small[2].size() == 1);
  CHECK_THROWS_AS(split_dataset(sample_uniform(task, 9, 0), kDefaultSplit, 0), TooFewExamplesError);
}

TEST_CASE("split is a partition") {
  const auto task = make_bbob_task("sphere", 3);
  const auto ds = sample_uniform(task, 123, 4);
  const auto parts = split_dataset(ds, kDefaultSplit, 9);
  std::vector<double> all, seen;
  for (const auto& ex : ds.examples) all.push_back(ex.y);
  for (const auto& p : parts) {
    for (const auto& ex : p.examples) seen.push_back(ex.y);
  }
  std::sort(all.begin(), all.end());
  std::sort(seen.begin(), seen.end());
  CHECK(all == seen);
}

TEST_CASE("offline ingestion") {
  const auto dir = temp_dir("ingest");
  const auto task = mixed_task(dir / "data.csv");

  SUBCASE("well-formed file") {
    std::ofstream out(dir / "data.csv");
    out << "lr,layers,act,y\n";
    for (int i = 0; i < 100; ++i) out << (i / 100.0) << ',' << (1 + i % 8) << ',' << (i % 2 ? "relu" : "selu") << ',' << i << '\n';
    out.close();
    const auto ds = ingest_offline(dir / "data.csv", task);
    CHECK(ds.size() == 100);
    CHECK(std::get<std::string>(ds.examples[1].x[2]) == "relu");
    CHECK(ds.examples[99].y == 99.0);
  }

  SUBCASE("columns may come in any order") {
    std::ofstream out(dir / "data.csv");
    out << "act,lr,layers,y\nselu,0.5,2,1.5\n";
    out.close();
    const auto ds = ingest_offline(dir / "data.csv", task);
    CHECK(std::get<double>(ds.examples[0].x[0]) == 0.5);
  }

  SUBCASE("NaN target names its row") {
    std::ofstream out(dir / "data.csv");
    out << "lr,layers,act,y\n";
    for (int i = 1; i <= 10; ++i) out << "0.5,2,relu," << (i == 7 ? "NaN" : "1.0") << '\n';
    out.close();
    try {
      ingest_offline(dir / "data.csv", task);
      FAIL("expected RowValidationError");
    } catch (const RowValidationError& e) {
      CHECK(e.row() == 7);
      CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
  }

  SUBCASE("unknown column is a schema error") {
    std::ofstream out(dir / "data.csv");
    out << "lr,layers,act,extra,y\n0.5,2,relu,1,1.0\n";
    out.close();
    try {
      ingest_offline(dir / "data.csv", task);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.offending() == std::vector<std::string>{"extra"});
    }
  }

  SUBCASE("out-of-range values are rejected, not clamped") {
    std::ofstream out(dir / "data.csv");
    out << "lr,layers,act,y\n1.5,2,relu,1.0\n";
    out.close();
    CHECK_THROWS_AS(ingest_offline(dir / "data.csv", task), RowValidationError);
  }

  SUBCASE("unknown category and non-integer integer param") {
    std::ofstream out(dir / "data.csv");
    out << "lr,layers,act,y\n0.5,2,gelu,1.0\n";
    out.close();
    CHECK_THROWS_AS(ingest_offline(dir / "data.csv", task), RowValidationError);
    std::ofstream out2(dir / "data.csv");
    out2 << "lr,layers,act,y\n0.5,2.5,relu,1.0\n";
    out2.close();
    CHECK_THROWS_AS(ingest_offline(dir / "data.csv", task), RowValidationError);
  }
}

TEST_CASE("dataset csv round trip") {
  const auto dir = temp_dir("roundtrip");
  const auto task = make_bbob_task("rosenbrock", 3);
  const auto ds = sample_uniform(task, 20, 5);
  write_dataset_csv(dir / "rt.csv", task, ds);
  const auto back = ingest_offline(dir / "rt.csv", task);
  REQUIRE(back.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(back.examples[i].x == ds.examples[i].x);
    CHECK(back.examples[i].y == ds.examples[i].y);
  }
}

TEST_CASE("task spec json round trip") {
  const auto task = mixed_task();
  const auto back = task_from_json(task_to_json(task));
  CHECK(back.id() == task.id());
  REQUIRE(back.dof() == 3);
  CHECK(back.params()[1].range().integer);
  CHECK(back.params()[2].categories().choices == std::vector<std::string>{"relu", "selu"});
  const auto syn = task_from_json(nlohmann::json::parse(
      R"({"source": {"type": "synthetic", "function": "sphere", "dof": 4}})"));
  CHECK(syn.id() == "sphere_dof4");
  CHECK(syn.dof() == 4);
}
