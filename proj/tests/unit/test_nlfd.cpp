#include <cmath>
#include <limits>

#include "doctest.h"
#include "embedreg/embedder.hpp"
#include "embedreg/error.hpp"
#include "embedreg/nlfd.hpp"
#include "embedreg/random.hpp"

using namespace embedreg;

namespace {

const Provenance kProv{"test", "0"};

EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix m(n, d);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
  return {m, kProv};
}

std::vector<double> random_targets(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y(n);
  for (auto& v : y) v = rng.uniform() * 10.0;
  return y;
}

// Independent nearest-neighbour search on already-normalized rows.
std::vector<double> brute_factors(const RowMatrix& x, const std::vector<double>& y) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      if (s < best) {
        best = s;
        arg = j;
      }
    }
    out.push_back(std::abs(y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(arg)]) /
                  std::sqrt(best) * std::sqrt(static_cast<double>(x.cols())));
  }
  return out;
}

}  // namespace

TEST_CASE("normalization") {
  RowMatrix m(4, 3);
  m << 1, 5, 2, 2, 5, 4, 3, 5, 6, 4, 5, 8;
  const auto n = normalize_embeddings({m, kProv});
  const RowMatrix& v = n.values();
  for (Eigen::Index c : {0, 2}) {
    CHECK(v.col(c).mean() == doctest::Approx(0.0));
    CHECK(v.col(c).squaredNorm() / 4.0 == doctest::Approx(1.0));
  }
  CHECK(v.col(1).isZero());
  CHECK_THROWS_AS(normalize_embeddings({RowMatrix::Ones(1, 3), kProv}), ValidationError);
}

TEST_CASE("factor of a single pair") {
  RowMatrix m(2, 4);
  m << 0, 0, 0, 0, 1, 1, 1, 1;
  const std::vector<double> y{1.0, 5.0};
  const auto s = lipschitz_factors({m, kProv}, y);
  // distance 2, |dy| 4, width 4
  REQUIRE(s.size() == 2);
  CHECK(s.factors[0] == doctest::Approx(4.0 / 2.0 * 2.0));
  CHECK(s.mu == doctest::Approx(4.0));
  CHECK(s.sigma == 0.0);
}

TEST_CASE("factors match a brute-force search") {
  const auto raw = random_matrix(60, 7, 3);
  const auto y = random_targets(60, 4);
  const auto norm = normalize_embeddings(raw);
  const auto s = compute_nlfd(raw, y);
  const auto expected = brute_factors(norm.values(), y);
  REQUIRE(s.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(s.factors[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("duplicates and constant targets") {
  RowMatrix m(4, 2);
  m << 0, 0, 0, 0, 1, 2, 3, 1;
  const auto s = compute_nlfd({m, kProv}, std::vector<double>{1, 2, 3, 4});
  CHECK(s.excluded_pairs == 2);
  CHECK(s.size() == 2);

  const auto c = compute_nlfd(random_matrix(20, 3, 1), std::vector<double>(20, 7.0));
  for (double f : c.factors) CHECK(f == 0.0);

  RowMatrix same = RowMatrix::Ones(3, 2);
  CHECK_THROWS_AS(compute_nlfd({same, kProv}, std::vector<double>{1, 2, 3}), EmptyInputError);
  CHECK_THROWS_AS(compute_nlfd({same, kProv}, std::vector<double>{1, 2}), DimensionMismatchError);
}

TEST_CASE("z-score") {
  const auto s = compute_nlfd(random_matrix(50, 4, 8), random_targets(50, 9));
  CHECK(nlfd_zscore(s, s).z == 0.0);
  const NlfdSummary a{2.0, 1.0, 10}, b{1.0, 1.0, 10};
  CHECK(nlfd_zscore(a, b).z == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(nlfd_zscore(b, a).z == -nlfd_zscore(a, b).z);
  CHECK_THROWS_AS(nlfd_zscore(NlfdSummary{1, 0, 3}, NlfdSummary{2, 0, 3}), UndefinedMetricError);
  CHECK_THROWS_AS(nlfd_zscore(NlfdSummary{1, 1, 0}, b), EmptyInputError);
}

TEST_CASE("scale and duplication invariance") {
  const auto raw = random_matrix(80, 5, 21);
  const auto y = random_targets(80, 22);
  const auto base = compute_nlfd(raw, y);

  const auto scaled = compute_nlfd({raw.values() * 1000.0, kProv}, y);
  REQUIRE(scaled.size() == base.size());
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(scaled.factors[i] - base.factors[i]) <= 1e-9);

  RowMatrix dup(80, 20);
  dup << raw.values(), raw.values(), raw.values(), raw.values();
  const auto quad = compute_nlfd({dup, kProv}, y);
  CHECK(quad.factors == base.factors);

  RowMatrix two(80, 10);
  two << raw.values(), raw.values();
  const auto doubled = compute_nlfd({two, kProv}, y);
  REQUIRE(doubled.size() == base.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(doubled.factors[i] == doctest::Approx(base.factors[i]).epsilon(1e-12));
}

TEST_CASE("histogram") {
  NlfdSample s;
  s.factors = {0.0, 1.0, 2.0, 3.0, 4.0};
  const auto h = histogram(s, 4);
  REQUIRE(h.size() == 4);
  CHECK(h[0].count == 1);
  CHECK(h[3].count == 2);  // 3 and the closed right edge 4
  CHECK(h[3].hi == 4.0);
  std::size_t total = 0;
  for (const auto& b : h) total += b.count;
  CHECK(total == 5);

  NlfdSample zeros;
  zeros.factors = {0.0, 0.0};
  CHECK(histogram(zeros, 3)[0].count == 2);
  CHECK_THROWS_AS(histogram(s, 0), ValidationError);
  CHECK_THROWS_AS(histogram(NlfdSample{}, 3), EmptyInputError);
}

TEST_CASE("ball probes") {
  const auto task = make_bbob_task("sphere", 3);
  const Assignment ref{0.0, 1.0, -1.0};
  const std::vector<double> radii{0.1, 0.5, 2.0};
  const auto sets = ball_probe_sample(task, ref, radii, 25, 7);
  REQUIRE(sets.size() == 3);
  for (const auto& [r, pts] : sets) {
    CHECK(pts.size() == 25);
    for (const auto& p : pts) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const double v = std::get<double>(p[i]);
        CHECK(v >= -5.0);
        CHECK(v <= 5.0);
        s += (v - std::get<double>(ref[i])) * (v - std::get<double>(ref[i]));
      }
      CHECK(std::sqrt(s) == doctest::Approx(r).epsilon(1e-12));
    }
  }
  const auto again = ball_probe_sample(task, ref, radii, 25, 7);
  CHECK(std::get<double>(again[2].second[10][1]) == std::get<double>(sets[2].second[10][1]));

  const Assignment corner{5.0, 5.0, 5.0};
  const std::vector<double> huge{30.0};
  CHECK_THROWS_AS(ball_probe_sample(task, corner, huge, 1, 0), InfeasibleRadiusError);
  const std::vector<double> descending{1.0, 0.5};
  CHECK_THROWS_AS(ball_probe_sample(task, ref, descending, 1, 0), ValidationError);
}

TEST_CASE("pairwise distance export") {
  const auto m = random_matrix(10, 3, 2);
  const auto y = random_targets(10, 3);
  const auto rows = pairwise_distance_export(m, y);
  CHECK(rows.size() == 45);
  for (const auto& r : rows) {
    CHECK(r.i < r.j);
    const double expect = (m.values().row(static_cast<Eigen::Index>(r.i)) -
                           m.values().row(static_cast<Eigen::Index>(r.j))).norm();
    CHECK(r.distance == doctest::Approx(expect));
    CHECK(r.label_j == y[r.j]);
  }
}

TEST_CASE("scrambled features are rougher than traditional ones on sphere") {
  const auto task = make_bbob_task("sphere", 4);
  const auto ds = sample_uniform(task, 200, 5);
  const auto trad = compute_nlfd(embed_traditional(task, ds.inputs()), ds.targets());
  const auto scr = compute_nlfd(embed_hash_scramble(task, ds.inputs()), ds.targets());
  CHECK(nlfd_zscore(trad, scr).z < 0.0);
}
