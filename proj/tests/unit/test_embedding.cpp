#include <cmath>

#include "doctest.h"
#include "embedreg/embedder.hpp"
#include "embedreg/error.hpp"
#include "embedreg/transformer.hpp"

using namespace embedreg;

TEST_CASE("embedding matrix rejects non-finite values") {
  RowMatrix m(2, 2);
  m << 1.0, 2.0, std::nan(""), 4.0;
  CHECK_THROWS_AS(EmbeddingMatrix(m, {"x", "h"}), EmbeddingFormatError);
  m(1, 0) = 3.0;
  CHECK_NOTHROW(EmbeddingMatrix(m, {"x", "h"}));
  CHECK_THROWS_AS(EmbeddingMatrix(m, {"", "h"}), EmbeddingFormatError);
}

TEST_CASE("byte tokenization") {
  CHECK(tokenize("ab").ids == std::vector<std::uint32_t>{97, 98});
  CHECK(tokenize("x0:0.32").length() == 7);
  CHECK(tokenize("héllo").length() == 6);
  CHECK_THROWS_AS(tokenize(""), EmptyInputError);
  CHECK_THROWS_AS(tokenize(std::string("\xff\xfe")), ValidationError);
  CHECK_THROWS_AS(tokenize(std::string("a\xc3")), ValidationError);
}

TEST_CASE("vocab pooling") {
  const auto table = VocabTable::generate(16, 3);
  const auto m = embed_vocab_pool({"a", "aa", "ab"}, table);
  CHECK(m.dim() == 16);
  for (Eigen::Index c = 0; c < 16; ++c) {
    CHECK(m.values()(0, c) == table.entries(97, c));
    CHECK(m.values()(1, c) == doctest::Approx(m.values()(0, c)).epsilon(1e-15));
    CHECK(m.values()(2, c) == doctest::Approx((table.entries(97, c) + table.entries(98, c)) / 2));
  }
  const auto other = VocabTable::generate(16, 4);
  CHECK(embed_vocab_pool({"a"}, other).values() != m.values().row(0));
  CHECK(table.config_hash() != other.config_hash());
}

TEST_CASE("synthetic transformer shape, row independence and attention") {
  SyntheticTransformerConfig cfg;
  cfg.model_dim = 32;
  cfg.heads = 4;
  cfg.ff_dim = 64;
  const auto table = VocabTable::generate(cfg.model_dim, cfg.seed);
  const auto ab = embed_synthetic_transformer({"{x0:1.0}", "[2.5,3.0]"}, cfg, table);
  const auto ba = embed_synthetic_transformer({"[2.5,3.0]", "{x0:1.0}"}, cfg, table);
  CHECK(ab.dim() == 32);
  CHECK(ab.values().row(0) == ba.values().row(1));
  CHECK(ab.values().row(1) == ba.values().row(0));

  std::size_t calls = 0;
  double worst = 0.0;
  embed_synthetic_transformer({"attention check"}, cfg, table,
                              [&](std::size_t, std::size_t, const RowMatrix& w) {
                                ++calls;
                                for (Eigen::Index r = 0; r < w.rows(); ++r) {
                                  worst = std::max(worst, std::abs(w.row(r).sum() - 1.0));
                                }
                              });
  CHECK(calls == cfg.layers * cfg.heads);
  CHECK(worst < 1e-6);

  const auto wrong = VocabTable::generate(16, 0);
  CHECK_THROWS_AS(embed_synthetic_transformer({"a"}, cfg, wrong), DimensionMismatchError);
  cfg.heads = 5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("traditional embedder") {
  const RegressionTask task("m",
                            {ParamSpec::continuous("a", -5.0, 5.0), ParamSpec::continuous("b", 0.0, 2.0),
                             ParamSpec::categorical("c", {"a", "b", "c"})},
                            OfflineSource{"unused.csv"});
  const std::vector<Assignment> xs{{0.0, 1.0, std::string("a")},
                                   {5.0, 0.0, std::string("c")},
                                   {-5.0, 2.0, std::string("b")}};
  const auto m = embed_traditional(task, xs);
  CHECK(m.rows() == 3);
  CHECK(m.dim() == 5);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto row = featurize_traditional(task, xs[r]);
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(m.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == row[c]);
    }
  }
  const auto empty = embed_traditional(task, {});
  CHECK(empty.rows() == 0);
  CHECK(empty.dim() == 5);
}

TEST_CASE("hash scramble stays in the unit cube and is deterministic") {
  const auto task = make_bbob_task("sphere", 6);
  const auto ds = sample_uniform(task, 50, 2);
  const auto a = embed_hash_scramble(task, ds.inputs(), "s");
  const auto b = embed_hash_scramble(task, ds.inputs(), "s");
  const auto c = embed_hash_scramble(task, ds.inputs(), "t");
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
  CHECK(a.dim() == 6);
  CHECK(a.values().minCoeff() >= 0.0);
  CHECK(a.values().maxCoeff() < 1.0);
  CHECK(a.provenance().backend == "hash_scramble");
}

TEST_CASE("embedder factory") {
  const auto task = make_bbob_task("sphere", 3);
  const std::vector<Assignment> xs{{1.0, 2.0, 3.0}, {-1.0, 0.5, 0.0}};
  const auto trad = make_embedder(nlohmann::json{{"type", "traditional"}, {"name", "trad"}});
  CHECK(trad->name() == "trad");
  CHECK(trad->embed(task, xs).dim() == 3);
  const auto vp = make_embedder(nlohmann::json{{"type", "vocab_pool"}, {"width", 8}});
  CHECK(vp->embed(task, xs).dim() == 8);
  const auto vp_values = make_embedder(
      nlohmann::json{{"type", "vocab_pool"}, {"width", 8}, {"string_format", "values"}});
  CHECK(vp->provenance() != vp_values->provenance());
  CHECK(vp->embed(task, xs).values() != vp_values->embed(task, xs).values());
  const auto st = make_embedder(nlohmann::json{{"type", "synthetic_transformer"}, {"model_dim", 16},
                                               {"heads", 2}, {"ff_dim", 32}});
  CHECK(st->embed(task, xs).dim() == 16);
  CHECK_FALSE(st->uses_network());
  CHECK_THROWS_AS(make_embedder(nlohmann::json{{"type", "bogus"}}), ValidationError);
}
