// Copyright 2026 The tabxfer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "tabxfer/embed/embedder.hpp"
#include "tabxfer/objectives/objectives.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/text.hpp"
#include "test_support.hpp"

namespace tabxfer {
namespace {

using testing_support::make_table;
constexpr auto kCat = ColumnKind::categorical;
constexpr auto kNum = ColumnKind::numerical;

TableDataset people() {
  return make_table("people", {{"gender", kCat}, {"work", kCat}, {"age", kNum}, {"Monthly_Income", kNum}, {"score", kNum}},
                    {{"male", "associate professor", "0.25", "1", "0"},
                     {"female", "engineer", "0.5", "0", "0.75"},
                     {"male", "engineer", "0", "0.5", "1"}});
}

struct Fixture {
  explicit Fixture(EmbedConfig cfg = {}, std::size_t d = 8) : embedder(cfg, d) {
    embedder.register_table(table);
    embedder.init_params(params, 7);
    params.add("encoder.cls", Tensor<float>::matrix(1, d, 0.25f));
    init_mtm_params(params, d, 7);
  }
  TableDataset table = people();
  Embedder embedder;
  ParamStore<float> params;
};

float max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
  EXPECT_EQ(a.shape, b.shape);
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

TEST(Phrase, TemplateExamples) {
  EXPECT_EQ(build_phrase("fruit", "apple"), "fruit is apple");
  EXPECT_EQ(build_phrase("gender", "male"), "gender is male");
  EXPECT_EQ(build_phrase("work", "associate professor"), "work is associate professor");
  EXPECT_EQ(build_phrase("a", "b", "{value} of {name}"), "b of a");
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("Monthly_Income is 3"), (std::vector<std::string>{"monthly", "income", "is", "3"}));
  EXPECT_EQ(tokenize("gender is male"), (std::vector<std::string>{"gender", "is", "male"}));
  EXPECT_EQ(tokenize("My_Laptop"), (std::vector<std::string>{"my", "laptop"}));
  EXPECT_EQ(tokenize("user_age"), tokenize("user age"));
  EXPECT_EQ(tokenize("monthlyIncome"), (std::vector<std::string>{"monthly", "income"}));
}

TEST(Pooling, AverageAndMaxExamples) {
  const Tensor<float> same(Shape{2, 3}, {1, -2, 3, 1, -2, 3});
  EXPECT_EQ(pool_tokens(same, Pooling::average), Tensor<float>(Shape{1, 3}, {1, -2, 3}));
  const Tensor<float> opposite(Shape{2, 3}, {1, -2, 3, -1, 2, -3});
  EXPECT_EQ(pool_tokens(opposite, Pooling::average), Tensor<float>(Shape{1, 3}, {0, 0, 0}));
  const Tensor<float> m(Shape{2, 2}, {1, 0, 0, 2});
  EXPECT_EQ(pool_tokens(m, Pooling::max), Tensor<float>(Shape{1, 2}, {1, 2}));
  EXPECT_EQ(pool_tokens(m, Pooling::none), m);
}

TEST(Pooling, AverageCommutesWithTokenPermutation) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> t = Tensor<float>::matrix(5, 4);
    for (float& v : t.data) v = static_cast<float>(rng.normal());
    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    rng.shuffle(perm.begin(), perm.end());
    Tensor<float> p = Tensor<float>::matrix(5, 4);
    for (std::size_t i = 0; i < 5; ++i) std::copy(t.row(perm[i]).begin(), t.row(perm[i]).end(), p.row(i).begin());
    EXPECT_LE(max_abs_diff(pool_tokens(t, Pooling::average), pool_tokens(p, Pooling::average)), 1e-6f);
  }
}

TEST(Pooling, SelfAttentionWithZeroQueryIsAverage) {
  const Tensor<float> t(Shape{3, 2}, {1, 2, 3, 4, 5, 9});
  const Tensor<float> q = Tensor<float>::matrix(1, 2);
  EXPECT_LE(max_abs_diff(pool_tokens(t, Pooling::self_attention, &q), pool_tokens(t, Pooling::average)), 1e-6f);
  EXPECT_THROW(pool_tokens(t, Pooling::self_attention), std::invalid_argument);
}

TEST(Provider, HashedIsDeterministicAndUnitNorm) {
  const auto a = EmbeddingProvider::hashed(16, 5);
  const auto b = EmbeddingProvider::hashed(16, 5);
  for (const char* tok : {"apple", "gender", "is", "0", "x"}) {
    const auto v = a.vector(tok);
    EXPECT_EQ(v, b.vector(tok));
    EXPECT_NEAR(norm(v), 1.0, 1e-6);
  }
  EXPECT_NE(a.vector("apple"), a.vector("apples"));
  EXPECT_NE(a.vector("apple"), EmbeddingProvider::hashed(16, 6).vector("apple"));
}

TEST(Provider, LookupSynonymsAreCloserThanUnrelatedPhrases) {
  testing_support::TempDir dir;
  const auto path = dir.write("vectors.txt",
                              "4 7\n"
                              "gender 1 0 0 0\n"
                              "sex 0.95 0.05 0 0\n"
                              "male 0 1 0 0\n"
                              "man 0.05 0.95 0 0\n"
                              "color 0 0 1 0\n"
                              "red 0 0 0 1\n"
                              "is 0.1 0.1 0.1 0.1\n");
  EmbedConfig cfg;
  cfg.mode = ProviderMode::lookup_file;
  cfg.lookup_path = path.string();
  Embedder e(cfg, 4, EmbeddingProvider::from_file(path, 1));
  for (const char* t : {"gender is male", "sex is man", "color is red"}) e.register_text(t);
  ParamStore<float> params;
  e.init_params(params, 1);
  EXPECT_FALSE(params.contains("embed.tokens"));  // lookup vectors stay frozen
  const auto a = e.encode_categorical(params, "gender", "male");
  const auto b = e.encode_categorical(params, "sex", "man");
  const auto c = e.encode_categorical(params, "color", "red");
  auto cos = [](const Tensor<float>& x, const Tensor<float>& y) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += static_cast<double>(x.data[i]) * y.data[i];
    return dot / (norm(x.data) * norm(y.data));
  };
  EXPECT_GT(cos(a, b), cos(a, c));
  EXPECT_GT(cos(a, b), 0.9);
}

TEST(Provider, LookupFileErrors) {
  testing_support::TempDir dir;
  EXPECT_THROW(EmbeddingProvider::from_file(dir / "missing.txt", 0), DataError);
  EXPECT_THROW(EmbeddingProvider::from_file(dir.write("bad.txt", "3 1\ntok 1 2\n"), 0), DataError);
}

TEST(Vocabulary, SortedIdsAndFreeze) {
  Vocabulary v;
  for (const char* t : {"pear", "apple", "fig", "apple"}) v.add(t);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"apple", "fig", "pear"}));
  EXPECT_EQ(v.find("fig"), std::optional<std::size_t>(1));
  EXPECT_FALSE(v.find("kiwi").has_value());
  v.freeze();
  EXPECT_THROW(v.add("kiwi"), std::logic_error);
}

TEST(Header, TokenizationDeterminesEmbedding) {
  Fixture f;
  Embedder e2(EmbedConfig{}, 8);
  e2.register_table(f.table);
  e2.register_text("user_age");
  ParamStore<float> p2;
  e2.init_params(p2, 7);
  EXPECT_EQ(f.embedder.header_embedding(f.params, "gender"), e2.header_embedding(p2, "gender"));
  EXPECT_EQ(e2.header_embedding(p2, "user_age"), e2.header_embedding(p2, "user age"));
}

TEST(Header, SingleTokenNameIsTheTokenVector) {
  Fixture f;
  const auto v = f.embedder.provider().vector("score");
  EXPECT_EQ(f.embedder.header_embedding(f.params, "score").data, v);
}

TEST(Header, ProjectedWhenTokenWidthDiffers) {
  EmbedConfig cfg;
  cfg.token_dim = 6;
  Fixture f(cfg, 8);
  ASSERT_TRUE(f.embedder.projected());
  const Tensor<float>& w = f.params.at("embed.proj.w").value;
  ASSERT_EQ(w.shape, (Shape{6, 8}));
  const auto tok = f.embedder.provider().vector("score");
  const auto h = f.embedder.header_embedding(f.params, "score");
  for (std::size_t j = 0; j < 8; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 6; ++i) s += static_cast<double>(tok[i]) * w(i, j);
    EXPECT_NEAR(h(0, j), s, 1e-6);
  }
}

TEST(Categorical, SameValueSameEmbeddingAcrossRowsAndTables) {
  Fixture f;
  const auto a = f.embedder.encode_row(f.params, f.table, 0);
  const auto c = f.embedder.encode_row(f.params, f.table, 2);
  EXPECT_TRUE(std::equal(a.row(0).begin(), a.row(0).end(), c.row(0).begin()));
  const TableDataset other = make_table("other", {{"score", kNum}, {"gender", kCat}}, {{"0.1", "male"}});
  const auto o = f.embedder.encode_row(f.params, other, 0);
  EXPECT_TRUE(std::equal(a.row(0).begin(), a.row(0).end(), o.row(1).begin()));
}

TEST(Categorical, EmptyValueFallsBackToHeader) {
  Fixture f;
  EXPECT_EQ(f.embedder.encode_categorical(f.params, "gender", ""), f.embedder.header_embedding(f.params, "gender"));
}

TEST(Categorical, TargetsUseValueTokensOnly) {
  Fixture f;
  const auto t = f.embedder.categorical_targets(f.params, {"engineer", "associate professor"});
  const auto eng = f.embedder.provider().vector("engineer");
  const auto assoc = f.embedder.provider().vector("associate");
  const auto prof = f.embedder.provider().vector("professor");
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(t(0, j), eng[j]);
    EXPECT_NEAR(t(1, j), 0.5f * (assoc[j] + prof[j]), 1e-6f);
  }
}

TEST(Numerical, ScalesHeaderEmbedding) {
  Fixture f;
  const auto c = f.embedder.header_embedding(f.params, "age");
  const auto zero = f.embedder.encode_numerical(f.params, "age", 0.0);
  const auto one = f.embedder.encode_numerical(f.params, "age", 1.0);
  const auto half = f.embedder.encode_numerical(f.params, "age", 0.5);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(zero(0, j), 0.0f);
    EXPECT_EQ(one(0, j), c(0, j));
    EXPECT_EQ(half(0, j), 0.5f * c(0, j));
  }
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(0.0, 0.5);
    const auto ea = f.embedder.encode_numerical(f.params, "age", a);
    const auto e2a = f.embedder.encode_numerical(f.params, "age", 2 * a);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(e2a(0, j), 2 * ea(0, j), 1e-6f);
  }
  EXPECT_THROW(f.embedder.encode_numerical(f.params, "age", 1.5), DataError);
}

TEST(Row, LengthAndColumnPermutation) {
  Fixture f;
  const auto e = f.embedder.encode_row(f.params, f.table, 1);
  EXPECT_EQ(e.rows(), 5u);
  const std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  const auto e2 = f.embedder.encode_row(f.params, f.table.select_columns(perm), 1);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_TRUE(std::equal(e2.row(i).begin(), e2.row(i).end(), e.row(perm[i]).begin()));
  }
}

TEST(Row, AllZeroNumericalRowIsZero) {
  Fixture f;
  const TableDataset t = make_table("z", {{"age", kNum}, {"score", kNum}}, {{"0", "0"}});
  const auto e = f.embedder.encode_row(f.params, t, 0);
  for (float v : e.data) EXPECT_EQ(v, 0.0f);
}

class BatchEmbedding : public testing::TestWithParam<Pooling> {};

TEST_P(BatchEmbedding, MatchesRowEncodingAndMasks) {
  EmbedConfig cfg;
  cfg.pooling = GetParam();
  Fixture f(cfg);
  std::vector<std::size_t> rows{0, 1, 2};
  auto views = full_views(f.table, rows);
  views[1].masked = {0, 0, 1, 0, 0};
  views[2].masked = {1, 0, 0, 0, 0};
  Graph<float> g;
  const EmbeddedBatch b = f.embedder.embed(g, f.params, f.table, views);
  const Tensor<float>& x = g.value(b.x);
  const Tensor<float>& e_mask = f.params.at("mtm.mask").value;
  ASSERT_EQ(b.rows.count(), 3u);
  for (std::size_t v = 0; v < 3; ++v) {
    const std::size_t base = b.rows.begin(v);
    EXPECT_EQ(x(base, 0), 0.25f);  // CLS
    if (GetParam() == Pooling::none) continue;
    ASSERT_EQ(b.rows.length(v), 6u);
    const auto e = f.embedder.encode_row(f.params, f.table, views[v].row);
    for (std::size_t j = 0; j < 5; ++j) {
      const bool masked = !views[v].masked.empty() && views[v].masked[j];
      const auto expect = masked ? f.embedder.header_embedding(f.params, f.table.schema[j].name) : Tensor<float>();
      for (std::size_t c = 0; c < 8; ++c) {
        const float want = masked ? e_mask(0, c) + expect(0, c) : e(j, c);
        EXPECT_NEAR(x(base + 1 + j, c), want, 1e-6f) << "view " << v << " feature " << j;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllPoolings, BatchEmbedding,
                         testing::Values(Pooling::average, Pooling::max, Pooling::self_attention, Pooling::none),
                         [](const auto& info) { return std::string(pooling_name(info.param)); });

TEST(Batch, TokenLevelFeatureOutputsAverageTheirPositions) {
  EmbedConfig cfg;
  cfg.pooling = Pooling::none;
  Fixture f(cfg);
  std::vector<std::size_t> rows{0};
  const auto views = full_views(f.table, rows);
  Graph<float> g;
  const EmbeddedBatch b = f.embedder.embed(g, f.params, f.table, views);
  EXPECT_FALSE(b.single_position);
  // "work is associate professor" spans four positions.
  EXPECT_EQ(b.feature_spans.length(1), 4u);
  const Var out = f.embedder.feature_outputs(g, b.x, b);
  EXPECT_EQ(g.value(out).rows(), 5u);
}

TEST(Batch, RequiresClsAndMaskParameters) {
  Fixture f;
  std::vector<std::size_t> rows{0};
  auto views = full_views(f.table, rows);
  views[0].masked = {1, 0, 0, 0, 0};
  ParamStore<float> no_mask = f.params;
  no_mask.erase_prefix("mtm.mask");
  Graph<float> g;
  EXPECT_THROW(f.embedder.embed(g, no_mask, f.table, views), std::exception);
}

TEST(Masking, ApplyMaskExamples) {
  Rng rng(4);
  Tensor<float> e = Tensor<float>::matrix(4, 3), headers = Tensor<float>::matrix(4, 3), mask = Tensor<float>::matrix(1, 3);
  for (auto* t : {&e, &headers, &mask}) {
    for (float& v : t->data) v = static_cast<float>(rng.normal());
  }
  EXPECT_EQ(apply_mask(e, {0, 0, 0, 0}, mask, headers), e);
  const auto one = apply_mask(e, {0, 0, 1, 0}, mask, headers);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(one(i, c), i == 2 ? mask(0, c) + headers(2, c) : e(i, c));
    }
  }
  const auto two = apply_mask(e, {1, 1, 0, 0}, mask, headers);
  EXPECT_FALSE(std::equal(two.row(0).begin(), two.row(0).end(), two.row(1).begin()));
}

}  // namespace
}  // namespace tabxfer
