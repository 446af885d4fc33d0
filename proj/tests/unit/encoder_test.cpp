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
#include <numeric>

#include "tabxfer/encoder/encoder.hpp"
#include "tabxfer/numcore/random.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {
namespace {

EncoderConfig small_config(std::size_t layers = 2) {
  EncoderConfig c;
  c.layers = layers;
  c.dim = 8;
  c.ffn_hidden = 16;
  c.heads = 2;
  return c;
}

template <typename T>
Tensor<T> random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor<T> t = Tensor<T>::matrix(r, c);
  for (T& v : t.data) v = static_cast<T>(rng.normal());
  return t;
}

// Rows of x reordered so that output row i is input row perm[i].
template <typename T>
Tensor<T> permute_rows(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  Tensor<T> out = Tensor<T>::matrix(perm.size(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), out.row(i).begin());
  return out;
}

template <typename T>
double max_abs(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a.data[i] - b.data[i])));
  return m;
}

TEST(EncoderConfig, Validation) {
  EncoderConfig c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(small_config().head_dim(), 4u);
}

TEST(Attention, SingleKeyReturnsProjectedValue) {
  ParamStore<double> params;
  const EncoderConfig cfg = small_config(1);
  init_encoder_params(params, cfg, 3);
  Rng rng(1);
  for (const char* b : {"encoder.layer0.attn.v.b", "encoder.layer0.attn.o.b"}) {
    for (double& v : params.at(b).value.data) v = rng.normal();
  }
  const Tensor<double> x = random_matrix<double>(1, 8, rng);
  Graph<double> g;
  const Tensor<double>& out =
      g.value(multi_head_attention(g, params, cfg, 0, g.input(x), Segments::uniform(1, 1)));
  Graph<double> ref;
  const auto lin = [&](Var v, const std::string& n) {
    return ref.add_row(ref.matmul(v, ref.param(params.at(n + ".w"))), ref.param(params.at(n + ".b")));
  };
  const Tensor<double>& want = ref.value(lin(lin(ref.input(x), "encoder.layer0.attn.v"), "encoder.layer0.attn.o"));
  EXPECT_LE(max_abs(out, want), 1e-12);
}

TEST(Attention, ZeroInputZeroBiasGivesZero) {
  ParamStore<float> params;
  const EncoderConfig cfg = small_config(1);
  init_encoder_params(params, cfg, 3);
  Graph<float> g;
  const Tensor<float>& out =
      g.value(multi_head_attention(g, params, cfg, 0, g.input(Tensor<float>::matrix(4, 8)), Segments::uniform(1, 4)));
  for (float v : out.data) EXPECT_EQ(v, 0.0f);
}

TEST(Attention, PermutationEquivariant) {
  ParamStore<double> params;
  const EncoderConfig cfg = small_config(1);
  init_encoder_params(params, cfg, 5);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<double> x = random_matrix<double>(5, 8, rng);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    Graph<double> g;
    const auto seg = Segments::uniform(1, 5);
    const Tensor<double> a = g.value(multi_head_attention(g, params, cfg, 0, g.input(x), seg));
    const Tensor<double> b = g.value(multi_head_attention(g, params, cfg, 0, g.input(permute_rows(x, perm)), seg));
    EXPECT_LE(max_abs(permute_rows(a, perm), b), 1e-12);
  }
}

TEST(Block, IdenticalRowsStayIdentical) {
  ParamStore<float> params;
  const EncoderConfig cfg = small_config(1);
  init_encoder_params(params, cfg, 5);
  Rng rng(3);
  const Tensor<float> row = random_matrix<float>(1, 8, rng);
  Tensor<float> x = Tensor<float>::matrix(4, 8);
  for (std::size_t i = 0; i < 4; ++i) std::copy(row.data.begin(), row.data.end(), x.row(i).begin());
  Graph<float> g;
  const Tensor<float>& out = g.value(encoder_block(g, params, cfg, 0, g.input(x), Segments::uniform(1, 4)));
  for (std::size_t i = 1; i < 4; ++i) EXPECT_TRUE(std::equal(out.row(i).begin(), out.row(i).end(), out.row(0).begin()));
}

TEST(Block, LayerNormOutputsAreStandardized) {
  Rng rng(4);
  Graph<double> g;
  const Tensor<double>& y = g.value(g.layer_norm(g.input(random_matrix<double>(6, 16, rng))));
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : y.row(r)) mean += v / 16.0;
    for (double v : y.row(r)) var += (v - mean) * (v - mean) / 16.0;
    EXPECT_LE(std::abs(mean), 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Encoder, FeedForwardIsSharedAcrossLayers) {
  ParamStore<float> one, four;
  init_encoder_params(one, small_config(1), 1);
  init_encoder_params(four, small_config(4), 1);
  EXPECT_EQ(one.scalar_count("encoder.ffn."), four.scalar_count("encoder.ffn."));
  for (const auto& name : four.names()) {
    if (name.find("ffn") != std::string::npos) {
      EXPECT_EQ(name.rfind("encoder.ffn.", 0), 0u) << name;
    }
  }
}

TEST(Encoder, SharedFeedForwardGradientSumsOverLayers) {
  ParamStore<double> params;
  EncoderConfig cfg = small_config(2);
  cfg.canonical_order = false;
  init_encoder_params(params, cfg, 8);
  Rng rng(6);
  const Tensor<double> x = random_matrix<double>(4, 8, rng);
  const Tensor<double> w = random_matrix<double>(4, 8, rng);
  const auto seg = Segments::uniform(1, 4);
  auto loss = [&](ParamStore<double>& p) {
    Graph<double> g;
    const Var out = g.sum(g.mul(encode(g, p, cfg, g.input(x), seg), g.input(w)));
    return g.value(out).item();
  };
  params.zero_grad();
  {
    Graph<double> g;
    g.backward(g.sum(g.mul(encode(g, params, cfg, g.input(x), seg), g.input(w))));
  }
  auto& p = params.at("encoder.ffn.1.w");
  for (std::size_t i : {0u, 17u, 101u}) {
    const double x0 = p.value.data[i];
    p.value.data[i] = x0 + 1e-6;
    const double up = loss(params);
    p.value.data[i] = x0 - 1e-6;
    const double down = loss(params);
    p.value.data[i] = x0;
    EXPECT_NEAR(p.grad.data[i], (up - down) / 2e-6, 1e-6 * std::max(1.0, std::abs(p.grad.data[i])));
  }
}

TEST(Encoder, ZeroLayersReturnsClsEmbedding) {
  ParamStore<float> params;
  const EncoderConfig cfg = small_config(0);
  init_encoder_params(params, cfg, 2);
  Rng rng(1);
  Tensor<float> x = random_matrix<float>(3, 8, rng);
  std::copy(params.at("encoder.cls").value.data.begin(), params.at("encoder.cls").value.data.end(), x.row(0).begin());
  Graph<float> g;
  const Var h = encode(g, params, cfg, g.input(x), Segments::uniform(1, 3));
  EXPECT_EQ(g.value(cls_rows(g, h, Segments::uniform(1, 3))), params.at("encoder.cls").value);
}

TEST(Encoder, RejectsSequenceWithoutFeatures) {
  ParamStore<float> params;
  const EncoderConfig cfg = small_config(1);
  init_encoder_params(params, cfg, 2);
  Graph<float> g;
  const std::vector<std::size_t> lengths{3, 1};
  EXPECT_THROW(encode(g, params, cfg, g.input(Tensor<float>::matrix(4, 8)), Segments::from_lengths(lengths)),
               std::invalid_argument);
}

class Invariance : public testing::TestWithParam<bool> {};

// CLS output is unchanged and feature outputs permute with the features.
TEST_P(Invariance, ColumnPermutation) {
  ParamStore<float> params;
  EncoderConfig cfg = small_config(2);
  cfg.canonical_order = GetParam();
  init_encoder_params(params, cfg, 11);
  Rng rng(12);
  const std::vector<std::size_t> lengths{6, 4, 7};
  const auto seg = Segments::from_lengths(lengths);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<float> x = random_matrix<float>(seg.total(), 8, rng);
    std::vector<std::size_t> perm(seg.total());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t s = 0; s < seg.count(); ++s) {
      rng.shuffle(perm.begin() + static_cast<std::ptrdiff_t>(seg.begin(s) + 1),
                  perm.begin() + static_cast<std::ptrdiff_t>(seg.end(s)));
    }
    Graph<float> g;
    const Tensor<float> a = g.value(encode(g, params, cfg, g.input(x), seg));
    const Tensor<float> b = g.value(encode(g, params, cfg, g.input(permute_rows(x, perm)), seg));
    const Tensor<float> pa = permute_rows(a, perm);
    if (GetParam()) {
      EXPECT_EQ(pa, b);
    } else {
      EXPECT_LE(max_abs(pa, b), 1e-5);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(CanonicalOrder, Invariance, testing::Bool());

TEST(Encoder, CanonicalPermutationKeepsClsFirst) {
  const Tensor<float> x(Shape{4, 1}, {9, 3, 1, 2});
  const std::vector<std::size_t> lengths{4};
  EXPECT_EQ(canonical_permutation(x, Segments::from_lengths(lengths)), (std::vector<std::size_t>{0, 2, 3, 1}));
}

TEST(Encoder, DropoutOnlyInTraining) {
  ParamStore<float> params;
  const EncoderConfig cfg = small_config(2);
  init_encoder_params(params, cfg, 11);
  Rng rng(1);
  const Tensor<float> x = random_matrix<float>(5, 8, rng);
  const auto seg = Segments::uniform(1, 5);
  Graph<float> e1, e2, t1({.training = true, .seed = 4});
  const Tensor<float> a = e1.value(encode(e1, params, cfg, e1.input(x), seg));
  EXPECT_EQ(a, e2.value(encode(e2, params, cfg, e2.input(x), seg)));
  EXPECT_NE(a, t1.value(encode(t1, params, cfg, t1.input(x), seg)));
}

}  // namespace
}  // namespace tabxfer
