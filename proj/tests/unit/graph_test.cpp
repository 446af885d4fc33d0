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

#include "tabxfer/numcore/adam.hpp"
#include "tabxfer/numcore/gradcheck.hpp"
#include "tabxfer/numcore/graph.hpp"

namespace tabxfer {
namespace {

Tensor<float> random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor<float> t = Tensor<float>::matrix(r, c);
  for (float& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

TEST(Graph, IdentityMatmulReturnsOperand) {
  Rng rng(1);
  Graph<float> g;
  Tensor<float> eye = Tensor<float>::matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0f;
  const Tensor<float> a = random_matrix(3, 3, rng);
  EXPECT_EQ(g.value(g.matmul(g.input(eye), g.input(a))), a);
}

TEST(Graph, UniformLogitsGiveUniformSoftmax) {
  Graph<float> g;
  const auto& s = g.value(g.softmax(g.input(Tensor<float>::matrix(1, 3, 0.0f))));
  for (float v : s.data) EXPECT_FLOAT_EQ(v, 1.0f / 3.0f);
}

TEST(Graph, LayerNormOfConstantRowIsZero) {
  Graph<float> g;
  const auto& y = g.value(g.layer_norm(g.input(Tensor<float>::matrix(2, 5, 4.25f))));
  for (float v : y.data) EXPECT_EQ(v, 0.0f);
}

TEST(Graph, SquareHasDerivativeSix) {
  Graph<double> g;
  const Var x = g.variable(Tensor<double>::scalar(3.0));
  g.backward(g.mul(x, x));
  EXPECT_DOUBLE_EQ(g.grad(x).item(), 6.0);
}

TEST(Graph, ReluSubgradient) {
  Graph<float> g;
  const Var x = g.variable(Tensor<float>(Shape{1, 2}, std::vector<float>{-1.0f, 2.0f}));
  g.backward(g.sum(g.relu(x)));
  EXPECT_EQ(g.grad(x).data, (std::vector<float>{0.0f, 1.0f}));
}

TEST(Graph, ReluDerivativeAtZeroIsZero) {
  Graph<float> g;
  const Var x = g.variable(Tensor<float>(Shape{1, 1}, std::vector<float>{0.0f}));
  g.backward(g.sum(g.relu(x)));
  EXPECT_EQ(g.grad(x).item(), 0.0f);
}

TEST(Graph, CosineGradientOrthogonalAtIdenticalUnitVectors) {
  Tensor<double> a(Shape{1, 4}, std::vector<double>{0.5, -0.5, 0.5, 0.5});
  Graph<double> g;
  const Var va = g.variable(a);
  const Var vb = g.variable(a);
  g.backward(g.sum(g.cosine_rows(va, vb)));
  double proj = 0.0;
  for (std::size_t i = 0; i < 4; ++i) proj += g.grad(va).data[i] * a.data[i];
  EXPECT_LE(std::abs(proj), 1e-6);

  const gradcheck::ScalarFn fn = [](Graph<double>& gg, std::span<const Var> in) {
    return gg.sum(gg.cosine_rows(in[0], in[1]));
  };
  EXPECT_LT(gradcheck::max_relative_error(fn, {a, a}, 1e-3), 1e-5);
}

TEST(Graph, NonScalarLossRejected) {
  Graph<float> g;
  const Var x = g.variable(Tensor<float>::matrix(2, 2, 1.0f));
  EXPECT_THROW(g.backward(x), ShapeError);
}

TEST(Graph, ShapeErrorNamesOperation) {
  Graph<float> g;
  const Var a = g.input(Tensor<float>::matrix(2, 3));
  const Var b = g.input(Tensor<float>::matrix(2, 3));
  try {
    g.matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

TEST(Graph, NanIsFlaggedWithNodeId) {
  Graph<float> g;
  const Var x = g.input(Tensor<float>::matrix(1, 2, -1.0f));
  try {
    g.log(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.node(), 1);
  }
}

TEST(Graph, SoftmaxRowsAreDistributions) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> x = random_matrix(4, 9, rng);
    for (float& v : x.data) v *= 10.0f;
    Graph<float> g;
    const auto& s = g.value(g.softmax(g.input(x)));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (float v : s.row(r)) {
        EXPECT_GE(v, 0.0f);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Graph, DropoutDeterministicGivenSeed) {
  Rng rng(4);
  const Tensor<float> x = random_matrix(8, 16, rng);
  auto run = [&](std::uint64_t seed) {
    Graph<float> g({.training = true, .seed = seed});
    return g.value(g.dropout(g.relu(g.input(x)), 0.3f));
  };
  EXPECT_EQ(run(9), run(9));
  EXPECT_NE(run(9), run(10));
}

TEST(Graph, DropoutIsIdentityOutsideTraining) {
  Rng rng(5);
  const Tensor<float> x = random_matrix(3, 3, rng);
  Graph<float> g({.training = false, .seed = 1});
  EXPECT_EQ(g.value(g.dropout(g.input(x), 0.5f)), x);
}

TEST(Graph, UnusedParameterGetsZeroGradient) {
  Rng rng(6);
  ParamStore<float> store;
  store.add("used", random_matrix(2, 2, rng));
  store.add("unused", random_matrix(2, 2, rng));
  store.zero_grad();
  Graph<float> g;
  const Var u = g.param(store.at("used"));
  g.param(store.at("unused"));
  g.backward(g.sum(g.mul(u, u)));
  for (float v : store.at("unused").grad.data) EXPECT_EQ(v, 0.0f);
  for (float v : store.at("used").grad.data) EXPECT_NE(v, 0.0f);
}

TEST(Graph, BackwardAccumulatesIntoParameterGradients) {
  ParamStore<double> store;
  store.add("w", Tensor<double>::scalar(1.5));
  store.zero_grad();
  for (int i = 0; i < 2; ++i) {
    Graph<double> g;
    const Var w = g.param(store.at("w"));
    g.backward(g.scale(w, 2.0));
  }
  EXPECT_DOUBLE_EQ(store.at("w").grad.item(), 4.0);
}

TEST(Graph, SharedParameterBindsOnceAndAccumulates) {
  ParamStore<double> store;
  store.add("w", Tensor<double>::scalar(2.0));
  Graph<double> g;
  const Var a = g.param(store.at("w"));
  const Var b = g.param(store.at("w"));
  EXPECT_EQ(a.id, b.id);
  g.backward(g.add(g.mul(a, a), g.scale(b, 3.0)));
  EXPECT_DOUBLE_EQ(store.at("w").grad.item(), 7.0);
}

TEST(GradCheck, MatmulAtRandomPoint) {
  Rng rng(21);
  EXPECT_LT(gradcheck::finite_diff_check("matmul", gradcheck::random_point("matmul", rng)), 1e-6);
}

TEST(GradCheck, SoftmaxLogComposite) {
  Rng rng(22);
  EXPECT_LT(gradcheck::finite_diff_check("softmax_log", gradcheck::random_point("softmax_log", rng)), 1e-5);
}

TEST(GradCheck, LayerNormWithSpreadInput) {
  Rng rng(23);
  auto point = gradcheck::random_point("layer_norm", rng);
  for (std::size_t r = 0; r < point[0].rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : point[0].row(r)) mean += v;
    mean /= static_cast<double>(point[0].cols());
    for (double v : point[0].row(r)) var += (v - mean) * (v - mean);
    ASSERT_GT(var / static_cast<double>(point[0].cols()), 0.1);
  }
  EXPECT_LT(gradcheck::finite_diff_check("layer_norm", point), 1e-5);
}

class EveryPrimitive : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryPrimitive, HundredRandomPoints) {
  Rng rng(derive_seed({31, fnv1a64(GetParam())}));
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    worst = std::max(worst, gradcheck::finite_diff_check(GetParam(), gradcheck::random_point(GetParam(), rng)));
  }
  EXPECT_LT(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Registry, EveryPrimitive, ::testing::ValuesIn(gradcheck::primitives()),
                         [](const auto& info) { return info.param; });

TEST(Adam, FirstStepWithUnitGradient) {
  ParamStore<float> store;
  store.add("w", Tensor<float>::matrix(2, 3, 0.5f));
  store.at("w").grad = Tensor<float>::matrix(2, 3, 1.0f);
  AdamState<float> state;
  state.config.lr = 1e-3;
  ASSERT_TRUE(adam_step(store, state));
  EXPECT_EQ(state.step, 1);
  for (float v : store.at("w").value.data) EXPECT_NEAR(v, 0.5f - 1e-3f, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamStore<float> store;
  store.add("w", Tensor<float>::matrix(2, 2, 1.25f));
  store.at("w").zero_grad();
  AdamState<float> state;
  ASSERT_TRUE(adam_step(store, state));
  EXPECT_EQ(state.step, 1);
  for (float v : store.at("w").value.data) EXPECT_EQ(v, 1.25f);
}

TEST(Adam, DeterministicFromIdenticalState) {
  Rng rng(41);
  ParamStore<float> a;
  a.add("w", random_matrix(3, 3, rng));
  a.at("w").grad = random_matrix(3, 3, rng);
  ParamStore<float> b = a;
  AdamState<float> sa, sb;
  adam_step(a, sa);
  adam_step(b, sb);
  EXPECT_EQ(a.at("w").value, b.at("w").value);
  EXPECT_EQ(sa.moments.at("w"), sb.moments.at("w"));
}

TEST(Adam, NonFiniteGradientSkipsStep) {
  ParamStore<float> store;
  store.add("w", Tensor<float>::matrix(1, 2, 1.0f));
  store.at("w").grad = Tensor<float>(Shape{1, 2}, std::vector<float>{1.0f, NAN});
  AdamState<float> state;
  EXPECT_FALSE(adam_step(store, state));
  EXPECT_EQ(state.step, 0);
  EXPECT_EQ(state.skipped, 1);
  EXPECT_EQ(store.at("w").value.data, (std::vector<float>{1.0f, 1.0f}));
}

TEST(Adam, RejectsNonPositiveLearningRate) {
  ParamStore<float> store;
  store.add("w", Tensor<float>::matrix(1, 1, 1.0f));
  AdamState<float> state;
  state.config.lr = 0.0;
  EXPECT_THROW(adam_step(store, state), std::invalid_argument);
}

TEST(Adam, FrozenParametersAreNotUpdated) {
  ParamStore<float> store;
  store.add("frozen", Tensor<float>::matrix(1, 1, 1.0f), false);
  store.add("live", Tensor<float>::matrix(1, 1, 1.0f));
  store.zero_grad();
  store.at("frozen").grad.data[0] = 1.0f;
  store.at("live").grad.data[0] = 1.0f;
  AdamState<float> state;
  adam_step(store, state);
  EXPECT_EQ(store.at("frozen").value.item(), 1.0f);
  EXPECT_LT(store.at("live").value.item(), 1.0f);
  EXPECT_EQ(update_set(store), std::vector<std::string>{"live"});
}

TEST(Adam, ClipScalesGlobalNorm) {
  ParamStore<double> store;
  store.add("a", Tensor<double>::matrix(1, 2));
  store.at("a").grad = Tensor<double>(Shape{1, 2}, std::vector<double>{3.0, 4.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(store, 1.0), 5.0);
  EXPECT_NEAR(store.at("a").grad.data[0], 0.6, 1e-12);
  EXPECT_NEAR(store.at("a").grad.data[1], 0.8, 1e-12);
}

}  // namespace
}  // namespace tabxfer
