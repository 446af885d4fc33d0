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

#include "tabxfer/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace tabxfer::gradcheck {
namespace {

struct Primitive {
  std::vector<Shape> shapes;
  bool training = false;
  std::function<Var(Graph<double>&, std::span<const Var>)> build;
  // Optional per-primitive sampler; defaults to N(0, 1).
  std::function<double(Rng&)> sample;
};

double away_from_zero(Rng& rng) {
  double x = 0.0;
  while (std::abs(x) < 0.1) x = rng.uniform(-1.0, 1.0);
  return x;
}

const Segments& probe_segments() {
  static const Segments seg = Segments::from_lengths(std::vector<std::size_t>{2, 1, 3});
  return seg;
}

const std::map<std::string, Primitive, std::less<>>& registry() {
  using G = Graph<double>;
  using In = std::span<const Var>;
  static const std::map<std::string, Primitive, std::less<>> reg = [] {
    std::map<std::string, Primitive, std::less<>> r;
    r["matmul"] = {{{4, 4}, {4, 4}}, false, [](G& g, In x) { return g.matmul(x[0], x[1]); }, {}};
    r["matmul_nt"] = {{{3, 4}, {5, 4}}, false, [](G& g, In x) { return g.matmul_nt(x[0], x[1]); }, {}};
    r["transpose"] = {{{3, 4}}, false, [](G& g, In x) { return g.transpose(x[0]); }, {}};
    r["add"] = {{{3, 4}, {3, 4}}, false, [](G& g, In x) { return g.add(x[0], x[1]); }, {}};
    r["sub"] = {{{3, 4}, {3, 4}}, false, [](G& g, In x) { return g.sub(x[0], x[1]); }, {}};
    r["mul"] = {{{3, 4}, {3, 4}}, false, [](G& g, In x) { return g.mul(x[0], x[1]); }, {}};
    r["add_row"] = {{{3, 4}, {1, 4}}, false, [](G& g, In x) { return g.add_row(x[0], x[1]); }, {}};
    r["mul_row"] = {{{3, 4}, {1, 4}}, false, [](G& g, In x) { return g.mul_row(x[0], x[1]); }, {}};
    r["scale_rows"] = {{{3, 4}, {3, 1}}, false, [](G& g, In x) { return g.scale_rows(x[0], x[1]); }, {}};
    r["scale"] = {{{3, 4}}, false, [](G& g, In x) { return g.scale(x[0], 1.7); }, {}};
    r["add_scalar"] = {{{3, 4}}, false, [](G& g, In x) { return g.add_scalar(x[0], -0.3); }, {}};
    r["relu"] = {{{3, 4}}, false, [](G& g, In x) { return g.relu(x[0]); }, away_from_zero};
    r["exp"] = {{{3, 4}}, false, [](G& g, In x) { return g.exp(x[0]); }, [](Rng& rng) { return rng.uniform(-1, 1); }};
    r["log"] = {{{3, 4}}, false, [](G& g, In x) { return g.log(x[0]); }, [](Rng& rng) { return rng.uniform(0.5, 2.0); }};
    r["softmax"] = {{{3, 5}}, false, [](G& g, In x) { return g.softmax(x[0]); }, {}};
    r["log_softmax"] = {{{3, 5}}, false, [](G& g, In x) { return g.log_softmax(x[0]); }, {}};
    r["softmax_log"] = {{{3, 5}}, false, [](G& g, In x) { return g.log(g.softmax(x[0])); }, {}};
    r["layer_norm"] = {{{3, 6}}, false, [](G& g, In x) { return g.layer_norm(x[0]); },
                       [](Rng& rng) { return 2.0 * rng.normal(); }};
    r["mean_rows"] = {{{3, 4}}, false, [](G& g, In x) { return g.mean(x[0], 0); }, {}};
    r["mean_cols"] = {{{3, 4}}, false, [](G& g, In x) { return g.mean(x[0], 1); }, {}};
    r["sum"] = {{{3, 4}}, false, [](G& g, In x) { return g.sum(x[0]); }, {}};
    r["dropout"] = {{{3, 4}}, true, [](G& g, In x) { return g.dropout(x[0], 0.3); }, {}};
    r["concat_rows"] = {{{2, 3}, {3, 3}}, false,
                        [](G& g, In x) { return g.concat_rows(std::vector<Var>{x[0], x[1]}); }, {}};
    r["concat_cols"] = {{{3, 2}, {3, 4}}, false,
                        [](G& g, In x) { return g.concat_cols(std::vector<Var>{x[0], x[1]}); }, {}};
    r["gather_rows"] = {{{4, 3}}, false,
                        [](G& g, In x) {
                          const std::vector<std::size_t> idx{2, 0, 2, 3};
                          return g.gather_rows(x[0], idx);
                        },
                        {}};
    r["cosine_rows"] = {{{3, 4}, {3, 4}}, false, [](G& g, In x) { return g.cosine_rows(x[0], x[1]); }, {}};
    r["l2_normalize_rows"] = {{{3, 4}}, false, [](G& g, In x) { return g.l2_normalize_rows(x[0]); }, {}};
    r["squared_error"] = {{{3, 4}, {3, 4}}, false, [](G& g, In x) { return g.squared_error(x[0], x[1]); }, {}};
    r["segment_sum"] = {{{6, 3}}, false, [](G& g, In x) { return g.segment_sum(x[0], probe_segments()); }, {}};
    r["segment_mean"] = {{{6, 3}}, false, [](G& g, In x) { return g.segment_mean(x[0], probe_segments()); }, {}};
    r["segment_max"] = {{{6, 3}}, false, [](G& g, In x) { return g.segment_max(x[0], probe_segments()); }, {}};
    r["segment_softmax"] = {{{6, 2}}, false, [](G& g, In x) { return g.segment_softmax(x[0], probe_segments()); }, {}};
    r["segment_attention"] = {{{6, 4}, {6, 4}, {6, 4}}, false,
                              [](G& g, In x) {
                                return g.segment_attention(x[0], x[1], x[2], probe_segments(), 2, 0.5, 0.0);
                              },
                              {}};
    r["segment_attention_dropout"] = {{{6, 4}, {6, 4}, {6, 4}}, true,
                                      [](G& g, In x) {
                                        return g.segment_attention(x[0], x[1], x[2], probe_segments(), 2, 0.5, 0.25);
                                      },
                                      {}};
    return r;
  }();
  return reg;
}

const Primitive& lookup(std::string_view op) {
  auto it = registry().find(op);
  if (it == registry().end()) throw std::invalid_argument("unknown primitive '" + std::string(op) + "'");
  return it->second;
}

double evaluate_loss(const ScalarFn& fn, const std::vector<Tensor<double>>& point, bool training) {
  Graph<double> g({.training = training, .seed = 17, .check_finite = true});
  std::vector<Var> vars;
  for (const auto& t : point) vars.push_back(g.input(t));
  return g.value(fn(g, vars)).item();
}

}  // namespace

double max_relative_error(const ScalarFn& fn, const std::vector<Tensor<double>>& point, double step, bool training) {
  Graph<double> g({.training = training, .seed = 17, .check_finite = true});
  std::vector<Var> vars;
  for (const auto& t : point) vars.push_back(g.variable(t));
  const Var loss = fn(g, vars);
  g.backward(loss);

  double worst = 0.0;
  std::vector<Tensor<double>> probe = point;
  for (std::size_t t = 0; t < point.size(); ++t) {
    const Tensor<double>& analytic = g.grad(vars[t]);
    for (std::size_t i = 0; i < point[t].size(); ++i) {
      const double x0 = point[t].data[i];
      probe[t].data[i] = x0 + step;
      const double up = evaluate_loss(fn, probe, training);
      probe[t].data[i] = x0 - step;
      const double down = evaluate_loss(fn, probe, training);
      probe[t].data[i] = x0;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

std::vector<std::string> primitives() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

std::vector<Tensor<double>> random_point(std::string_view op, Rng& rng) {
  const Primitive& p = lookup(op);
  std::vector<Tensor<double>> point;
  for (const Shape& s : p.shapes) {
    Tensor<double> t(s);
    for (double& v : t.data) v = p.sample ? p.sample(rng) : rng.normal();
    point.push_back(std::move(t));
  }
  return point;
}

double finite_diff_check(std::string_view op, const std::vector<Tensor<double>>& point, double step) {
  const Primitive& p = lookup(op);
  const ScalarFn fn = [&p](Graph<double>& g, std::span<const Var> in) {
    const Var out = p.build(g, in);
    Tensor<double> weights(g.value(out).shape);
    Rng rng(0x5eed);
    for (double& w : weights.data) w = rng.uniform(-1.0, 1.0);
    return g.sum(g.mul(out, g.input(std::move(weights))));
  };
  return max_relative_error(fn, point, step, p.training);
}

}  // namespace tabxfer::gradcheck
