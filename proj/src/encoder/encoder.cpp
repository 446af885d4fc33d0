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

#include "tabxfer/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tabxfer/numcore/init.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || ffn_hidden == 0) throw ConfigError("encoder: dim, heads and ffn_hidden must be positive");
  if (dim % heads != 0) {
    throw ConfigError("encoder: dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0) || !(attention_dropout >= 0.0 && attention_dropout < 1.0)) {
    throw ConfigError("encoder: dropout rates must lie in [0, 1)");
  }
}

namespace {

std::string layer_prefix(std::size_t layer) { return "encoder.layer" + std::to_string(layer) + "."; }

template <typename T>
Var linear(Graph<T>& g, ParamStore<T>& params, const std::string& name, Var x) {
  return g.add_row(g.matmul(x, g.param(params.at(name + ".w"))), g.param(params.at(name + ".b")));
}

template <typename T>
Var affine_norm(Graph<T>& g, ParamStore<T>& params, const std::string& name, Var x) {
  return g.add_row(g.mul_row(g.layer_norm(x), g.param(params.at(name + ".gamma"))), g.param(params.at(name + ".beta")));
}

template <typename T>
void add_linear(ParamStore<T>& params, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed) {
  Rng rng = param_rng(seed, name + ".w");
  params.add(name + ".w", xavier_uniform<T>(in, out, rng));
  params.add(name + ".b", Tensor<T>::matrix(1, out));
}

template <typename T>
void add_norm(ParamStore<T>& params, const std::string& name, std::size_t dim) {
  params.add(name + ".gamma", Tensor<T>::matrix(1, dim, T(1)));
  params.add(name + ".beta", Tensor<T>::matrix(1, dim));
}

}  // namespace

template <typename T>
void init_encoder_params(ParamStore<T>& params, const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.dim;
  Rng cls_rng = param_rng(seed, "encoder.cls");
  params.add("encoder.cls", normal_tensor<T>(1, d, 1.0 / std::sqrt(static_cast<double>(d)), cls_rng));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = layer_prefix(l);
    for (const char* m : {"attn.q", "attn.k", "attn.v", "attn.o"}) add_linear(params, p + m, d, d, seed);
    add_norm(params, p + "ln1", d);
    add_norm(params, p + "ln2", d);
  }
  add_linear(params, "encoder.ffn.1", d, config.ffn_hidden, seed);
  add_linear(params, "encoder.ffn.2", config.ffn_hidden, d, seed);
}

template <typename T>
Var multi_head_attention(Graph<T>& g, ParamStore<T>& params, const EncoderConfig& config, std::size_t layer, Var h,
                         const Segments& seg) {
  const std::string p = layer_prefix(layer);
  const Var q = linear(g, params, p + "attn.q", h);
  const Var k = linear(g, params, p + "attn.k", h);
  const Var v = linear(g, params, p + "attn.v", h);
  const T scale = T(1) / std::sqrt(static_cast<T>(config.head_dim()));
  const T attn_drop = g.training() ? static_cast<T>(config.attention_dropout) : T(0);
  const Var a = g.segment_attention(q, k, v, seg, config.heads, scale, attn_drop);
  return linear(g, params, p + "attn.o", a);
}

template <typename T>
Var encoder_block(Graph<T>& g, ParamStore<T>& params, const EncoderConfig& config, std::size_t layer, Var h,
                  const Segments& seg) {
  const std::string p = layer_prefix(layer);
  const T rate = static_cast<T>(config.dropout);
  const Var attn = g.dropout(multi_head_attention(g, params, config, layer, h, seg), rate);
  const Var h1 = affine_norm(g, params, p + "ln1", g.add(h, attn));
  const Var hidden = g.dropout(g.relu(linear(g, params, "encoder.ffn.1", h1)), rate);
  const Var ffn = g.dropout(linear(g, params, "encoder.ffn.2", hidden), rate);
  return affine_norm(g, params, p + "ln2", g.add(h1, ffn));
}

template <typename T>
std::vector<std::size_t> canonical_permutation(const Tensor<T>& x, const Segments& seg) {
  std::vector<std::size_t> perm(x.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const std::size_t cols = x.cols();
  auto less = [&](std::size_t a, std::size_t b) {
    const T* ra = x.data.data() + a * cols;
    const T* rb = x.data.data() + b * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (ra[j] < rb[j]) return true;
      if (rb[j] < ra[j]) return false;
    }
    return false;
  };
  for (std::size_t s = 0; s < seg.count(); ++s) {
    if (seg.length(s) > 2) std::stable_sort(perm.begin() + seg.begin(s) + 1, perm.begin() + seg.end(s), less);
  }
  return perm;
}

template <typename T>
Var encode(Graph<T>& g, ParamStore<T>& params, const EncoderConfig& config, Var x, const Segments& seg) {
  if (seg.count() == 0) throw std::invalid_argument("encode: empty batch");
  for (std::size_t s = 0; s < seg.count(); ++s) {
    if (seg.length(s) < 2) throw std::invalid_argument("encode: a sequence has no features");
  }
  std::vector<std::size_t> perm;
  if (config.canonical_order) {
    perm = canonical_permutation(g.value(x), seg);
    x = g.gather_rows(x, perm);
  }
  Var cls_slots{};
  if (config.cls_every_layer) {
    // Rows: cls vector at CLS positions, zero elsewhere.
    const Var cls = g.param(params.at("encoder.cls"));
    const Var zero = g.input(Tensor<T>::matrix(1, config.dim));
    const Var both[] = {cls, zero};
    std::vector<std::size_t> idx(seg.total(), 1);
    for (std::size_t s = 0; s < seg.count(); ++s) idx[seg.begin(s)] = 0;
    cls_slots = g.gather_rows(g.concat_rows(both), idx);
  }
  Var h = x;
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.cls_every_layer && l > 0) h = g.add(h, cls_slots);
    h = encoder_block(g, params, config, l, h, seg);
  }
  if (config.canonical_order) {
    std::vector<std::size_t> inverse(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
    h = g.gather_rows(h, inverse);
  }
  return h;
}

template <typename T>
Var cls_rows(Graph<T>& g, Var h, const Segments& seg) {
  std::vector<std::size_t> idx(seg.count());
  for (std::size_t s = 0; s < seg.count(); ++s) idx[s] = seg.begin(s);
  return g.gather_rows(h, idx);
}

#define TABXFER_ENCODER_INSTANTIATE(T)                                                                            \
  template void init_encoder_params(ParamStore<T>&, const EncoderConfig&, std::uint64_t);                         \
  template Var multi_head_attention(Graph<T>&, ParamStore<T>&, const EncoderConfig&, std::size_t, Var,           \
                                    const Segments&);                                                             \
  template Var encoder_block(Graph<T>&, ParamStore<T>&, const EncoderConfig&, std::size_t, Var, const Segments&); \
  template Var encode(Graph<T>&, ParamStore<T>&, const EncoderConfig&, Var, const Segments&);                    \
  template Var cls_rows(Graph<T>&, Var, const Segments&);                                                         \
  template std::vector<std::size_t> canonical_permutation(const Tensor<T>&, const Segments&);

TABXFER_ENCODER_INSTANTIATE(float)
TABXFER_ENCODER_INSTANTIATE(double)

}  // namespace tabxfer
