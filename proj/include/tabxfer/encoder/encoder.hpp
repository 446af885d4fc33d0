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

#pragma once

#include <cstdint>

#include "tabxfer/numcore/graph.hpp"

namespace tabxfer {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t dim = 128;
  std::size_t ffn_hidden = 256;
  std::size_t heads = 8;
  double dropout = 0.3;            // sublayer outputs and FFN hidden units
  double attention_dropout = 0.3;  // attention probabilities
  bool cls_every_layer = false;    // re-add encoder.cls at the CLS slot before each block
  // Feed each sequence to the blocks in a content-determined order (CLS
  // first) and undo the permutation afterwards, so outputs do not depend on
  // column order even bitwise.
  bool canonical_order = true;

  std::size_t head_dim() const { return dim / heads; }
  void validate() const;
};

// encoder.cls, per-layer attention and layer-norm parameters, and the single
// shared feed-forward set encoder.ffn.*.
template <typename T>
void init_encoder_params(ParamStore<T>& params, const EncoderConfig& config, std::uint64_t seed);

// Multi-head self-attention within each segment, including output projection.
template <typename T>
Var multi_head_attention(Graph<T>& g, ParamStore<T>& params, const EncoderConfig& config, std::size_t layer, Var h,
                         const Segments& seg);

// Post-norm block: LN(H + MHA(H)) then LN(. + FFN(.)), FFN shared by layers.
template <typename T>
Var encoder_block(Graph<T>& g, ParamStore<T>& params, const EncoderConfig& config, std::size_t layer, Var h,
                  const Segments& seg);

// Runs every block over x (positions x d), where each segment starts with its
// CLS position. Returns outputs in the input's position order.
template <typename T>
Var encode(Graph<T>& g, ParamStore<T>& params, const EncoderConfig& config, Var x, const Segments& seg);

// Row i is the output at the first position of segment i.
template <typename T>
Var cls_rows(Graph<T>& g, Var h, const Segments& seg);

// Content order used when canonical_order is on: CLS stays first, other
// rows sorted lexicographically by value.
template <typename T>
std::vector<std::size_t> canonical_permutation(const Tensor<T>& x, const Segments& seg);

}  // namespace tabxfer
