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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabxfer/embed/provider.hpp"
#include "tabxfer/ingest/table.hpp"
#include "tabxfer/numcore/graph.hpp"
#include "tabxfer/util/text.hpp"

namespace tabxfer {

enum class Pooling { average, max, self_attention, none };

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view s);

struct EmbedConfig {
  ProviderMode mode = ProviderMode::hashed;
  std::size_t token_dim = 0;  // hashed mode; 0 means the model width
  std::uint64_t hash_seed = 0x51a7e5eedull;
  std::string lookup_path;
  // Unset: trainable in hashed mode, frozen in lookup mode.
  std::optional<bool> trainable_tokens;
  Pooling pooling = Pooling::average;
  std::string phrase_template = "{name} is {value}";

  bool tokens_trainable() const { return trainable_tokens.value_or(mode == ProviderMode::hashed); }
};

// Replaces {name} and {value} in the template.
std::string build_phrase(std::string_view column_name, std::string_view value,
                         std::string_view phrase_template = "{name} is {value}");

// Pools token vectors (rows) into one row. Pooling::none returns the input.
// The self-attention variant needs the learned query (1 x dim).
Tensor<float> pool_tokens(const Tensor<float>& tokens, Pooling strategy, const Tensor<float>* query = nullptr);

// One encoder input sequence: a table row restricted to `columns` (schema
// indices, in sequence order). `masked`, when non-empty, runs parallel to
// `columns`.
struct RowView {
  std::size_t row = 0;
  std::vector<std::size_t> columns;
  std::vector<std::uint8_t> masked;
};

std::vector<RowView> full_views(const TableDataset& table, std::span<const std::size_t> rows);

struct EmbeddedBatch {
  Var x;                                    // positions x d
  Segments rows;                            // per view: CLS then features
  std::vector<std::size_t> feature_first;   // first position of each feature, view-major
  std::vector<std::size_t> feature_positions;  // non-CLS positions, feature-major
  Segments feature_spans;                   // over feature_positions
  bool single_position = true;              // every feature is one position
};

class Embedder {
 public:
  Embedder(EmbedConfig config, std::size_t model_dim);
  Embedder(EmbedConfig config, std::size_t model_dim, EmbeddingProvider provider);

  const EmbedConfig& config() const { return config_; }
  const EmbeddingProvider& provider() const { return provider_; }
  std::size_t model_dim() const { return model_dim_; }
  std::size_t token_dim() const { return provider_.dim(); }
  bool projected() const { return provider_.dim() != model_dim_; }

  Vocabulary& vocabulary() { return vocab_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  // Adds every token the table can produce (headers, phrases, raw values).
  void register_table(const TableDataset& table);
  void register_text(std::string_view text);

  // embed.tokens (when trainable), embed.proj.w (when widths differ) and
  // embed.pool.query (self-attention pooling). Freezes the vocabulary.
  template <typename T>
  void init_params(ParamStore<T>& params, std::uint64_t seed);

  std::vector<std::string> header_tokens(const std::string& column_name) const { return tokenize(column_name); }
  std::vector<std::string> phrase_tokens(const std::string& column_name, const std::string& value) const;

  // Builds the encoder input for a batch of views. Bank rows are pooled
  // once per distinct phrase or header. Masked features become
  // mtm.mask + c^j; the CLS vector is encoder.cls.
  template <typename T>
  EmbeddedBatch embed(Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                      std::span<const RowView> views) const;

  // Per-feature outputs from encoder outputs H (token-level pooling
  // averages a feature's positions).
  template <typename T>
  Var feature_outputs(Graph<T>& g, Var h, const EmbeddedBatch& batch) const;

  // Pooled, projected embeddings of arbitrary token lists, as constants.
  template <typename T>
  Tensor<T> text_embeddings(ParamStore<T>& params, const std::vector<std::vector<std::string>>& texts) const;

  // MTM reconstruction target for a categorical value: the value's own
  // tokens, without the column name. Rows are values.
  template <typename T>
  Tensor<T> categorical_targets(ParamStore<T>& params, const std::vector<std::string>& values) const;

  template <typename T>
  Tensor<T> header_embedding(ParamStore<T>& params, const std::string& column_name) const;
  template <typename T>
  Tensor<T> encode_categorical(ParamStore<T>& params, const std::string& column_name, const std::string& value) const;
  template <typename T>
  Tensor<T> encode_numerical(ParamStore<T>& params, const std::string& column_name, double x) const;
  // (num features) x d, schema order.
  template <typename T>
  Tensor<T> encode_row(ParamStore<T>& params, const TableDataset& table, std::size_t row) const;

 private:
  template <typename T>
  Var token_matrix(Graph<T>& g, ParamStore<T>& params, const std::vector<std::string>& tokens) const;
  template <typename T>
  Var pool(Graph<T>& g, ParamStore<T>& params, Var tokens, const Segments& seg) const;

  EmbedConfig config_;
  std::size_t model_dim_;
  EmbeddingProvider provider_;
  Vocabulary vocab_;
  mutable std::set<std::string> empty_value_columns_;
};

}  // namespace tabxfer
