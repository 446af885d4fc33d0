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
#include <span>
#include <vector>

#include <json.hpp>

#include "tabxfer/embed/embedder.hpp"
#include "tabxfer/encoder/encoder.hpp"
#include "tabxfer/ingest/table.hpp"
#include "tabxfer/objectives/objectives.hpp"

namespace tabxfer {

struct ModelConfig {
  EmbedConfig embed;
  EncoderConfig encoder;
  MaskConfig mask;
  ContrastiveConfig contrastive;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Embedder plus named parameters. Pre-training heads live under "mtm." and
// "supcon.", the downstream classifier under "head.".
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  Model(ModelConfig config, std::uint64_t seed, Embedder embedder);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  Embedder& embedder() { return embedder_; }
  const Embedder& embedder() const { return embedder_; }
  ParamStore<float>& params() { return params_; }
  const ParamStore<float>& params() const { return params_; }

  // Registers corpus tokens, then creates embedder and encoder parameters.
  void initialize(std::span<const TableDataset> corpus);
  bool initialized() const { return params_.contains("encoder.cls"); }

  void add_mtm_heads();
  void add_supcon_head();
  // Drops pre-training heads and any previous task head; adds head.w/head.b.
  void reset_task_head(int num_classes);

  // Encoder outputs for a batch of views; `batch` receives the layout.
  template <typename T>
  Var encode_views(Graph<T>& g, ParamStore<T>& params, const TableDataset& table, std::span<const RowView> views,
                   EmbeddedBatch& batch) const;

  // h^CLS for whole rows, evaluation mode (no dropout). rows x d.
  Tensor<float> cls_embeddings(const TableDataset& table, std::span<const std::size_t> rows);

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  Embedder embedder_;
  ParamStore<float> params_;
};

}  // namespace tabxfer
