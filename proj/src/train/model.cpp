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

#include "tabxfer/train/model.hpp"

#include "tabxfer/numcore/init.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {
using nlohmann::json;

void ModelConfig::validate() const {
  encoder.validate();
  contrastive.validate();
  if (embed.mode == ProviderMode::lookup_file && embed.lookup_path.empty()) {
    throw ConfigError("embed: lookup_file mode needs lookup_path");
  }
}

json to_json(const ModelConfig& c) {
  json embed{{"mode", provider_mode_name(c.embed.mode)},
             {"token_dim", c.embed.token_dim},
             {"hash_seed", c.embed.hash_seed},
             {"lookup_path", c.embed.lookup_path},
             {"pooling", pooling_name(c.embed.pooling)},
             {"phrase_template", c.embed.phrase_template}};
  embed["trainable_tokens"] = c.embed.trainable_tokens ? json(*c.embed.trainable_tokens) : json(nullptr);
  return json{{"embed", embed},
              {"encoder",
               {{"layers", c.encoder.layers},
                {"dim", c.encoder.dim},
                {"ffn_hidden", c.encoder.ffn_hidden},
                {"heads", c.encoder.heads},
                {"dropout", c.encoder.dropout},
                {"attention_dropout", c.encoder.attention_dropout},
                {"cls_every_layer", c.encoder.cls_every_layer},
                {"canonical_order", c.encoder.canonical_order}}},
              {"mask",
               {{"rate", c.mask.rate},
                {"categorical_share", c.mask.categorical_share},
                {"max_resample", c.mask.max_resample},
                {"reconstruct_all", c.mask.reconstruct_all}}},
              {"contrastive",
               {{"subsets", c.contrastive.subsets},
                {"inclusion", c.contrastive.inclusion},
                {"temperature", c.contrastive.temperature},
                {"include_anchor", c.contrastive.include_anchor},
                {"projection_head", c.contrastive.projection_head}}}};
}

namespace {

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key) && !j[key].is_null()) {
    try {
      out = j[key].get<V>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  if (j.contains("embed")) {
    const json& e = j["embed"];
    if (e.contains("mode")) c.embed.mode = parse_provider_mode(e["mode"].get<std::string>());
    read(e, "token_dim", c.embed.token_dim);
    read(e, "hash_seed", c.embed.hash_seed);
    read(e, "lookup_path", c.embed.lookup_path);
    if (e.contains("pooling")) c.embed.pooling = parse_pooling(e["pooling"].get<std::string>());
    read(e, "phrase_template", c.embed.phrase_template);
    if (e.contains("trainable_tokens") && !e["trainable_tokens"].is_null()) {
      c.embed.trainable_tokens = e["trainable_tokens"].get<bool>();
    }
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    read(e, "layers", c.encoder.layers);
    read(e, "dim", c.encoder.dim);
    read(e, "ffn_hidden", c.encoder.ffn_hidden);
    read(e, "heads", c.encoder.heads);
    read(e, "dropout", c.encoder.dropout);
    c.encoder.attention_dropout = c.encoder.dropout;
    read(e, "attention_dropout", c.encoder.attention_dropout);
    read(e, "cls_every_layer", c.encoder.cls_every_layer);
    read(e, "canonical_order", c.encoder.canonical_order);
  }
  if (j.contains("mask")) {
    const json& m = j["mask"];
    read(m, "rate", c.mask.rate);
    read(m, "categorical_share", c.mask.categorical_share);
    read(m, "max_resample", c.mask.max_resample);
    read(m, "reconstruct_all", c.mask.reconstruct_all);
  }
  if (j.contains("contrastive")) {
    const json& m = j["contrastive"];
    read(m, "subsets", c.contrastive.subsets);
    read(m, "inclusion", c.contrastive.inclusion);
    read(m, "temperature", c.contrastive.temperature);
    read(m, "include_anchor", c.contrastive.include_anchor);
    read(m, "projection_head", c.contrastive.projection_head);
  }
  c.validate();
  return c;
}

Model::Model(ModelConfig config, std::uint64_t seed) : Model(config, seed, Embedder(config.embed, config.encoder.dim)) {}

Model::Model(ModelConfig config, std::uint64_t seed, Embedder embedder)
    : config_(std::move(config)), seed_(seed), embedder_(std::move(embedder)) {
  config_.validate();
}

void Model::initialize(std::span<const TableDataset> corpus) {
  if (initialized()) throw std::logic_error("model already initialized");
  for (const auto& t : corpus) embedder_.register_table(t);
  embedder_.init_params(params_, seed_);
  init_encoder_params(params_, config_.encoder, seed_);
}

void Model::add_mtm_heads() {
  if (!params_.contains("mtm.mask")) init_mtm_params(params_, config_.encoder.dim, seed_);
}

void Model::add_supcon_head() {
  if (config_.contrastive.projection_head && !params_.contains("supcon.proj.w")) {
    init_supcon_params(params_, config_.encoder.dim, seed_);
  }
}

void Model::reset_task_head(int num_classes) {
  if (num_classes < 2) throw DataError("task head needs at least two classes, got " + std::to_string(num_classes));
  params_.erase_prefix("mtm.");
  params_.erase_prefix("supcon.");
  params_.erase_prefix("head.");
  Rng rng = param_rng(seed_, "head.w");
  params_.add("head.w", xavier_uniform<float>(config_.encoder.dim, static_cast<std::size_t>(num_classes), rng));
  params_.add("head.b", Tensor<float>::matrix(1, static_cast<std::size_t>(num_classes)));
}

template <typename T>
Var Model::encode_views(Graph<T>& g, ParamStore<T>& params, const TableDataset& table, std::span<const RowView> views,
                        EmbeddedBatch& batch) const {
  batch = embedder_.embed(g, params, table, views);
  return encode(g, params, config_.encoder, batch.x, batch.rows);
}

Tensor<float> Model::cls_embeddings(const TableDataset& table, std::span<const std::size_t> rows) {
  Graph<float> g;
  const auto views = full_views(table, rows);
  EmbeddedBatch batch;
  const Var h = encode_views(g, params_, table, views, batch);
  return g.value(cls_rows(g, h, batch.rows));
}

template Var Model::encode_views(Graph<float>&, ParamStore<float>&, const TableDataset&, std::span<const RowView>,
                                 EmbeddedBatch&) const;
template Var Model::encode_views(Graph<double>&, ParamStore<double>&, const TableDataset&, std::span<const RowView>,
                                 EmbeddedBatch&) const;

}  // namespace tabxfer
