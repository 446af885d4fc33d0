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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tabxfer/numcore/adam.hpp"
#include "tabxfer/train/model.hpp"

namespace tabxfer {

enum class Objective { mtm, supcon, finetune };

std::string_view objective_name(Objective o);
Objective parse_objective(std::string_view s);

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;  // fine-tuning only
  std::uint64_t seed = 0;
  bool dropout = true;
  double clip_norm = 5.0;
  std::size_t eval_batch = 256;

  void validate(Objective objective) const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0: initialization kept
  double best_loss = std::numeric_limits<double>::infinity();
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  std::size_t epochs_run = 0;
  std::size_t skipped_batches = 0;  // supcon batches with a single class
  std::size_t skipped_steps = 0;    // optimizer steps dropped for non-finite gradients
  std::vector<std::string> skipped_tables;
};

// MTM loss of one batch of rows from one table. Masks come from mask_rng.
template <typename T>
Var mtm_batch_loss(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                   std::span<const std::size_t> rows, Rng& mask_rng);

// Supervised contrastive loss over k subsets of each row. Throws
// std::invalid_argument when the batch holds a single class.
template <typename T>
Var supcon_batch_loss(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                      std::span<const std::size_t> rows, Rng& subset_rng);

// Mean cross-entropy of the task head on whole rows.
template <typename T>
Var finetune_batch_loss(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                        std::span<const std::size_t> rows);

// Per epoch, tables are shuffled and their shuffled row batches visited
// round-robin. Keeps the parameters of the epoch with the lowest mean
// training loss. Initializes the model from the corpus if needed.
TrainResult pretrain_mtm(Model& model, std::span<const TableDataset> corpus, const TrainConfig& config);
TrainResult pretrain_supcon(Model& model, std::span<const TableDataset> corpus, const TrainConfig& config);

// Replaces any pre-training heads with a fresh task head, trains with
// cross-entropy, stops after `patience` epochs without a validation AUC
// improvement and restores the best epoch's parameters. Equal AUCs are
// ranked by validation cross-entropy.
TrainResult finetune(Model& model, const TableDataset& train, const TableDataset& validation, const TrainConfig& config);

// Class probabilities (rows x classes), evaluation mode.
Tensor<float> predict_proba(Model& model, const TableDataset& table, std::size_t batch = 256);

}  // namespace tabxfer
