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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabxfer/ingest/table.hpp"
#include "tabxfer/train/trainer.hpp"

namespace tabxfer {

// Test-row sets of a stratified k-fold split: within each class, shuffled
// rows are dealt to folds in turn, continuing where the previous class
// stopped. Classes smaller than k are logged and spread best-effort.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Per class, round(fraction * count) of `rows` go to holdout, keeping at
// least one row on each side when the class has two or more.
HoldoutSplit stratified_holdout(std::span<const int> labels, std::span<const std::size_t> rows, double fraction,
                                std::uint64_t seed);

struct FewShotSpec {
  std::size_t shots = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FewShotSample {
  TableDataset train;
  TableDataset pool;
  std::vector<std::size_t> train_rows;  // indices into the source table
  std::vector<std::size_t> pool_rows;
};

// Exactly `shots` rows per class without replacement; the rest is the pool.
FewShotSample fewshot_sample(const TableDataset& dataset, const FewShotSpec& spec);

struct FoldData {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  TableDataset train;
  TableDataset validation;
  TableDataset test;
};

struct FoldResult {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::size_t test_rows = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<EpochRecord> history;
};

// Trains on fold.train (selecting with fold.validation) and returns class
// probabilities for fold.test. May fill training fields of `result`.
using FoldRunner = std::function<Tensor<float>(const FoldData& fold, FoldResult& result)>;

// Model factory for the fine-tuning runner: a fresh or checkpoint-loaded model.
using ModelFactory = std::function<Model(const FoldData& fold)>;

FoldRunner finetune_runner(ModelFactory factory, TrainConfig train);

struct EvalConfig {
  std::size_t folds = 5;
  double validation_fraction = 0.2;
  std::optional<std::size_t> fewshot;  // shots per class drawn from each fold's training portion
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalReport {
  std::string dataset;
  std::vector<FoldResult> folds;
  double mean_auc = 0.0;
  std::string config_digest;
  double wall_clock_seconds = 0.0;
};

// `config` is the resolved run configuration; it and the seed determine the
// report's config digest.
EvalReport kfold_eval(const TableDataset& dataset, const FoldRunner& runner, const EvalConfig& config,
                      const nlohmann::json& resolved_config);

// Deterministic content only (no wall-clock), so identical runs give
// identical bytes.
nlohmann::json report_to_json(const EvalReport& report);

// CSV rows "fold,epoch,train_loss,val_auc" for convergence plots.
std::string plot_data(const EvalReport& report);

}  // namespace tabxfer
