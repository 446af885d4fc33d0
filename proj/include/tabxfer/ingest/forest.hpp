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
#include <vector>

#include "tabxfer/ingest/curate.hpp"
#include "tabxfer/ingest/table.hpp"

namespace tabxfer {

struct ForestConfig {
  std::size_t trees = 32;
  std::size_t max_depth = 8;
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
};

// Dense feature matrix for tree fitting: numerical cells as-is, categorical
// cells as their index in the column vocabulary, missing cells as -1.
std::vector<std::vector<double>> feature_matrix(const TableDataset& table);

// Total weighted Gini impurity decrease per feature, summed over a bagged
// ensemble of CART trees with sqrt(p) candidate features per split and
// normalized to sum to one (all zeros if no split was ever made).
std::vector<double> gini_importance(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                                    int num_classes, const ForestConfig& config, std::uint64_t seed);

// Keeps the prune_keep_top most important features (ties to the lower
// column index) in schema order, when the table has more than
// max_features_before_prune features. Otherwise returns it unchanged.
TableDataset feature_importance_prune(const TableDataset& table, const CurationPolicy& policy, std::uint64_t seed,
                                      const ForestConfig& config = {});

}  // namespace tabxfer
