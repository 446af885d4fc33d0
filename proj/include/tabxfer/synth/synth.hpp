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
#include <string>
#include <vector>

#include "tabxfer/ingest/table.hpp"

namespace tabxfer {

// A family of tables drawing columns from one shared vocabulary. Every row
// has a hidden z ~ U(0, 1); each column is a fixed noisy function of z
// (the same function in every table that uses it) and the label is 1[z > 0.5].
struct SynthConfig {
  std::size_t tables = 20;
  std::size_t rows = 200;
  std::size_t min_columns = 6;
  std::size_t max_columns = 10;
  double noise = 0.15;  // std of the additive noise on the z scale
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthColumn {
  std::string name;
  ColumnKind kind = ColumnKind::numerical;
  bool increasing = true;
  double curvature = 1.0;            // numerical: value = z^curvature before noise and direction
  std::vector<std::string> levels;   // categorical, ordered along z
};

const std::vector<SynthColumn>& synth_vocabulary();

TableDataset synth_table(const SynthConfig& config, std::size_t index);
std::vector<TableDataset> synth_family(const SynthConfig& config);

// `features` uniform numerical columns x0, x1, ...; label 1[x0 > 0.5].
TableDataset separable_table(std::size_t rows, std::size_t features, std::uint64_t seed);

}  // namespace tabxfer
