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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabxfer/train/model.hpp"

namespace tabxfer {

inline constexpr char kCheckpointMagic[4] = {'C', 'T', 'B', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingProvenance {
  std::string objective = "none";
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  std::string corpus_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> label_names;  // task head classes, if any

  nlohmann::json to_json() const;
  static TrainingProvenance from_json(const nlohmann::json& j);
};

// SHA-256 (hex) over table names, schemas, cells and labels, in name order.
std::string corpus_digest(std::span<const TableDataset> corpus);

// Layout, little-endian:
//   "CTB1" | u32 version | u64 n | n bytes JSON {model, vocabulary, provenance}
//   | u64 count | count x (u32 name_len | name | u32 rank | rank x u64 dim |
//   product(dims) x f32)
// Tensors are written in name order; nothing time-dependent is stored, so
// equal models give equal bytes.
void write_checkpoint(std::ostream& out, const Model& model, const TrainingProvenance& provenance);
void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainingProvenance& provenance);

struct LoadedCheckpoint {
  Model model;
  TrainingProvenance provenance;
};

LoadedCheckpoint read_checkpoint(std::istream& in);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tabxfer
