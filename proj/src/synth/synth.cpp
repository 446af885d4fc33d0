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

#include "tabxfer/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabxfer/numcore/random.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {
namespace {

SynthColumn num(std::string name, bool increasing, double curvature) {
  return {std::move(name), ColumnKind::numerical, increasing, curvature, {}};
}

SynthColumn cat(std::string name, std::vector<std::string> levels) {
  return {std::move(name), ColumnKind::categorical, true, 1.0, std::move(levels)};
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

TableDataset make_table(std::string name, std::vector<ColumnSpec> schema) {
  TableDataset t;
  t.name = std::move(name);
  t.schema = std::move(schema);
  ColumnSpec label;
  label.name = "target";
  label.kind = ColumnKind::label;
  t.label_spec = label;
  t.label_names = {"0", "1"};
  return t;
}

}  // namespace

void SynthConfig::validate() const {
  if (tables < 1 || rows < 2) throw ConfigError("synth: need at least one table of two rows");
  if (min_columns < 2 || max_columns < min_columns || max_columns > synth_vocabulary().size()) {
    throw ConfigError("synth: column range must satisfy 2 <= min <= max <= vocabulary size");
  }
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be non-negative");
}

const std::vector<SynthColumn>& synth_vocabulary() {
  static const std::vector<SynthColumn> vocab = {
      num("age", true, 1.0),
      num("income", false, 1.0),
      num("blood_pressure", true, 2.0),
      num("glucose", true, 0.5),
      num("weight", false, 2.0),
      num("height", true, 1.0),
      num("heart_rate", false, 0.5),
      num("score", true, 1.5),
      num("temperature", false, 1.0),
      num("humidity", true, 0.7),
      num("wind_speed", false, 1.5),
      num("price", true, 1.0),
      num("rating", false, 0.7),
      num("distance", true, 2.0),
      num("duration", false, 1.0),
      num("count", true, 0.5),
      cat("smoker", {"never", "former", "current"}),
      cat("grade", {"poor", "fair", "good", "excellent"}),
      cat("status", {"stable", "watch", "critical"}),
      cat("region", {"north", "east", "south", "west"}),
      cat("color", {"green", "yellow", "orange", "red"}),
      cat("level", {"low", "medium", "high"}),
      cat("quality", {"bad", "average", "great"}),
      cat("activity", {"rest", "light", "moderate", "intense"}),
  };
  return vocab;
}

TableDataset synth_table(const SynthConfig& config, std::size_t index) {
  config.validate();
  const auto& vocab = synth_vocabulary();
  Rng rng(derive_seed({config.seed, 31, index}));

  std::vector<std::size_t> pick(vocab.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  rng.shuffle(pick.begin(), pick.end());
  pick.resize(config.min_columns + rng.below(config.max_columns - config.min_columns + 1));

  std::vector<ColumnSpec> schema;
  for (std::size_t c : pick) {
    ColumnSpec s;
    s.name = vocab[c].name;
    s.kind = vocab[c].kind;
    s.normalized = s.kind == ColumnKind::numerical;
    schema.push_back(std::move(s));
  }
  TableDataset t = make_table("synth_" + std::to_string(index), std::move(schema));

  for (std::size_t r = 0; r < config.rows; ++r) {
    const double z = rng.uniform();
    std::vector<Cell> row;
    for (std::size_t c : pick) {
      const SynthColumn& col = vocab[c];
      const double u = clamp01(z + config.noise * rng.normal());
      Cell cell;
      if (col.kind == ColumnKind::numerical) {
        const double v = std::pow(u, col.curvature);
        cell.number = col.increasing ? v : 1.0 - v;
      } else {
        const std::size_t n = col.levels.size();
        cell.text = col.levels[std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)))];
      }
      row.push_back(std::move(cell));
    }
    t.rows.push_back(std::move(row));
    t.labels.push_back(z > 0.5 ? 1 : 0);
  }
  t.provenance.source = "synth";
  t.refresh_stats();
  return t;
}

std::vector<TableDataset> synth_family(const SynthConfig& config) {
  std::vector<TableDataset> out;
  for (std::size_t i = 0; i < config.tables; ++i) out.push_back(synth_table(config, i));
  return out;
}

TableDataset separable_table(std::size_t rows, std::size_t features, std::uint64_t seed) {
  if (features < 1 || rows < 2) throw ConfigError("separable_table: need a feature and two rows");
  std::vector<ColumnSpec> schema;
  for (std::size_t j = 0; j < features; ++j) {
    ColumnSpec s;
    s.name = "x" + std::to_string(j);
    s.kind = ColumnKind::numerical;
    s.normalized = true;
    schema.push_back(std::move(s));
  }
  TableDataset t = make_table("separable", std::move(schema));
  Rng rng(derive_seed({seed, 32}));
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Cell> row(features);
    for (auto& c : row) c.number = rng.uniform();
    t.labels.push_back(row[0].number > 0.5 ? 1 : 0);
    t.rows.push_back(std::move(row));
  }
  t.provenance.source = "synth";
  t.refresh_stats();
  return t;
}

}  // namespace tabxfer
