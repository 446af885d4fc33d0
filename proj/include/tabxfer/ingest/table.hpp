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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tabxfer {

enum class ColumnKind { categorical, numerical, label };

std::string_view kind_name(ColumnKind kind);
ColumnKind parse_kind(std::string_view s);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  std::optional<double> observed_min;  // numerical only
  std::optional<double> observed_max;
  std::vector<std::string> category_vocab;  // categorical only, sorted
  double missing_fraction = 0.0;
  std::size_t unparseable = 0;  // numerical cells that failed to parse

  // Set once values have been min-max scaled; scale_min/scale_max are the
  // raw range that was mapped onto [0, 1].
  bool normalized = false;
  double scale_min = 0.0;
  double scale_max = 1.0;

  bool operator==(const ColumnSpec&) const = default;
};

struct Cell {
  bool missing = false;
  double number = 0.0;  // numerical columns
  std::string text;     // categorical columns

  bool operator==(const Cell&) const = default;
};

struct Provenance {
  std::string source;
  std::vector<std::string> curation_log;  // one JSON object per line
};

// A typed table. `schema` lists the feature columns only; the label column
// (if any) is described by `label_spec` and its values live in `labels`,
// zero-based into `label_names`.
struct TableDataset {
  std::string name;
  std::vector<ColumnSpec> schema;
  std::vector<std::vector<Cell>> rows;
  std::optional<ColumnSpec> label_spec;
  std::vector<std::string> label_names;
  std::vector<int> labels;
  Provenance provenance;

  bool labeled() const { return label_spec.has_value(); }
  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_features() const { return schema.size(); }
  int num_classes() const { return static_cast<int>(label_names.size()); }
  double missing_fraction() const;

  // Recomputes observed ranges, vocabularies and missing fractions.
  void refresh_stats();

  // Keeps the listed feature columns, in the given order.
  TableDataset select_columns(const std::vector<std::size_t>& columns) const;
  TableDataset select_rows(const std::vector<std::size_t>& rows) const;

  // Data equality; provenance is ignored.
  bool same_data(const TableDataset& other) const;
};

// Manifest (JSON):
//   {"name": "...", "label": "y", "wordlist": "words.txt",
//    "columns": [{"name": "age", "kind": "numerical"},
//                {"name": "y", "kind": "label"}, ...]}
// Numerical entries may also carry "normalized": true and
// "scale": [min, max]. Relative wordlist paths resolve against the
// manifest's directory.
struct Manifest {
  std::string name;
  std::vector<std::pair<std::string, ColumnKind>> columns;
  std::optional<std::string> label;
  std::optional<std::filesystem::path> wordlist;
  std::vector<ColumnSpec> scaling;  // numerical columns carrying scale info
};

Manifest read_manifest(const std::filesystem::path& path);

// Loads a CSV according to its manifest. Numerical cells that are empty or
// a missing marker (?, NA, N/A, NaN, null) are missing; cells that fail to
// parse are missing and counted in ColumnSpec::unparseable. Rows without a
// label are dropped. Label classes are ordered numerically when every
// label parses as a number, lexicographically otherwise.
TableDataset load_table(const std::filesystem::path& csv_path, const std::filesystem::path& manifest_path);

// <dir>/<name>.csv and <dir>/<name>.manifest.json
std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path);
void save_table(const TableDataset& table, const std::filesystem::path& directory);

// Every <name>.csv in a directory that has a sibling manifest, sorted by name.
std::vector<std::filesystem::path> list_tables(const std::filesystem::path& directory);

}  // namespace tabxfer
