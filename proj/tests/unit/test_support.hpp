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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tabxfer/ingest/table.hpp"

namespace tabxfer::testing_support {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("tabxfer_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Cells are strings; numerical columns parse them and "" marks a missing
// cell. With labels the table gets classes "0".."k-1".
inline TableDataset make_table(const std::string& name, const std::vector<std::pair<std::string, ColumnKind>>& columns,
                               const std::vector<std::vector<std::string>>& cells, const std::vector<int>& labels = {}) {
  TableDataset t;
  t.name = name;
  for (const auto& [col, kind] : columns) {
    ColumnSpec c;
    c.name = col;
    c.kind = kind;
    c.normalized = kind == ColumnKind::numerical;
    t.schema.push_back(c);
  }
  for (const auto& r : cells) {
    std::vector<Cell> row;
    for (std::size_t j = 0; j < r.size(); ++j) {
      Cell c;
      c.missing = r[j].empty() && columns[j].second == ColumnKind::numerical;
      if (columns[j].second == ColumnKind::numerical) {
        if (!c.missing) c.number = std::stod(r[j]);
      } else {
        c.text = r[j];
      }
      row.push_back(c);
    }
    t.rows.push_back(row);
  }
  if (!labels.empty()) {
    ColumnSpec y;
    y.name = "target";
    y.kind = ColumnKind::label;
    t.label_spec = y;
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    for (int i = 0; i < k; ++i) t.label_names.push_back(std::to_string(i));
    t.labels = labels;
  }
  t.refresh_stats();
  return t;
}

inline std::string wordlist_path() { return std::string(TABXFER_DATA_DIR) + "/wordlist.txt"; }

}  // namespace tabxfer::testing_support
