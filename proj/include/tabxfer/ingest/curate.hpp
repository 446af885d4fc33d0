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
#include <string>
#include <unordered_set>
#include <vector>

#include "tabxfer/ingest/table.hpp"

namespace tabxfer {

class Wordlist {
 public:
  Wordlist() = default;
  explicit Wordlist(std::vector<std::string> words);
  // One word per line; blank lines and '#' comments skipped; lowercased.
  static Wordlist load(const std::filesystem::path& path);

  bool contains(const std::string& word) const { return words_.contains(word); }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

 private:
  std::unordered_set<std::string> words_;
};

struct SemanticReport {
  std::vector<bool> semantic;  // per column
  double fraction = 0.0;
};

// A name is semantic when any of its tokens with length >= 2 is a word.
bool is_semantic_name(const std::string& name, const Wordlist& words);
SemanticReport semantic_score(const std::vector<std::string>& column_names, const Wordlist& words);

struct CurationPolicy {
  double semantic_fraction_min = 0.5;
  double missing_fraction_max = 0.4;
  std::size_t max_features_before_prune = 100;
  std::size_t prune_keep_top = 100;
  std::filesystem::path wordlist_path;

  void validate() const;
};

enum class DiscardReason { none, low_semantic_fraction, excess_missing, no_rows, no_features };

std::string_view reason_name(DiscardReason r);

struct CurationResult {
  bool kept = false;
  DiscardReason reason = DiscardReason::none;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;  // e.g. "missing_fraction 0.45 > 0.40"
  TableDataset table;  // cleaned table when kept
  std::string record;  // JSON line for the curation log
};

// Screens the table, then fills missing cells with the column mode (ties
// resolve to the smallest value / lexicographically first string) and
// min-max scales numerical columns to [0, 1]. Columns with no observed
// value are dropped. Already-normalized columns are not rescaled, which
// makes curation idempotent.
CurationResult curate(const TableDataset& table, const CurationPolicy& policy, const Wordlist& words);

}  // namespace tabxfer
