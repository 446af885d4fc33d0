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

#include "tabxfer/ingest/curate.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/text.hpp"

namespace tabxfer {
using nlohmann::json;

Wordlist::Wordlist(std::vector<std::string> words) {
  for (auto& w : words) {
    std::string lw = to_lower(trim(w));
    if (!lw.empty()) words_.insert(std::move(lw));
  }
}

Wordlist Wordlist::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("wordlist: cannot open " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.emplace_back(t);
  }
  Wordlist w(std::move(words));
  if (w.empty()) throw DataError("wordlist " + path.string() + " is empty");
  return w;
}

bool is_semantic_name(const std::string& name, const Wordlist& words) {
  for (const std::string& tok : tokenize(name)) {
    if (tok.size() >= 2 && words.contains(tok)) return true;
  }
  return false;
}

SemanticReport semantic_score(const std::vector<std::string>& column_names, const Wordlist& words) {
  if (words.empty()) throw DataError("semantic_score: wordlist is empty");
  SemanticReport r;
  std::size_t hits = 0;
  for (const auto& n : column_names) {
    const bool s = is_semantic_name(n, words);
    r.semantic.push_back(s);
    hits += s ? 1 : 0;
  }
  r.fraction = column_names.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(column_names.size());
  return r;
}

void CurationPolicy::validate() const {
  auto frac = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("curation policy: ") + name + " must lie in [0, 1]");
  };
  frac(semantic_fraction_min, "semantic_fraction_min");
  frac(missing_fraction_max, "missing_fraction_max");
  if (prune_keep_top == 0) throw ConfigError("curation policy: prune_keep_top must be positive");
}

std::string_view reason_name(DiscardReason r) {
  switch (r) {
    case DiscardReason::none:
      return "none";
    case DiscardReason::low_semantic_fraction:
      return "low_semantic_fraction";
    case DiscardReason::excess_missing:
      return "excess_missing";
    case DiscardReason::no_rows:
      return "no_rows";
    case DiscardReason::no_features:
      return "no_features";
  }
  return "?";
}

namespace {

CurationResult discard(const TableDataset& t, DiscardReason reason, double measured, double threshold,
                       std::string detail) {
  CurationResult r;
  r.reason = reason;
  r.measured = measured;
  r.threshold = threshold;
  r.detail = std::move(detail);
  r.record = json{{"table", t.name},
                  {"decision", "discard"},
                  {"reason", reason_name(reason)},
                  {"measured", measured},
                  {"threshold", threshold},
                  {"detail", r.detail}}
                 .dump();
  return r;
}

}  // namespace

CurationResult curate(const TableDataset& table, const CurationPolicy& policy, const Wordlist& words) {
  policy.validate();
  if (table.num_rows() == 0) return discard(table, DiscardReason::no_rows, 0.0, 1.0, "rows 0 < 1");
  if (table.num_features() == 0) return discard(table, DiscardReason::no_features, 0.0, 1.0, "features 0 < 1");

  std::vector<std::string> names;
  for (const auto& c : table.schema) names.push_back(c.name);
  const SemanticReport sem = semantic_score(names, words);
  if (sem.fraction < policy.semantic_fraction_min) {
    return discard(table, DiscardReason::low_semantic_fraction, sem.fraction, policy.semantic_fraction_min,
                   "semantic_fraction " + format_fixed(sem.fraction, 2) + " < " +
                       format_fixed(policy.semantic_fraction_min, 2));
  }
  const double missing = table.missing_fraction();
  if (missing > policy.missing_fraction_max) {
    return discard(table, DiscardReason::excess_missing, missing, policy.missing_fraction_max,
                   "missing_fraction " + format_fixed(missing, 2) + " > " + format_fixed(policy.missing_fraction_max, 2));
  }

  json actions = json::array();
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < table.num_features(); ++j) {
    if (table.schema[j].missing_fraction < 1.0) {
      keep.push_back(j);
    } else {
      actions.push_back({{"column", table.schema[j].name}, {"action", "dropped_empty_column"}});
    }
  }
  if (keep.empty()) return discard(table, DiscardReason::no_features, 0.0, 1.0, "features 0 < 1");
  TableDataset t = table.select_columns(keep);

  for (std::size_t j = 0; j < t.num_features(); ++j) {
    ColumnSpec& col = t.schema[j];
    std::size_t filled = 0;
    if (col.kind == ColumnKind::numerical) {
      std::map<double, std::size_t> counts;
      for (const auto& r : t.rows) {
        if (!r[j].missing) ++counts[r[j].number];
      }
      // std::map iterates ascending, so the first maximum is the smallest mode.
      const auto mode = std::max_element(counts.begin(), counts.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
      for (auto& r : t.rows) {
        if (r[j].missing) {
          r[j] = Cell{false, mode->first, {}};
          ++filled;
        }
      }
      if (!col.normalized) {
        const double lo = counts.begin()->first;
        const double hi = counts.rbegin()->first;
        col.normalized = true;
        col.scale_min = lo;
        col.scale_max = hi;
        if (lo == hi) {
          actions.push_back({{"column", col.name}, {"action", "constant_column_set_to_0.5"}});
          for (auto& r : t.rows) r[j].number = 0.5;
        } else {
          for (auto& r : t.rows) r[j].number = (r[j].number - lo) / (hi - lo);
        }
      }
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& r : t.rows) {
        if (!r[j].missing) ++counts[r[j].text];
      }
      const auto mode = std::max_element(counts.begin(), counts.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
      for (auto& r : t.rows) {
        if (r[j].missing) {
          r[j] = Cell{false, 0.0, mode->first};
          ++filled;
        }
      }
    }
    if (filled > 0) actions.push_back({{"column", col.name}, {"action", "filled_with_mode"}, {"cells", filled}});
  }
  t.refresh_stats();

  CurationResult r;
  r.kept = true;
  r.measured = missing;
  r.threshold = policy.missing_fraction_max;
  r.record = json{{"table", t.name},
                  {"decision", "keep"},
                  {"semantic_fraction", sem.fraction},
                  {"missing_fraction", missing},
                  {"semantic_scorer", "wordlist_heuristic"},
                  {"actions", actions}}
                 .dump();
  t.provenance.curation_log.push_back(r.record);
  r.table = std::move(t);
  return r;
}

}  // namespace tabxfer
