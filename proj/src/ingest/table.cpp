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

#include "tabxfer/ingest/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "tabxfer/ingest/csv.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/text.hpp"

namespace tabxfer {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::categorical:
      return "categorical";
    case ColumnKind::numerical:
      return "numerical";
    case ColumnKind::label:
      return "label";
  }
  return "?";
}

ColumnKind parse_kind(std::string_view s) {
  const std::string k = to_lower(s);
  if (k == "categorical" || k == "cat") return ColumnKind::categorical;
  if (k == "numerical" || k == "num" || k == "numeric") return ColumnKind::numerical;
  if (k == "label") return ColumnKind::label;
  throw DataError("unknown column kind '" + std::string(s) + "'");
}

namespace {

bool is_missing_marker(std::string_view s) {
  static const std::set<std::string, std::less<>> markers{"", "?", "na", "n/a", "nan", "null"};
  return markers.contains(to_lower(s));
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

double TableDataset::missing_fraction() const {
  if (rows.empty() || schema.empty()) return 0.0;
  std::size_t missing = 0;
  for (const auto& r : rows) {
    for (const Cell& c : r) missing += c.missing ? 1 : 0;
  }
  return static_cast<double>(missing) / static_cast<double>(rows.size() * schema.size());
}

void TableDataset::refresh_stats() {
  for (std::size_t j = 0; j < schema.size(); ++j) {
    ColumnSpec& col = schema[j];
    std::size_t missing = 0;
    col.observed_min.reset();
    col.observed_max.reset();
    std::set<std::string> vocab;
    for (const auto& r : rows) {
      const Cell& c = r[j];
      if (c.missing) {
        ++missing;
        continue;
      }
      if (col.kind == ColumnKind::numerical) {
        col.observed_min = std::min(col.observed_min.value_or(c.number), c.number);
        col.observed_max = std::max(col.observed_max.value_or(c.number), c.number);
      } else {
        vocab.insert(c.text);
      }
    }
    col.category_vocab.assign(vocab.begin(), vocab.end());
    col.missing_fraction = rows.empty() ? 0.0 : static_cast<double>(missing) / static_cast<double>(rows.size());
  }
}

TableDataset TableDataset::select_columns(const std::vector<std::size_t>& columns) const {
  TableDataset out;
  out.name = name;
  out.label_spec = label_spec;
  out.label_names = label_names;
  out.labels = labels;
  out.provenance = provenance;
  for (std::size_t j : columns) out.schema.push_back(schema.at(j));
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<Cell> row;
    row.reserve(columns.size());
    for (std::size_t j : columns) row.push_back(r[j]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

TableDataset TableDataset::select_rows(const std::vector<std::size_t>& indices) const {
  TableDataset out;
  out.name = name;
  out.schema = schema;
  out.label_spec = label_spec;
  out.label_names = label_names;
  out.provenance = provenance;
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    if (labeled()) out.labels.push_back(labels.at(i));
  }
  return out;
}

bool TableDataset::same_data(const TableDataset& other) const {
  return schema == other.schema && rows == other.rows && label_spec == other.label_spec &&
         label_names == other.label_names && labels == other.labels;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  Manifest m;
  m.name = j.value("name", path.filename().string());
  if (const auto suffix = std::string(".manifest.json"); m.name.ends_with(suffix)) {
    m.name.resize(m.name.size() - suffix.size());
  }
  if (!j.contains("columns") || !j["columns"].is_array()) {
    throw DataError("manifest " + path.string() + ": 'columns' must be an array");
  }
  for (const json& c : j["columns"]) {
    const std::string name = c.at("name").get<std::string>();
    const ColumnKind kind = parse_kind(c.at("kind").get<std::string>());
    m.columns.emplace_back(name, kind);
    if (kind == ColumnKind::numerical && c.value("normalized", false)) {
      ColumnSpec s;
      s.name = name;
      s.kind = kind;
      s.normalized = true;
      const auto scale = c.value("scale", std::vector<double>{0.0, 1.0});
      if (scale.size() != 2) throw DataError("manifest: 'scale' for " + name + " must have two entries");
      s.scale_min = scale[0];
      s.scale_max = scale[1];
      m.scaling.push_back(s);
    }
  }
  if (j.contains("label") && !j["label"].is_null()) m.label = j["label"].get<std::string>();
  for (const auto& [name, kind] : m.columns) {
    if (kind != ColumnKind::label) continue;
    if (m.label && *m.label != name) throw DataError("manifest: label column declared as both " + *m.label + " and " + name);
    m.label = name;
  }
  if (j.contains("wordlist") && !j["wordlist"].is_null()) {
    fs::path w = j["wordlist"].get<std::string>();
    m.wordlist = w.is_relative() ? path.parent_path() / w : w;
  }
  return m;
}

TableDataset load_table(const fs::path& csv_path, const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const CsvTable csv = read_csv_file(csv_path);

  std::map<std::string, ColumnKind, std::less<>> kinds;
  for (const auto& [name, kind] : m.columns) {
    if (!kinds.emplace(name, kind).second) throw DataError("manifest: duplicate column " + name);
  }
  for (const auto& [name, kind] : m.columns) {
    if (std::find(csv.header.begin(), csv.header.end(), name) == csv.header.end()) {
      throw DataError("manifest column '" + name + "' is not in the CSV header of " + csv_path.string());
    }
  }
  std::set<std::string, std::less<>> seen;
  for (const auto& h : csv.header) {
    if (!kinds.contains(h)) throw DataError("CSV column '" + h + "' is not declared in " + manifest_path.string());
    if (!seen.insert(h).second) throw DataError("CSV header repeats column '" + h + "'");
  }
  if (m.label && !kinds.contains(*m.label)) throw DataError("manifest label column '" + *m.label + "' not declared");

  TableDataset t;
  t.name = m.name;
  t.provenance.source = csv_path.string();
  std::vector<std::size_t> feature_idx;
  std::optional<std::size_t> label_idx;
  for (std::size_t i = 0; i < csv.header.size(); ++i) {
    const ColumnKind kind = (m.label && csv.header[i] == *m.label) ? ColumnKind::label : kinds.at(csv.header[i]);
    if (kind == ColumnKind::label) {
      label_idx = i;
      continue;
    }
    ColumnSpec spec;
    spec.name = csv.header[i];
    spec.kind = kind;
    for (const ColumnSpec& s : m.scaling) {
      if (s.name == spec.name) {
        spec.normalized = true;
        spec.scale_min = s.scale_min;
        spec.scale_max = s.scale_max;
      }
    }
    t.schema.push_back(spec);
    feature_idx.push_back(i);
  }

  // Label classes.
  std::vector<std::string> raw_labels;
  std::size_t dropped = 0;
  if (label_idx) {
    ColumnSpec spec;
    spec.name = csv.header[*label_idx];
    spec.kind = ColumnKind::label;
    t.label_spec = spec;
    std::set<std::string> classes;
    for (const auto& r : csv.rows) {
      const std::string v(trim(r[*label_idx]));
      if (!is_missing_marker(v)) classes.insert(v);
    }
    t.label_names.assign(classes.begin(), classes.end());
    const bool numeric = std::all_of(t.label_names.begin(), t.label_names.end(),
                                     [](const std::string& s) { return parse_number(s).has_value(); });
    if (numeric) {
      std::stable_sort(t.label_names.begin(), t.label_names.end(),
                       [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
    }
  }

  for (const auto& r : csv.rows) {
    int label = -1;
    if (label_idx) {
      const std::string v(trim(r[*label_idx]));
      if (is_missing_marker(v)) {
        ++dropped;
        continue;
      }
      label = static_cast<int>(std::find(t.label_names.begin(), t.label_names.end(), v) - t.label_names.begin());
    }
    std::vector<Cell> row;
    row.reserve(feature_idx.size());
    for (std::size_t j = 0; j < feature_idx.size(); ++j) {
      const std::string_view raw = trim(r[feature_idx[j]]);
      Cell c;
      if (is_missing_marker(raw)) {
        c.missing = true;
      } else if (t.schema[j].kind == ColumnKind::numerical) {
        if (const auto v = parse_number(raw)) {
          c.number = *v;
        } else {
          c.missing = true;
          ++t.schema[j].unparseable;
        }
      } else {
        c.text = std::string(raw);
      }
      row.push_back(std::move(c));
    }
    t.rows.push_back(std::move(row));
    if (label_idx) t.labels.push_back(label);
  }
  if (label_idx && t.label_names.size() < 2) {
    throw DataError("table " + t.name + ": label column '" + t.label_spec->name + "' needs at least two classes");
  }
  if (dropped > 0) {
    t.provenance.curation_log.push_back(json{{"event", "dropped_unlabeled_rows"}, {"count", dropped}}.dump());
  }
  t.refresh_stats();
  return t;
}

fs::path manifest_path_for(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".manifest.json");
  return p;
}

void save_table(const TableDataset& table, const fs::path& directory) {
  fs::create_directories(directory);
  CsvTable csv;
  json columns = json::array();
  for (const ColumnSpec& c : table.schema) {
    csv.header.push_back(c.name);
    json entry{{"name", c.name}, {"kind", kind_name(c.kind)}};
    if (c.kind == ColumnKind::numerical && c.normalized) {
      entry["normalized"] = true;
      entry["scale"] = {c.scale_min, c.scale_max};
    }
    columns.push_back(entry);
  }
  if (table.labeled()) {
    csv.header.push_back(table.label_spec->name);
    columns.push_back({{"name", table.label_spec->name}, {"kind", "label"}});
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::vector<std::string> rec;
    for (std::size_t j = 0; j < table.schema.size(); ++j) {
      const Cell& c = table.rows[i][j];
      if (c.missing) {
        rec.emplace_back();
      } else {
        rec.push_back(table.schema[j].kind == ColumnKind::numerical ? format_number(c.number) : c.text);
      }
    }
    if (table.labeled()) rec.push_back(table.label_names.at(static_cast<std::size_t>(table.labels[i])));
    csv.rows.push_back(std::move(rec));
  }
  const fs::path csv_path = directory / (table.name + ".csv");
  write_csv_file(csv_path, csv);
  json manifest{{"name", table.name}, {"columns", columns}};
  if (table.labeled()) manifest["label"] = table.label_spec->name;
  std::ofstream out(manifest_path_for(csv_path));
  out << manifest.dump(2) << '\n';
}

std::vector<fs::path> list_tables(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw DataError("not a directory: " + directory.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(directory)) {
    const fs::path& p = entry.path();
    if (p.extension() == ".csv" && fs::exists(manifest_path_for(p))) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tabxfer
