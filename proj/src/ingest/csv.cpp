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

#include "tabxfer/ingest/csv.hpp"

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "tabxfer/util/errors.hpp"

namespace tabxfer {
namespace {

enum class State { field_start, unquoted, quoted, quote_in_quoted };

}  // namespace

CsvTable read_csv(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) pos = 3;

  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  State state = State::field_start;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool record_has_content = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    const bool blank = !record_has_content && record.size() == 1 && record[0].empty();
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else if (record.size() != table.header.size()) {
        throw DataError("csv: line " + std::to_string(record_line) + " has " + std::to_string(record.size()) +
                        " fields, header has " + std::to_string(table.header.size()));
      } else {
        table.rows.push_back(std::move(record));
      }
    }
    record.clear();
    record_has_content = false;
    state = State::field_start;
  };

  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    switch (state) {
      case State::field_start:
        if (c == '"') {
          state = State::quoted;
          record_has_content = true;
          break;
        }
        state = State::unquoted;
        [[fallthrough]];
      case State::unquoted:
        if (c == ',') {
          end_field();
          record_has_content = true;
          state = State::field_start;
        } else if (c == '\n' || c == '\r') {
          if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
          end_record();
          record_line = ++line;
        } else {
          field.push_back(c);
          record_has_content = true;
        }
        break;
      case State::quoted:
        if (c == '"') {
          state = State::quote_in_quoted;
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        break;
      case State::quote_in_quoted:
        if (c == '"') {
          field.push_back('"');
          state = State::quoted;
        } else if (c == ',') {
          end_field();
          state = State::field_start;
        } else if (c == '\n' || c == '\r') {
          if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
          end_record();
          record_line = ++line;
        } else {
          throw DataError("csv: line " + std::to_string(line) + ": unexpected character after closing quote");
        }
        break;
    }
  }
  if (state == State::quoted) throw DataError("csv: unterminated quoted field starting on line " + std::to_string(record_line));
  if (state != State::field_start || !record.empty()) end_record();
  if (table.header.empty()) throw DataError("csv: missing header row");
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv: cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace {

void write_field(std::ostream& out, const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) {
    out << f;
    return;
  }
  out << '"';
  for (char c : f) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_record(std::ostream& out, const std::vector<std::string>& record) {
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (i) out << ',';
    write_field(out, record[i]);
  }
  out << '\n';
}

}  // namespace

void write_csv(std::ostream& out, const CsvTable& table) {
  write_record(out, table.header);
  for (const auto& r : table.rows) write_record(out, r);
}

void write_csv_file(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("csv: cannot write " + path.string());
  write_csv(out, table);
}

}  // namespace tabxfer
