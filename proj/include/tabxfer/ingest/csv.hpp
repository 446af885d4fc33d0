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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tabxfer {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
// CRLF or LF records, quoted fields may span lines. A UTF-8 BOM is
// skipped. Ragged records raise DataError naming the 1-based line on
// which the record starts. Blank trailing lines are ignored.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::filesystem::path& path, const CsvTable& table);

}  // namespace tabxfer
