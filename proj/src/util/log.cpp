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

#include "tabxfer/util/log.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

namespace tabxfer {
namespace {

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

std::ostream*& log_stream() {
  static std::ostream* os = &std::cerr;
  return os;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

}  // namespace

void set_log_stream(std::ostream* os) {
  std::lock_guard lock(log_mutex());
  log_stream() = os;
}

void log_event(std::string_view key, const nlohmann::json& value) {
  std::lock_guard lock(log_mutex());
  if (log_stream() == nullptr) return;
  nlohmann::json record{{"ts", timestamp()}, {"key", key}, {"value", value}};
  *log_stream() << record.dump() << '\n';
  log_stream()->flush();
}

}  // namespace tabxfer
