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

#include <iosfwd>
#include <string_view>

#include <json.hpp>

namespace tabxfer {

// Line-delimited structured records: {"ts": ..., "key": ..., "value": ...}.
// Records go to stderr unless redirected; set_log_stream(nullptr) silences.
void set_log_stream(std::ostream* os);
void log_event(std::string_view key, const nlohmann::json& value);

}  // namespace tabxfer
