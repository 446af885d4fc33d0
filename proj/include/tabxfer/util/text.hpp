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

#include <string>
#include <string_view>
#include <vector>

namespace tabxfer {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Lowercased word pieces: splits on whitespace, ASCII punctuation,
// underscores and camelCase boundaries ("HTTPServer" -> http, server).
// Digits stay attached to adjacent letters. Bytes >= 0x80 are treated as
// letters so UTF-8 text passes through. Never empty: if nothing survives
// splitting, the lowercased input is returned as the only token.
std::vector<std::string> tokenize(std::string_view text);

// Fixed-precision decimal, e.g. format_fixed(0.4, 2) == "0.40".
std::string format_fixed(double v, int digits);

}  // namespace tabxfer
