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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tabxfer {

enum class ProviderMode { hashed, lookup_file };

std::string_view provider_mode_name(ProviderMode m);
ProviderMode parse_provider_mode(std::string_view s);

// Token -> vector source standing in for a pre-trained text encoder.
// Hashed vectors are unit-norm Gaussian draws seeded by the token bytes,
// so they agree across processes. Lookup tables come from a text file:
// a header line "<dim> <count>" followed by "<token> <f1> ... <fdim>".
// Tokens missing from a lookup table fall back to the hashed vector.
class EmbeddingProvider {
 public:
  static EmbeddingProvider hashed(std::size_t dim, std::uint64_t seed);
  static EmbeddingProvider from_file(const std::filesystem::path& path, std::uint64_t seed);

  ProviderMode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const std::filesystem::path& source() const { return source_; }

  bool known(std::string_view token) const;
  std::vector<float> vector(std::string_view token) const;
  std::vector<float> hashed_vector(std::string_view token) const;

 private:
  ProviderMode mode_ = ProviderMode::hashed;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::filesystem::path source_;
  std::unordered_map<std::string, std::vector<float>> table_;
};

// Sorted token list with dense ids; frozen once model parameters exist.
class Vocabulary {
 public:
  void add(const std::string& token);
  std::optional<std::size_t> find(std::string_view token) const;
  std::size_t size() const { return tokens().size(); }
  const std::vector<std::string>& tokens() const;
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  static Vocabulary from_tokens(std::vector<std::string> tokens);

 private:
  void reindex() const;

  mutable std::map<std::string, std::size_t, std::less<>> index_;
  mutable std::vector<std::string> tokens_;
  mutable bool dirty_ = false;
  bool frozen_ = false;
};

}  // namespace tabxfer
