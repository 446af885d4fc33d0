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

#include "tabxfer/embed/provider.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tabxfer/numcore/random.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/text.hpp"

namespace tabxfer {

std::string_view provider_mode_name(ProviderMode m) { return m == ProviderMode::hashed ? "hashed" : "lookup_file"; }

ProviderMode parse_provider_mode(std::string_view s) {
  if (s == "hashed") return ProviderMode::hashed;
  if (s == "lookup_file" || s == "lookup") return ProviderMode::lookup_file;
  throw ConfigError("unknown embedding provider '" + std::string(s) + "'");
}

EmbeddingProvider EmbeddingProvider::hashed(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding provider: dim must be positive");
  EmbeddingProvider p;
  p.mode_ = ProviderMode::hashed;
  p.dim_ = dim;
  p.seed_ = seed;
  return p;
}

EmbeddingProvider EmbeddingProvider::from_file(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("embedding lookup: cannot open " + path.string());
  std::size_t dim = 0, count = 0;
  std::string line;
  if (!std::getline(in, line) || !(std::istringstream(line) >> dim >> count) || dim == 0) {
    throw DataError("embedding lookup " + path.string() + ": header must be '<dim> <count>'");
  }
  EmbeddingProvider p;
  p.mode_ = ProviderMode::lookup_file;
  p.dim_ = dim;
  p.seed_ = seed;
  p.source_ = path;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<float> v(dim);
    for (float& x : v) {
      if (!(fields >> x)) {
        throw DataError("embedding lookup " + path.string() + ": line " + std::to_string(line_no) + " has fewer than " +
                        std::to_string(dim) + " values");
      }
    }
    p.table_[to_lower(token)] = std::move(v);
  }
  if (p.table_.size() != count) {
    throw DataError("embedding lookup " + path.string() + ": header declares " + std::to_string(count) +
                    " tokens, found " + std::to_string(p.table_.size()));
  }
  return p;
}

bool EmbeddingProvider::known(std::string_view token) const {
  return mode_ == ProviderMode::hashed || table_.contains(std::string(token));
}

std::vector<float> EmbeddingProvider::hashed_vector(std::string_view token) const {
  Rng rng(mix64(fnv1a64(token) ^ seed_));
  std::vector<double> v(dim_);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

std::vector<float> EmbeddingProvider::vector(std::string_view token) const {
  if (mode_ == ProviderMode::lookup_file) {
    if (auto it = table_.find(std::string(token)); it != table_.end()) return it->second;
  }
  return hashed_vector(token);
}

void Vocabulary::add(const std::string& token) {
  if (index_.contains(token)) return;
  if (frozen_) throw std::logic_error("vocabulary is frozen; cannot add '" + token + "'");
  index_.emplace(token, 0);
  dirty_ = true;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  if (dirty_) reindex();
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& Vocabulary::tokens() const {
  if (dirty_) reindex();
  return tokens_;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) v.index_.emplace(std::move(t), 0);
  v.dirty_ = true;
  return v;
}

// Ids are positions in sorted order.
void Vocabulary::reindex() const {
  tokens_.clear();
  for (auto& [tok, id] : index_) {
    id = tokens_.size();
    tokens_.push_back(tok);
  }
  dirty_ = false;
}

}  // namespace tabxfer
