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

#include "tabxfer/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "tabxfer/util/errors.hpp"

namespace tabxfer {

double binary_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t positives = 0;
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share (i+1+j)/2; keep it doubled.
    const std::uint64_t doubled = static_cast<std::uint64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        ++positives;
        doubled_rank_sum += doubled;
      }
    }
    i = j;
  }
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DataError("auc: labels contain a single class");
  const std::uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return static_cast<double>(doubled_u) / static_cast<double>(2 * positives * negatives);
}

double auc(const Tensor<float>& probabilities, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (probabilities.rows() != n) throw std::invalid_argument("auc: one probability row per label required");
  const std::size_t k = probabilities.cols();
  std::vector<double> scores(n);
  std::vector<int> binary(n);
  if (k == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probabilities(i, 1);
      binary[i] = labels[i] == 1 ? 1 : 0;
    }
    return binary_auc(scores, binary);
  }
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probabilities(i, c);
      binary[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
      pos += static_cast<std::size_t>(binary[i]);
    }
    if (pos == 0 || pos == n) continue;
    total += binary_auc(scores, binary);
    ++used;
  }
  if (used == 0) throw DataError("auc: labels contain a single class");
  return total / static_cast<double>(used);
}

double cross_entropy(const Tensor<float>& probabilities, std::span<const int> labels) {
  if (probabilities.rows() != labels.size() || labels.empty()) {
    throw std::invalid_argument("cross_entropy: probabilities and labels disagree in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= probabilities.cols()) throw std::invalid_argument("cross_entropy: label out of range");
    total -= std::log(std::max(1e-12, static_cast<double>(probabilities(i, y))));
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace tabxfer
