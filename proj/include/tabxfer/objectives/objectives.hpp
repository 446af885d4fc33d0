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
#include <vector>

#include "tabxfer/ingest/table.hpp"
#include "tabxfer/numcore/graph.hpp"
#include "tabxfer/numcore/random.hpp"

namespace tabxfer {

struct MaskConfig {
  double rate = 0.35;               // expected overall masked fraction
  double categorical_share = 0.7;   // expected share of masked features that are categorical
  std::size_t max_resample = 1000;  // attempts before a degenerate configuration is reported
  bool reconstruct_all = false;     // MTM loss over every position instead of masked ones only

  void validate() const;
};

struct MaskRates {
  double categorical = 0.0;
  double numerical = 0.0;
};

// rate_cat = min(1, p * share * (a + b) / a); rate_num then restores the
// overall expectation p. Whatever one kind cannot absorb (rate clamped to
// 1) is handed to the other.
MaskRates mask_rates(std::size_t n_cat, std::size_t n_num, const MaskConfig& config);

struct MaskPlan {
  std::vector<std::uint8_t> m;  // 1 = masked
  MaskRates rates;
  std::size_t attempts = 1;

  std::size_t masked() const;
};

// Bernoulli draw per feature with the rate of its kind; redrawn until at
// least one feature is masked and one is kept.
MaskPlan sample_mask(const std::vector<ColumnKind>& kinds, const MaskConfig& config, Rng& rng);
// Categorical features first, then numerical.
MaskPlan sample_mask(std::size_t n_cat, std::size_t n_num, const MaskConfig& config, Rng& rng);

// Value-level masking: rows with m = 1 become e_mask + headers[j].
Tensor<float> apply_mask(const Tensor<float>& e, const std::vector<std::uint8_t>& m, const Tensor<float>& e_mask,
                         const Tensor<float>& headers);

// mtm.mask (1 x d), mtm.num (d x 1), mtm.cat (d x d).
template <typename T>
void init_mtm_params(ParamStore<T>& params, std::size_t dim, std::uint64_t seed);

// One reconstructed feature.
struct MtmTarget {
  std::size_t row = 0;  // sequence index within the batch
  bool numerical = true;
  double value = 0.0;   // numerical target
  std::size_t cat_index = 0;  // row of the categorical target matrix
};

// Per sequence: mean squared error over its numerical targets plus mean
// (1 - cosine) over its categorical targets (a kind with no targets adds
// 0); averaged over sequences with at least one target. `h` holds the
// encoder output of each target, in `targets` order.
template <typename T>
Var mtm_loss(Graph<T>& g, ParamStore<T>& params, Var h, const std::vector<MtmTarget>& targets,
             const Tensor<T>& categorical_targets, std::size_t num_sequences);

struct ContrastiveConfig {
  std::size_t subsets = 3;         // k
  double inclusion = 0.5;          // q
  double temperature = 0.1;        // tau
  bool include_anchor = false;     // keep the anchor in the softmax denominator
  bool projection_head = true;     // supcon.proj on top of h^CLS

  void validate() const;
};

struct SubsetSample {
  std::size_t parent_row = 0;
  std::vector<std::size_t> features;
  int label = 0;
  std::size_t subset_id = 0;  // 1..k
};

std::vector<SubsetSample> sample_subsets(std::size_t row, std::size_t num_features, int label,
                                         const ContrastiveConfig& config, Rng& rng);

template <typename T>
void init_supcon_params(ParamStore<T>& params, std::size_t dim, std::uint64_t seed);

// Supervised contrastive loss over the rows of z with integer labels.
// Anchors without positives are skipped; the mean is over the remaining
// anchors. Throws std::invalid_argument when every label is equal.
template <typename T>
Var supcon_loss(Graph<T>& g, Var z, const std::vector<int>& labels, const ContrastiveConfig& config);

}  // namespace tabxfer
