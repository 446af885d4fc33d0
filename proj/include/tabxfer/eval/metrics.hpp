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

#include <span>
#include <vector>

#include "tabxfer/numcore/tensor.hpp"

namespace tabxfer {

// Mann-Whitney AUC with ties counted one half. labels are 0/1. Computed
// from doubled integer rank sums, so the result is the correctly rounded
// value of the exact pair-count ratio.
double binary_auc(std::span<const double> scores, std::span<const int> labels);

// probabilities: rows x classes. Two classes use column 1; more classes
// give the macro average of one-vs-rest AUCs over classes present with
// both positives and negatives. Throws if labels hold a single class.
double auc(const Tensor<float>& probabilities, std::span<const int> labels);

// Mean negative log-probability of the true class; probabilities are
// floored at 1e-12.
double cross_entropy(const Tensor<float>& probabilities, std::span<const int> labels);

}  // namespace tabxfer
