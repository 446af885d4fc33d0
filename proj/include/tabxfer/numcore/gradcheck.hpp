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

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabxfer/numcore/graph.hpp"
#include "tabxfer/numcore/random.hpp"

namespace tabxfer::gradcheck {

// Builds a scalar loss from leaf variables bound to the probe point.
using ScalarFn = std::function<Var(Graph<double>&, std::span<const Var>)>;

// Max over coordinates of |analytic - numeric| / max(1, |analytic|), with
// central differences in 64-bit. Analytic gradients come from backward().
double max_relative_error(const ScalarFn& fn, const std::vector<Tensor<double>>& point, double step = 1e-5,
                          bool training = false);

// Registered primitives. Each is reduced to a scalar by a fixed random
// projection of its output.
std::vector<std::string> primitives();

// A random probe point respecting the primitive's preconditions (ReLU
// probed away from zero, log on positive inputs, layer_norm with variance
// above 0.1).
std::vector<Tensor<double>> random_point(std::string_view op, Rng& rng);

double finite_diff_check(std::string_view op, const std::vector<Tensor<double>>& point, double step = 1e-5);

}  // namespace tabxfer::gradcheck
