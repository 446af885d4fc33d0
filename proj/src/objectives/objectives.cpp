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

#include "tabxfer/objectives/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "tabxfer/numcore/init.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {

void MaskConfig::validate() const {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ConfigError("mask: degenerate rate " + std::to_string(rate) + " (must lie strictly between 0 and 1)");
  }
  if (!(categorical_share >= 0.0 && categorical_share <= 1.0)) {
    throw ConfigError("mask: categorical_share must lie in [0, 1]");
  }
}

MaskRates mask_rates(std::size_t n_cat, std::size_t n_num, const MaskConfig& config) {
  const double a = static_cast<double>(n_cat), b = static_cast<double>(n_num);
  const double expected = config.rate * (a + b);
  MaskRates r;
  if (n_cat == 0) {
    r.numerical = std::min(1.0, config.rate);
    return r;
  }
  if (n_num == 0) {
    r.categorical = std::min(1.0, config.rate);
    return r;
  }
  r.categorical = std::min(1.0, expected * config.categorical_share / a);
  r.numerical = (expected - r.categorical * a) / b;
  if (r.numerical > 1.0) {
    r.numerical = 1.0;
    r.categorical = std::min(1.0, (expected - b) / a);
  }
  r.numerical = std::clamp(r.numerical, 0.0, 1.0);
  return r;
}

std::size_t MaskPlan::masked() const {
  std::size_t n = 0;
  for (auto v : m) n += v;
  return n;
}

MaskPlan sample_mask(const std::vector<ColumnKind>& kinds, const MaskConfig& config, Rng& rng) {
  if (kinds.size() < 2) throw std::invalid_argument("sample_mask: need at least two features");
  if (!(config.rate > 0.0)) throw ConfigError("sample_mask: degenerate rate " + std::to_string(config.rate));
  std::size_t n_cat = 0;
  for (ColumnKind k : kinds) n_cat += k == ColumnKind::categorical ? 1 : 0;
  MaskPlan plan;
  plan.rates = mask_rates(n_cat, kinds.size() - n_cat, config);
  plan.m.assign(kinds.size(), 0);
  for (plan.attempts = 1; plan.attempts <= config.max_resample; ++plan.attempts) {
    for (std::size_t j = 0; j < kinds.size(); ++j) {
      const double p = kinds[j] == ColumnKind::categorical ? plan.rates.categorical : plan.rates.numerical;
      plan.m[j] = rng.bernoulli(p) ? 1 : 0;
    }
    const std::size_t k = plan.masked();
    if (k > 0 && k < kinds.size()) return plan;
  }
  throw ConfigError("sample_mask: degenerate rate " + std::to_string(config.rate) + ": no valid mask after " +
                    std::to_string(config.max_resample) + " draws");
}

MaskPlan sample_mask(std::size_t n_cat, std::size_t n_num, const MaskConfig& config, Rng& rng) {
  std::vector<ColumnKind> kinds(n_cat, ColumnKind::categorical);
  kinds.insert(kinds.end(), n_num, ColumnKind::numerical);
  return sample_mask(kinds, config, rng);
}

Tensor<float> apply_mask(const Tensor<float>& e, const std::vector<std::uint8_t>& m, const Tensor<float>& e_mask,
                         const Tensor<float>& headers) {
  if (e.rows() != m.size() || headers.rows() != m.size() || headers.cols() != e.cols() || e_mask.size() != e.cols()) {
    throw std::invalid_argument("apply_mask: length mismatch between embeddings, mask and headers");
  }
  Tensor<float> out = e;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    for (std::size_t j = 0; j < e.cols(); ++j) out(i, j) = e_mask.data[j] + headers(i, j);
  }
  return out;
}

template <typename T>
void init_mtm_params(ParamStore<T>& params, std::size_t dim, std::uint64_t seed) {
  Rng mask_rng = param_rng(seed, "mtm.mask");
  params.add("mtm.mask", normal_tensor<T>(1, dim, 1.0 / std::sqrt(static_cast<double>(dim)), mask_rng));
  Rng num_rng = param_rng(seed, "mtm.num");
  params.add("mtm.num", xavier_uniform<T>(dim, 1, num_rng));
  Rng cat_rng = param_rng(seed, "mtm.cat");
  params.add("mtm.cat", xavier_uniform<T>(dim, dim, cat_rng));
}

template <typename T>
Var mtm_loss(Graph<T>& g, ParamStore<T>& params, Var h, const std::vector<MtmTarget>& targets,
             const Tensor<T>& categorical_targets, std::size_t num_sequences) {
  if (targets.empty()) throw std::invalid_argument("mtm_loss: no reconstruction targets");
  if (g.value(h).rows() != targets.size()) throw std::invalid_argument("mtm_loss: one encoder row per target required");

  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_seq;  // row -> (num count, cat count)
  for (const MtmTarget& t : targets) {
    if (t.row >= num_sequences) throw std::invalid_argument("mtm_loss: target row out of range");
    auto& c = per_seq[t.row];
    (t.numerical ? c.first : c.second) += 1;
    if (!t.numerical && t.cat_index >= categorical_targets.rows()) {
      throw std::invalid_argument("mtm_loss: missing categorical target");
    }
  }
  const T seqs = static_cast<T>(per_seq.size());

  std::vector<std::size_t> num_idx, cat_idx, cat_rows;
  std::vector<T> num_values, num_w, cat_w;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const MtmTarget& t = targets[i];
    const auto& c = per_seq[t.row];
    if (t.numerical) {
      num_idx.push_back(i);
      num_values.push_back(static_cast<T>(t.value));
      num_w.push_back(T(1) / (seqs * static_cast<T>(c.first)));
    } else {
      cat_idx.push_back(i);
      cat_rows.push_back(t.cat_index);
      cat_w.push_back(T(1) / (seqs * static_cast<T>(c.second)));
    }
  }

  std::vector<Var> terms;
  if (!num_idx.empty()) {
    const std::size_t n = num_idx.size();
    const Var z = g.matmul(g.gather_rows(h, num_idx), g.param(params.at("mtm.num")));
    const Var se = g.squared_error(z, g.input(Tensor<T>(Shape{n, 1}, num_values)));
    terms.push_back(g.sum(g.mul(se, g.input(Tensor<T>(Shape{n, 1}, num_w)))));
  }
  if (!cat_idx.empty()) {
    const std::size_t n = cat_idx.size();
    const std::size_t d = categorical_targets.cols();
    Tensor<T> e = Tensor<T>::matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = categorical_targets.row(cat_rows[i]);
      std::copy(src.begin(), src.end(), e.row(i).begin());
    }
    const Var z = g.matmul(g.gather_rows(h, cat_idx), g.param(params.at("mtm.cat")));
    const Var cos = g.cosine_rows(z, g.input(std::move(e)));
    // sum w (1 - cos) = sum w - sum w cos
    T wsum = 0;
    for (T w : cat_w) wsum += w;
    const Var weighted = g.sum(g.mul(cos, g.input(Tensor<T>(Shape{n, 1}, cat_w))));
    terms.push_back(g.add_scalar(g.scale(weighted, T(-1)), wsum));
  }
  return terms.size() == 1 ? terms[0] : g.add(terms[0], terms[1]);
}

void ContrastiveConfig::validate() const {
  if (subsets == 0) throw ConfigError("contrastive: subsets must be positive");
  if (!(inclusion > 0.0 && inclusion <= 1.0)) throw ConfigError("contrastive: inclusion must lie in (0, 1]");
  if (!(temperature > 0.0)) throw ConfigError("contrastive: temperature must be positive");
}

std::vector<SubsetSample> sample_subsets(std::size_t row, std::size_t num_features, int label,
                                         const ContrastiveConfig& config, Rng& rng) {
  if (num_features < 1) throw std::invalid_argument("sample_subsets: row has no features");
  std::vector<SubsetSample> out;
  for (std::size_t s = 0; s < config.subsets; ++s) {
    SubsetSample sample{row, {}, label, s + 1};
    while (sample.features.empty()) {
      for (std::size_t j = 0; j < num_features; ++j) {
        if (rng.bernoulli(config.inclusion)) sample.features.push_back(j);
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

template <typename T>
void init_supcon_params(ParamStore<T>& params, std::size_t dim, std::uint64_t seed) {
  Rng rng = param_rng(seed, "supcon.proj.w");
  params.add("supcon.proj.w", xavier_uniform<T>(dim, dim, rng));
  params.add("supcon.proj.b", Tensor<T>::matrix(1, dim));
}

template <typename T>
Var supcon_loss(Graph<T>& g, Var z, const std::vector<int>& labels, const ContrastiveConfig& config) {
  const std::size_t n = labels.size();
  if (g.value(z).rows() != n) throw std::invalid_argument("supcon_loss: one label per embedding required");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw std::invalid_argument("supcon_loss: batch has a single label (no negatives)");
  }
  std::vector<std::size_t> positives(n, 0);
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < n; ++p) positives[i] += (p != i && labels[p] == labels[i]) ? 1 : 0;
    anchors += positives[i] > 0 ? 1 : 0;
  }
  if (anchors == 0) throw std::invalid_argument("supcon_loss: no anchor has a positive");

  const Var u = g.l2_normalize_rows(z);
  Var logits = g.scale(g.matmul_nt(u, u), static_cast<T>(1.0 / config.temperature));
  if (!config.include_anchor) {
    Tensor<T> diag = Tensor<T>::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) diag(i, i) = T(-1e9);
    logits = g.add(logits, g.input(std::move(diag)));
  }
  const Var logp = g.log_softmax(logits);
  Tensor<T> w = Tensor<T>::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (positives[i] == 0) continue;
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) {
        w(i, p) = T(-1) / (static_cast<T>(positives[i]) * static_cast<T>(anchors));
      }
    }
  }
  return g.sum(g.mul(logp, g.input(std::move(w))));
}

#define TABXFER_OBJECTIVES_INSTANTIATE(T)                                                                         \
  template void init_mtm_params(ParamStore<T>&, std::size_t, std::uint64_t);                                      \
  template Var mtm_loss(Graph<T>&, ParamStore<T>&, Var, const std::vector<MtmTarget>&, const Tensor<T>&,          \
                        std::size_t);                                                                             \
  template void init_supcon_params(ParamStore<T>&, std::size_t, std::uint64_t);                                   \
  template Var supcon_loss(Graph<T>&, Var, const std::vector<int>&, const ContrastiveConfig&);

TABXFER_OBJECTIVES_INSTANTIATE(float)
TABXFER_OBJECTIVES_INSTANTIATE(double)

}  // namespace tabxfer
