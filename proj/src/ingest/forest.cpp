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

#include "tabxfer/ingest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "tabxfer/numcore/random.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {
namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 1.0;
  for (double c : counts) s -= (c / total) * (c / total);
  return s;
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int k, const ForestConfig& config,
              Rng& rng, std::vector<double>& importance)
      : x_(x), y_(y), k_(static_cast<std::size_t>(k)), config_(config), rng_(rng), importance_(importance) {
    const std::size_t p = x.empty() ? 0 : x[0].size();
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
  }

  void grow(std::vector<std::size_t>& idx, std::size_t depth, double n_total) {
    const double n = static_cast<double>(idx.size());
    std::vector<double> counts(k_, 0.0);
    for (std::size_t i : idx) counts[static_cast<std::size_t>(y_[i])] += 1.0;
    const double impurity = gini(counts, n);
    if (depth >= config_.max_depth || idx.size() < config_.min_samples_split || impurity <= 0.0) return;

    const std::size_t p = x_[0].size();
    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), std::size_t{0});
    // Partial Fisher-Yates for the candidate subset.
    for (std::size_t i = 0; i < mtry_ && i < p; ++i) {
      std::swap(features[i], features[i + rng_.below(p - i)]);
    }

    double best_gain = 0.0;
    std::size_t best_feature = p;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> column(idx.size());
    for (std::size_t f = 0; f < std::min(mtry_, p); ++f) {
      const std::size_t feat = features[f];
      for (std::size_t i = 0; i < idx.size(); ++i) column[i] = {x_[idx[i]][feat], y_[idx[i]]};
      std::sort(column.begin(), column.end());
      std::vector<double> left(k_, 0.0);
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left[static_cast<std::size_t>(column[i].second)] += 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        std::vector<double> right(k_);
        for (std::size_t c = 0; c < k_; ++c) right[c] = counts[c] - left[c];
        const double gain = impurity - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = feat;
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best_feature == p) return;

    importance_[best_feature] += (n / n_total) * best_gain;
    std::vector<std::size_t> lo, hi;
    for (std::size_t i : idx) (x_[i][best_feature] <= best_threshold ? lo : hi).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    grow(lo, depth + 1, n_total);
    grow(hi, depth + 1, n_total);
  }

 private:
  const std::vector<std::vector<double>>& x_;
  const std::vector<int>& y_;
  std::size_t k_;
  const ForestConfig& config_;
  Rng& rng_;
  std::vector<double>& importance_;
  std::size_t mtry_;
};

}  // namespace

std::vector<std::vector<double>> feature_matrix(const TableDataset& table) {
  std::vector<std::vector<double>> x(table.num_rows(), std::vector<double>(table.num_features()));
  for (std::size_t j = 0; j < table.num_features(); ++j) {
    const ColumnSpec& col = table.schema[j];
    for (std::size_t i = 0; i < table.num_rows(); ++i) {
      const Cell& c = table.rows[i][j];
      if (c.missing) {
        x[i][j] = -1.0;
      } else if (col.kind == ColumnKind::numerical) {
        x[i][j] = c.number;
      } else {
        const auto it = std::lower_bound(col.category_vocab.begin(), col.category_vocab.end(), c.text);
        x[i][j] = static_cast<double>(it - col.category_vocab.begin());
      }
    }
  }
  return x;
}

std::vector<double> gini_importance(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                                    int num_classes, const ForestConfig& config, std::uint64_t seed) {
  if (x.empty()) return {};
  if (x.size() != y.size()) throw DataError("gini_importance: feature and label counts differ");
  const std::size_t n = x.size();
  std::vector<double> importance(x[0].size(), 0.0);
  for (std::size_t t = 0; t < config.trees; ++t) {
    Rng rng(derive_seed({seed, t}));
    std::vector<std::size_t> idx(n);
    if (config.bootstrap) {
      for (auto& i : idx) i = rng.below(n);
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    TreeBuilder(x, y, num_classes, config, rng, importance).grow(idx, 0, static_cast<double>(n));
  }
  const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
  if (total > 0.0) {
    for (double& v : importance) v /= total;
  }
  return importance;
}

TableDataset feature_importance_prune(const TableDataset& table, const CurationPolicy& policy, std::uint64_t seed,
                                      const ForestConfig& config) {
  if (!table.labeled()) throw DataError("feature_importance_prune: table " + table.name + " has no label column");
  if (table.num_features() <= policy.max_features_before_prune) return table;

  const auto importance = gini_importance(feature_matrix(table), table.labels, table.num_classes(), config, seed);
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  order.resize(std::min(order.size(), policy.prune_keep_top));
  std::sort(order.begin(), order.end());

  TableDataset out = table.select_columns(order);
  nlohmann::json kept = nlohmann::json::array();
  for (std::size_t j : order) kept.push_back(table.schema[j].name);
  out.provenance.curation_log.push_back(nlohmann::json{{"table", table.name},
                                                       {"event", "feature_importance_prune"},
                                                       {"features_before", table.num_features()},
                                                       {"features_after", order.size()},
                                                       {"seed", seed},
                                                       {"kept", kept}}
                                            .dump());
  return out;
}

}  // namespace tabxfer
