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

#include "tabxfer/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "tabxfer/eval/metrics.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"

namespace tabxfer {

std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::mtm:
      return "mtm";
    case Objective::supcon:
      return "supcon";
    case Objective::finetune:
      return "finetune";
  }
  return "?";
}

Objective parse_objective(std::string_view s) {
  if (s == "mtm") return Objective::mtm;
  if (s == "supcon") return Objective::supcon;
  if (s == "finetune") return Objective::finetune;
  throw ConfigError("unknown objective '" + std::string(s) + "'");
}

void TrainConfig::validate(Objective objective) const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (batch_size < 1 || (objective == Objective::supcon && batch_size < 2)) {
    throw ConfigError("train: batch_size too small for " + std::string(objective_name(objective)));
  }
  if (eval_batch < 1) throw ConfigError("train: eval_batch must be positive");
}

template <typename T>
Var mtm_batch_loss(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                   std::span<const std::size_t> rows, Rng& mask_rng) {
  const MaskConfig& mc = model.config().mask;
  std::vector<ColumnKind> kinds;
  for (const auto& c : table.schema) kinds.push_back(c.kind);
  std::vector<RowView> views = full_views(table, rows);
  for (RowView& v : views) v.masked = sample_mask(kinds, mc, mask_rng).m;

  EmbeddedBatch batch;
  const Var h = model.encode_views(g, params, table, views, batch);
  const Var features = model.embedder().feature_outputs(g, h, batch);

  std::vector<MtmTarget> targets;
  std::vector<std::size_t> target_rows;
  std::vector<std::string> cat_values;
  std::map<std::string, std::size_t> cat_index;
  const std::size_t nf = table.num_features();
  for (std::size_t r = 0; r < views.size(); ++r) {
    for (std::size_t j = 0; j < nf; ++j) {
      if (!mc.reconstruct_all && !views[r].masked[j]) continue;
      const Cell& cell = table.rows[views[r].row][j];
      MtmTarget t;
      t.row = r;
      t.numerical = table.schema[j].kind == ColumnKind::numerical;
      if (t.numerical) {
        t.value = cell.number;
      } else {
        auto [it, fresh] = cat_index.try_emplace(cell.text, cat_values.size());
        if (fresh) cat_values.push_back(cell.text);
        t.cat_index = it->second;
      }
      targets.push_back(t);
      target_rows.push_back(r * nf + j);
    }
  }
  Tensor<T> cat_targets;
  if (!cat_values.empty()) cat_targets = model.embedder().categorical_targets(params, cat_values);
  return mtm_loss(g, params, g.gather_rows(features, target_rows), targets, cat_targets, views.size());
}

template <typename T>
Var supcon_batch_loss(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                      std::span<const std::size_t> rows, Rng& subset_rng) {
  const ContrastiveConfig& cc = model.config().contrastive;
  std::vector<RowView> views;
  std::vector<int> labels;
  for (std::size_t r : rows) {
    for (auto& s : sample_subsets(r, table.num_features(), table.labels.at(r), cc, subset_rng)) {
      views.push_back(RowView{r, std::move(s.features), {}});
      labels.push_back(s.label);
    }
  }
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw std::invalid_argument("supcon batch has a single class");
  }
  EmbeddedBatch batch;
  const Var h = model.encode_views(g, params, table, views, batch);
  Var z = cls_rows(g, h, batch.rows);
  if (cc.projection_head) {
    z = g.add_row(g.matmul(z, g.param(params.at("supcon.proj.w"))), g.param(params.at("supcon.proj.b")));
  }
  return supcon_loss(g, z, labels, cc);
}

namespace {

template <typename T>
Var task_logits(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                std::span<const std::size_t> rows) {
  const auto views = full_views(table, rows);
  EmbeddedBatch batch;
  const Var h = model.encode_views(g, params, table, views, batch);
  const Var cls = cls_rows(g, h, batch.rows);
  return g.add_row(g.matmul(cls, g.param(params.at("head.w"))), g.param(params.at("head.b")));
}

}  // namespace

template <typename T>
Var finetune_batch_loss(const Model& model, Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                        std::span<const std::size_t> rows) {
  const Var logp = g.log_softmax(task_logits(model, g, params, table, rows));
  const std::size_t k = g.value(logp).cols();
  Tensor<T> w = Tensor<T>::matrix(rows.size(), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int y = table.labels.at(rows[i]);
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw DataError("finetune: label outside the task head");
    w(i, static_cast<std::size_t>(y)) = T(-1) / static_cast<T>(rows.size());
  }
  return g.sum(g.mul(logp, g.input(std::move(w))));
}

namespace {

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  }
  return out;
}

// One optimizer step; returns the batch loss.
template <typename LossFn>
double step(Model& model, AdamState<float>& adam, const TrainConfig& config, std::uint64_t graph_seed,
            TrainResult& result, LossFn&& loss_fn) {
  ParamStore<float>& params = model.params();
  params.zero_grad();
  Graph<float> g({.training = config.dropout, .seed = graph_seed, .check_finite = true});
  double loss = 0.0;
  try {
    const Var l = loss_fn(g, params);
    loss = g.value(l).item();
    g.backward(l);
  } catch (const NumericError& e) {
    throw TrainingError(std::string("non-finite value during training: ") + e.what());
  }
  clip_grad_norm(params, config.clip_norm);
  if (!adam_step(params, adam)) ++result.skipped_steps;
  return loss;
}

struct Pretrainer {
  Model& model;
  std::span<const TableDataset> corpus;
  const TrainConfig& config;
  Objective objective;

  TrainResult run() {
    config.validate(objective);
    if (corpus.empty()) throw DataError("pretrain: empty corpus");
    if (objective == Objective::supcon) {
      for (const auto& t : corpus) {
        if (!t.labeled()) throw DataError("pretrain supcon: table " + t.name + " has no labels");
      }
    }
    if (!model.initialized()) model.initialize(corpus);
    if (objective == Objective::mtm) {
      model.add_mtm_heads();
    } else {
      model.add_supcon_head();
    }

    TrainResult result;
    std::vector<std::size_t> usable;
    for (std::size_t t = 0; t < corpus.size(); ++t) {
      if (corpus[t].num_features() < 2 || corpus[t].num_rows() == 0) {
        result.skipped_tables.push_back(corpus[t].name);
        log_event("pretrain.skip_table", {{"table", corpus[t].name}, {"features", corpus[t].num_features()}});
      } else {
        usable.push_back(t);
      }
    }
    if (usable.empty()) throw DataError("pretrain: no table has at least two features");

    AdamState<float> adam;
    adam.config.lr = config.lr;
    ParamStore<float> best = model.params();
    std::uint64_t global_step = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
      Rng order_rng(derive_seed({config.seed, 1, epoch}));
      std::vector<std::size_t> tables = usable;
      order_rng.shuffle(tables.begin(), tables.end());
      std::vector<std::vector<std::vector<std::size_t>>> batches;
      std::size_t rounds = 0;
      for (std::size_t t : tables) {
        batches.push_back(shuffled_batches(corpus[t].num_rows(), config.batch_size, order_rng));
        rounds = std::max(rounds, batches.back().size());
      }
      double total = 0.0;
      std::size_t steps = 0;
      for (std::size_t r = 0; r < rounds; ++r) {
        for (std::size_t ti = 0; ti < tables.size(); ++ti) {
          if (r >= batches[ti].size()) continue;
          const TableDataset& table = corpus[tables[ti]];
          const auto& rows = batches[ti][r];
          Rng sample_rng(derive_seed({config.seed, 3, epoch, tables[ti], r}));
          const std::uint64_t graph_seed = derive_seed({config.seed, 2, ++global_step});
          try {
            total += step(model, adam, config, graph_seed, result, [&](Graph<float>& g, ParamStore<float>& p) {
              return objective == Objective::mtm ? mtm_batch_loss(model, g, p, table, rows, sample_rng)
                                                 : supcon_batch_loss(model, g, p, table, rows, sample_rng);
            });
            ++steps;
          } catch (const std::invalid_argument& e) {
            if (objective != Objective::supcon) throw;
            ++result.skipped_batches;
          }
        }
      }
      const double mean = steps ? total / static_cast<double>(steps) : std::numeric_limits<double>::quiet_NaN();
      result.history.push_back({epoch, mean, std::numeric_limits<double>::quiet_NaN()});
      result.epochs_run = epoch;
      log_event("pretrain.epoch", {{"objective", objective_name(objective)}, {"epoch", epoch}, {"loss", mean}});
      if (std::isfinite(mean) && mean < result.best_loss) {
        result.best_loss = mean;
        result.best_epoch = epoch;
        best = model.params();
      }
    }
    model.params() = std::move(best);
    return result;
  }
};

}  // namespace

TrainResult pretrain_mtm(Model& model, std::span<const TableDataset> corpus, const TrainConfig& config) {
  return Pretrainer{model, corpus, config, Objective::mtm}.run();
}

TrainResult pretrain_supcon(Model& model, std::span<const TableDataset> corpus, const TrainConfig& config) {
  return Pretrainer{model, corpus, config, Objective::supcon}.run();
}

Tensor<float> predict_proba(Model& model, const TableDataset& table, std::size_t batch) {
  const std::size_t n = table.num_rows();
  if (n == 0) throw DataError("predict: table has no rows");
  Tensor<float> out;
  for (std::size_t i = 0; i < n; i += batch) {
    std::vector<std::size_t> rows(std::min(batch, n - i));
    std::iota(rows.begin(), rows.end(), i);
    Graph<float> g;
    const Tensor<float>& p = g.value(g.softmax(task_logits(model, g, model.params(), table, rows)));
    if (out.empty()) out = Tensor<float>::matrix(n, p.cols());
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * p.cols()));
  }
  return out;
}

TrainResult finetune(Model& model, const TableDataset& train, const TableDataset& validation,
                     const TrainConfig& config) {
  config.validate(Objective::finetune);
  if (!train.labeled()) throw DataError("finetune: table " + train.name + " has no labels");
  if (train.num_classes() < 2) throw DataError("finetune: need at least two classes");
  if (train.num_rows() == 0) throw DataError("finetune: empty training set");
  if (!model.initialized()) {
    const std::vector<TableDataset> corpus{train};
    model.initialize(corpus);
  }
  model.reset_task_head(train.num_classes());

  const bool use_auc = validation.num_rows() > 0 &&
                       std::set<int>(validation.labels.begin(), validation.labels.end()).size() >= 2;
  if (!use_auc) log_event("finetune.selection", "validation set lacks two classes; selecting by training loss");

  TrainResult result;
  AdamState<float> adam;
  adam.config.lr = config.lr;
  ParamStore<float> best = model.params();
  double best_primary = -std::numeric_limits<double>::infinity();
  double best_secondary = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::uint64_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(derive_seed({config.seed, 5, epoch}));
    double total = 0.0;
    std::size_t steps = 0;
    for (const auto& rows : shuffled_batches(train.num_rows(), config.batch_size, rng)) {
      const std::uint64_t graph_seed = derive_seed({config.seed, 6, ++global_step});
      total += step(model, adam, config, graph_seed, result, [&](Graph<float>& g, ParamStore<float>& p) {
        return finetune_batch_loss(model, g, p, train, rows);
      });
      ++steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(steps);
    if (use_auc) {
      const Tensor<float> probs = predict_proba(model, validation, config.eval_batch);
      rec.val_auc = auc(probs, validation.labels);
      rec.val_loss = cross_entropy(probs, validation.labels);
    }
    result.history.push_back(rec);
    result.epochs_run = epoch;
    log_event("finetune.epoch", {{"epoch", epoch},
                                 {"loss", rec.train_loss},
                                 {"val_auc", use_auc ? rec.val_auc : -1.0},
                                 {"val_loss", use_auc ? rec.val_loss : -1.0}});

    const double primary = use_auc ? rec.val_auc : -rec.train_loss;
    const double secondary = use_auc ? -rec.val_loss : 0.0;
    if (primary > best_primary || (primary == best_primary && secondary > best_secondary)) {
      best_primary = primary;
      best_secondary = secondary;
      result.best_epoch = epoch;
      result.best_loss = rec.train_loss;
      result.best_val_auc = rec.val_auc;
      best = model.params();
      stale = 0;
    } else if (++stale >= config.patience) {
      log_event("finetune.early_stop", {{"epoch", epoch}, {"best_epoch", result.best_epoch}});
      break;
    }
  }
  model.params() = std::move(best);
  return result;
}

#define TABXFER_TRAINER_INSTANTIATE(T)                                                                              \
  template Var mtm_batch_loss(const Model&, Graph<T>&, ParamStore<T>&, const TableDataset&,                         \
                              std::span<const std::size_t>, Rng&);                                                  \
  template Var supcon_batch_loss(const Model&, Graph<T>&, ParamStore<T>&, const TableDataset&,                      \
                                 std::span<const std::size_t>, Rng&);                                               \
  template Var finetune_batch_loss(const Model&, Graph<T>&, ParamStore<T>&, const TableDataset&,                    \
                                   std::span<const std::size_t>);

TABXFER_TRAINER_INSTANTIATE(float)
TABXFER_TRAINER_INSTANTIATE(double)

}  // namespace tabxfer
