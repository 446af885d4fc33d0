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

#include "tabxfer/eval/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "tabxfer/eval/metrics.hpp"
#include "tabxfer/util/digest.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"
#include "tabxfer/util/text.hpp"

namespace tabxfer {
namespace {

// Rows of each class in ascending label order, shuffled with `rng`.
std::map<int, std::vector<std::size_t>> rows_by_class(std::span<const int> labels, std::span<const std::size_t> rows,
                                                      Rng& rng) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t r : rows) out[labels[r]].push_back(r);
  for (auto& [_, v] : out) rng.shuffle(v.begin(), v.end());
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw ConfigError("folds must be at least 2");
  Rng rng(derive_seed({seed, 11}));
  const auto rows = all_rows(labels.size());
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& [label, members] : rows_by_class(labels, rows, rng)) {
    if (members.size() < k) {
      log_event("eval.stratify", {{"class", label}, {"members", members.size()}, {"folds", k},
                                  {"warning", "class smaller than fold count; best-effort stratification"}});
    }
    for (std::size_t r : members) {
      folds[next].push_back(r);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

HoldoutSplit stratified_holdout(std::span<const int> labels, std::span<const std::size_t> rows, double fraction,
                                std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must be in [0, 1)");
  Rng rng(derive_seed({seed, 12}));
  HoldoutSplit out;
  for (auto& [_, members] : rows_by_class(labels, rows, rng)) {
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    if (members.size() >= 2 && fraction > 0.0) take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    out.holdout.insert(out.holdout.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  return out;
}

void FewShotSpec::validate() const {
  if (shots < 1) throw ConfigError("fewshot: shots must be at least 1");
}

FewShotSample fewshot_sample(const TableDataset& dataset, const FewShotSpec& spec) {
  spec.validate();
  if (!dataset.labeled()) throw DataError("fewshot: table " + dataset.name + " has no labels");
  Rng rng(derive_seed({spec.seed, 13}));
  FewShotSample out;
  const auto rows = all_rows(dataset.num_rows());
  const auto by_class = rows_by_class(dataset.labels, rows, rng);
  for (int c = 0; c < dataset.num_classes(); ++c) {
    auto it = by_class.find(c);
    const std::size_t have = it == by_class.end() ? 0 : it->second.size();
    if (have < spec.shots) {
      throw DataError("fewshot: class '" + dataset.label_names[static_cast<std::size_t>(c)] + "' has " +
                      std::to_string(have) + " rows, fewer than " + std::to_string(spec.shots) + " shots");
    }
    const auto& m = it->second;
    out.train_rows.insert(out.train_rows.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(spec.shots));
    out.pool_rows.insert(out.pool_rows.end(), m.begin() + static_cast<std::ptrdiff_t>(spec.shots), m.end());
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.pool_rows.begin(), out.pool_rows.end());
  out.train = dataset.select_rows(out.train_rows);
  out.pool = dataset.select_rows(out.pool_rows);
  return out;
}

void EvalConfig::validate() const {
  if (folds < 2) throw ConfigError("eval: folds must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("eval: validation_fraction must be in (0, 1)");
  }
  if (fewshot && *fewshot < 1) throw ConfigError("eval: fewshot must be at least 1");
}

FoldRunner finetune_runner(ModelFactory factory, TrainConfig train) {
  return [factory = std::move(factory), train](const FoldData& fold, FoldResult& result) {
    Model model = factory(fold);
    TrainConfig cfg = train;
    cfg.seed = fold.seed;
    const TrainResult r = finetune(model, fold.train, fold.validation, cfg);
    result.best_epoch = r.best_epoch;
    result.epochs_run = r.epochs_run;
    result.history = r.history;
    return predict_proba(model, fold.test, cfg.eval_batch);
  };
}

EvalReport kfold_eval(const TableDataset& dataset, const FoldRunner& runner, const EvalConfig& config,
                      const nlohmann::json& resolved_config) {
  config.validate();
  if (!dataset.labeled()) throw DataError("eval: table " + dataset.name + " has no labels");
  const auto need = config.folds * static_cast<std::size_t>(std::max(dataset.num_classes(), 1));
  if (dataset.num_rows() < need) {
    throw DataError("eval: " + std::to_string(dataset.num_rows()) + " rows, need at least " + std::to_string(need));
  }
  const auto start = std::chrono::steady_clock::now();

  EvalReport report;
  report.dataset = dataset.name;
  report.config_digest = sha256_hex(nlohmann::json{{"config", resolved_config}, {"seed", config.seed}}.dump());

  const auto tests = stratified_folds(dataset.labels, config.folds, config.seed);
  for (std::size_t f = 0; f < config.folds; ++f) {
    FoldData fold;
    fold.fold = f;
    fold.seed = derive_seed({config.seed, 20, f});
    std::vector<bool> in_test(dataset.num_rows(), false);
    for (std::size_t r : tests[f]) in_test[r] = true;
    std::vector<std::size_t> rest;
    for (std::size_t r = 0; r < dataset.num_rows(); ++r) {
      if (!in_test[r]) rest.push_back(r);
    }

    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
    if (config.fewshot) {
      // Few-shot: N rows per class for training, and at most N per class of
      // the remainder for validation.
      const TableDataset portion = dataset.select_rows(rest);
      const FewShotSample shot = fewshot_sample(portion, FewShotSpec{*config.fewshot, fold.seed});
      for (std::size_t r : shot.train_rows) train_rows.push_back(rest[r]);
      std::map<int, std::size_t> taken;
      for (std::size_t r : shot.pool_rows) {
        const std::size_t src = rest[r];
        if (taken[dataset.labels[src]]++ < *config.fewshot) val_rows.push_back(src);
      }
    } else {
      const HoldoutSplit split = stratified_holdout(dataset.labels, rest, config.validation_fraction, fold.seed);
      train_rows = split.train;
      val_rows = split.holdout;
    }
    fold.train = dataset.select_rows(train_rows);
    fold.validation = dataset.select_rows(val_rows);
    fold.test = dataset.select_rows(tests[f]);

    FoldResult result;
    result.fold = f;
    result.seed = fold.seed;
    result.train_rows = train_rows.size();
    result.validation_rows = val_rows.size();
    result.test_rows = tests[f].size();
    const Tensor<float> probs = runner(fold, result);
    result.auc = auc(probs, fold.test.labels);
    log_event("eval.fold", {{"fold", f}, {"auc", result.auc}, {"best_epoch", result.best_epoch}});
    report.folds.push_back(std::move(result));
  }
  double sum = 0.0;
  for (const auto& f : report.folds) sum += f.auc;
  report.mean_auc = sum / static_cast<double>(report.folds.size());
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log_event("eval.done", {{"dataset", dataset.name}, {"mean_auc", report.mean_auc},
                          {"wall_clock_seconds", report.wall_clock_seconds}});
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"seed", f.seed},
                     {"auc", f.auc},
                     {"train_rows", f.train_rows},
                     {"validation_rows", f.validation_rows},
                     {"test_rows", f.test_rows},
                     {"best_epoch", f.best_epoch},
                     {"epochs_run", f.epochs_run}});
  }
  return {{"dataset", report.dataset},
          {"folds", folds},
          {"mean_auc", report.mean_auc},
          {"config_digest", report.config_digest}};
}

std::string plot_data(const EvalReport& report) {
  std::ostringstream out;
  out << "fold,epoch,train_loss,val_auc\n";
  for (const auto& f : report.folds) {
    for (const auto& e : f.history) {
      out << f.fold << ',' << e.epoch << ',' << format_fixed(e.train_loss, 6) << ','
          << (std::isnan(e.val_auc) ? std::string() : format_fixed(e.val_auc, 6)) << '\n';
    }
  }
  return out.str();
}

}  // namespace tabxfer
