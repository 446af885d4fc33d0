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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "tabxfer/eval/metrics.hpp"
#include "tabxfer/synth/synth.hpp"
#include "tabxfer/train/checkpoint.hpp"
#include "tabxfer/train/trainer.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"
#include "test_support.hpp"

namespace tabxfer {
namespace {

using testing_support::make_table;

ModelConfig tiny_config(std::size_t dim = 16, std::size_t layers = 1) {
  ModelConfig c;
  c.encoder.layers = layers;
  c.encoder.dim = dim;
  c.encoder.heads = 2;
  c.encoder.ffn_hidden = 2 * dim;
  return c;
}

std::vector<TableDataset> small_family(std::size_t tables, std::size_t rows, std::uint64_t seed, double noise = 0.15) {
  SynthConfig sc;
  sc.tables = tables;
  sc.rows = rows;
  sc.seed = seed;
  sc.noise = noise;
  return synth_family(sc);
}

std::string checkpoint_bytes(const Model& model, const TrainingProvenance& prov = {}) {
  std::ostringstream out;
  write_checkpoint(out, model, prov);
  return out.str();
}

class Quiet : public testing::Test {
 protected:
  void SetUp() override { set_log_stream(nullptr); }
};

using Pretrain = Quiet;
using Finetune = Quiet;
using Checkpoint = Quiet;

TEST_F(Pretrain, ZeroEpochsKeepsInitialization) {
  const auto corpus = small_family(1, 20, 1);
  Model trained(tiny_config(), 5);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const TrainResult r = pretrain_mtm(trained, corpus, cfg);
  EXPECT_EQ(r.best_epoch, 0u);
  Model fresh(tiny_config(), 5);
  fresh.initialize(corpus);
  fresh.add_mtm_heads();
  EXPECT_EQ(checkpoint_bytes(trained), checkpoint_bytes(fresh));
}

TEST_F(Pretrain, SeededRunsGiveIdenticalBytes) {
  const auto corpus = small_family(3, 24, 2);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 9;
  Model a(tiny_config(), 3), b(tiny_config(), 3), c(tiny_config(), 4);
  pretrain_mtm(a, corpus, cfg);
  pretrain_mtm(b, corpus, cfg);
  pretrain_mtm(c, corpus, cfg);
  EXPECT_EQ(checkpoint_bytes(a), checkpoint_bytes(b));
  EXPECT_NE(checkpoint_bytes(a), checkpoint_bytes(c));
}

TEST_F(Pretrain, SingleBatchOverfits) {
  // Noise-free rows, one batch of 32, no dropout.
  const auto corpus = small_family(1, 32, 3, 0.0);
  Model model(tiny_config(32, 2), 3);
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.batch_size = 32;
  cfg.max_epochs = 200;
  cfg.dropout = false;
  cfg.seed = 3;
  const TrainResult r = pretrain_mtm(model, corpus, cfg);
  ASSERT_EQ(r.history.size(), 200u);
  EXPECT_LT(r.history.back().train_loss, 0.1 * r.history.front().train_loss);
  EXPECT_LE(r.best_loss, r.history.back().train_loss);
}

TEST_F(Pretrain, RestoresLowestLossEpoch) {
  const auto corpus = small_family(2, 16, 4);
  Model model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_size = 8;
  const TrainResult r = pretrain_mtm(model, corpus, cfg);
  double lowest = INFINITY;
  std::size_t at = 0;
  for (const auto& e : r.history) {
    if (e.train_loss < lowest) {
      lowest = e.train_loss;
      at = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, at);
  EXPECT_EQ(r.best_loss, lowest);
  // Rerunning for exactly best_epoch epochs reproduces the restored weights.
  Model again(tiny_config(), 1);
  cfg.max_epochs = at;
  pretrain_mtm(again, corpus, cfg);
  EXPECT_EQ(checkpoint_bytes(model), checkpoint_bytes(again));
}

TEST_F(Pretrain, SkipsTablesWithOneFeature) {
  auto corpus = small_family(1, 16, 5);
  corpus.push_back(corpus[0].select_columns({0}));
  corpus.back().name = "narrow";
  Model model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  const TrainResult r = pretrain_mtm(model, corpus, cfg);
  EXPECT_EQ(r.skipped_tables, std::vector<std::string>{"narrow"});
  const std::vector<TableDataset> only_narrow{corpus.back()};
  Model other(tiny_config(), 1);
  EXPECT_THROW(pretrain_mtm(other, only_narrow, cfg), DataError);
}

TEST_F(Pretrain, SupconRequiresLabelsUpFront) {
  auto corpus = small_family(1, 16, 6);
  corpus[0].label_spec.reset();
  corpus[0].labels.clear();
  Model model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  EXPECT_THROW(pretrain_supcon(model, corpus, cfg), DataError);
  EXPECT_FALSE(model.initialized());
}

TEST_F(Pretrain, SupconFullRowViewsGiveFiniteLoss) {
  const auto corpus = small_family(1, 16, 7);
  ModelConfig mc = tiny_config();
  mc.contrastive.subsets = 1;
  mc.contrastive.inclusion = 1.0;
  Model model(mc, 1);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.batch_size = 16;
  const TrainResult r = pretrain_supcon(model, corpus, cfg);
  for (const auto& e : r.history) EXPECT_TRUE(std::isfinite(e.train_loss));
}

TEST_F(Pretrain, SupconCountsSingleClassBatches) {
  // Rows sorted by label and batch size 2: most batches hold one class.
  auto t = small_family(1, 12, 8)[0];
  std::vector<std::size_t> order(t.num_rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return t.labels[a] < t.labels[b]; });
  const std::vector<TableDataset> corpus{t.select_rows(order)};
  Model model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 2;
  const TrainResult r = pretrain_supcon(model, corpus, cfg);
  EXPECT_GT(r.skipped_batches, 0u);
}

double mean_cosine(const Tensor<float>& h, const std::vector<int>& labels, bool same) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = i + 1; j < h.rows(); ++j) {
      if ((labels[i] == labels[j]) != same) continue;
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t k = 0; k < h.cols(); ++k) {
        dot += static_cast<double>(h(i, k)) * h(j, k);
        ni += static_cast<double>(h(i, k)) * h(i, k);
        nj += static_cast<double>(h(j, k)) * h(j, k);
      }
      total += dot / std::sqrt(ni * nj);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

TEST_F(Pretrain, SupconSeparatesClassesWithDisjointSignatures) {
  std::vector<std::vector<std::string>> cells;
  std::vector<int> labels;
  Rng rng(3);
  const std::vector<std::string> warm{"red", "orange", "yellow"}, cool{"blue", "green", "violet"};
  for (int i = 0; i < 32; ++i) {
    const int y = i % 2;
    const auto& pal = y ? cool : warm;
    cells.push_back({pal[rng.below(3)], pal[rng.below(3)], y ? "winter" : "summer", pal[rng.below(3)]});
    labels.push_back(y);
  }
  const auto kCat = ColumnKind::categorical;
  const std::vector<TableDataset> corpus{
      make_table("palette", {{"color", kCat}, {"accent", kCat}, {"season", kCat}, {"trim", kCat}}, cells, labels)};
  Model model(tiny_config(), 2);
  model.initialize(corpus);
  std::vector<std::size_t> rows(32);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto before = model.cls_embeddings(corpus[0], rows);
  TrainConfig cfg;
  cfg.lr = 3e-4;
  cfg.batch_size = 16;
  cfg.max_epochs = 50;
  cfg.seed = 2;
  pretrain_supcon(model, corpus, cfg);
  const auto after = model.cls_embeddings(corpus[0], rows);
  const double gap_before = mean_cosine(before, labels, true) - mean_cosine(before, labels, false);
  const double gap_after = mean_cosine(after, labels, true) - mean_cosine(after, labels, false);
  EXPECT_GT(gap_after, 0.0);
  EXPECT_GT(gap_after, gap_before);
}

TEST_F(Finetune, RejectsSingleClass) {
  const auto t = make_table("one", {{"a", ColumnKind::numerical}, {"b", ColumnKind::numerical}},
                            {{"0.1", "0.2"}, {"0.3", "0.4"}}, {0, 0});
  Model model(tiny_config(), 1);
  EXPECT_THROW(finetune(model, t, t, TrainConfig{}), DataError);
}

TEST_F(Finetune, ConfidentCorrectPredictionHasZeroLoss) {
  const auto t = separable_table(6, 2, 1);
  Model model(tiny_config(), 1);
  const std::vector<TableDataset> corpus{t};
  model.initialize(corpus);
  model.reset_task_head(2);
  auto& w = model.params().at("head.w").value;
  std::fill(w.data.begin(), w.data.end(), 0.0f);
  std::vector<std::size_t> ones;
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    if (t.labels[r] == 1) ones.push_back(r);
  }
  ASSERT_FALSE(ones.empty());
  model.params().at("head.b").value = Tensor<float>(Shape{1, 2}, {-200.0f, 200.0f});
  Graph<float> g;
  EXPECT_EQ(g.value(finetune_batch_loss(model, g, model.params(), t, ones)).item(), 0.0f);
}

TEST_F(Finetune, DropsPretrainingHeadsFromUpdateSet) {
  const auto corpus = small_family(2, 24, 9);
  Model model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  pretrain_mtm(model, corpus, cfg);
  pretrain_supcon(model, corpus, cfg);
  ASSERT_TRUE(model.params().contains("mtm.cat"));
  ASSERT_TRUE(model.params().contains("supcon.proj.w"));
  finetune(model, corpus[0], corpus[1], cfg);
  for (const auto& name : update_set(model.params())) {
    EXPECT_NE(name.rfind("mtm.", 0), 0u) << name;
    EXPECT_NE(name.rfind("supcon.", 0), 0u) << name;
  }
  EXPECT_TRUE(model.params().contains("head.w"));
}

TEST_F(Finetune, EarlyStoppingRestoresBestEpoch) {
  // Validation labels are noise, so AUC wanders and patience runs out.
  const auto train = separable_table(60, 3, 1);
  auto val = separable_table(40, 3, 2);
  Rng rng(5);
  for (int& y : val.labels) y = static_cast<int>(rng.below(2));
  Model model(tiny_config(), 1);
  TrainConfig cfg;
  cfg.lr = 3e-4;
  cfg.max_epochs = 200;
  cfg.patience = 4;
  const TrainResult r = finetune(model, train, val, cfg);
  ASSERT_LT(r.epochs_run, 200u);
  EXPECT_EQ(r.epochs_run, r.best_epoch + cfg.patience);
  EXPECT_EQ(r.best_val_auc, r.history[r.best_epoch - 1].val_auc);
  EXPECT_EQ(auc(predict_proba(model, val), val.labels), r.best_val_auc);
}

TEST_F(Finetune, FrozenBatchLossMostlyDecreases) {
  const auto t = small_family(1, 16, 10)[0];
  std::size_t good = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Model model(tiny_config(), trial);
    const std::vector<TableDataset> corpus{t};
    model.initialize(corpus);
    model.reset_task_head(2);
    std::vector<std::size_t> rows(t.num_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    AdamState<float> adam;
    adam.config.lr = 1e-4;  // default fine-tuning rate
    auto loss = [&] {
      Graph<float> g;
      return g.value(finetune_batch_loss(model, g, model.params(), t, rows)).item();
    };
    float prev = loss();
    bool monotone = true;
    for (int step = 0; step < 10; ++step) {
      model.params().zero_grad();
      Graph<float> g;
      g.backward(finetune_batch_loss(model, g, model.params(), t, rows));
      adam_step(model.params(), adam);
      const float now = loss();
      monotone = monotone && now <= prev;
      prev = now;
    }
    good += monotone ? 1 : 0;
  }
  EXPECT_GE(good, 8u);
}

TEST_F(Finetune, ConvergesOnSeparableTable) {
  const auto t = separable_table(200, 3, 4);
  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t r = 0; r < t.num_rows(); ++r) (r % 5 == 0 ? val_rows : train_rows).push_back(r);
  Model model(tiny_config(16, 1), 2);
  TrainConfig cfg;
  cfg.lr = 3e-4;
  cfg.batch_size = 32;
  cfg.max_epochs = 60;
  const TrainResult r = finetune(model, t.select_rows(train_rows), t.select_rows(val_rows), cfg);
  EXPECT_GE(r.best_val_auc, 0.95);
}

TEST_F(Checkpoint, RoundTripIsBitIdentical) {
  const auto corpus = small_family(2, 50, 11);
  Model model(tiny_config(), 4);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  pretrain_mtm(model, corpus, cfg);
  finetune(model, corpus[0], corpus[1], cfg);
  TrainingProvenance prov;
  prov.objective = "finetune";
  prov.corpus_digest = corpus_digest(corpus);
  prov.label_names = corpus[0].label_names;
  testing_support::TempDir dir;
  save_checkpoint(dir / "m.ctb", model, prov);
  LoadedCheckpoint back = load_checkpoint(dir / "m.ctb");
  EXPECT_EQ(back.provenance.corpus_digest, prov.corpus_digest);
  EXPECT_EQ(back.provenance.label_names, prov.label_names);
  EXPECT_EQ(predict_proba(model, corpus[1]), predict_proba(back.model, corpus[1]));
  std::vector<std::size_t> rows(50);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  EXPECT_EQ(model.cls_embeddings(corpus[0], rows), back.model.cls_embeddings(corpus[0], rows));
  EXPECT_EQ(checkpoint_bytes(model, prov), checkpoint_bytes(back.model, back.provenance));
}

TEST_F(Checkpoint, RejectsCorruptInput) {
  std::istringstream bad_magic("XXXX0000");
  EXPECT_THROW(read_checkpoint(bad_magic), DataError);
  Model model(tiny_config(), 1);
  const auto corpus = small_family(1, 8, 1);
  model.initialize(corpus);
  const std::string bytes = checkpoint_bytes(model);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(truncated), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ctb"), DataError);
}

TEST(ModelConfigJson, RoundTrip) {
  ModelConfig c = tiny_config(24, 3);
  c.embed.pooling = Pooling::max;
  c.mask.rate = 0.55;
  c.contrastive.temperature = 0.2;
  const ModelConfig back = model_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"encoder", {{"dim", 10}, {"heads", 3}}}}), ConfigError);
}

TEST(CorpusDigest, DependsOnContentNotOrder) {
  auto a = small_family(2, 8, 1);
  std::vector<TableDataset> swapped{a[1], a[0]};
  EXPECT_EQ(corpus_digest(a), corpus_digest(swapped));
  a[0].rows[0][0].number += 1e-9;
  a[0].rows[0][0].text += "x";
  EXPECT_NE(corpus_digest(a), corpus_digest(swapped));
}

}  // namespace
}  // namespace tabxfer
