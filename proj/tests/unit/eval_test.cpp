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

#include <algorithm>
#include <cmath>
#include <set>

#include "tabxfer/eval/metrics.hpp"
#include "tabxfer/eval/protocol.hpp"
#include "tabxfer/ingest/curate.hpp"
#include "tabxfer/synth/synth.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"
#include "test_support.hpp"

namespace tabxfer {
namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(Auc, Examples) {
  EXPECT_EQ(binary_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(binary_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{1, 1, 0, 0}), 0.0);
  EXPECT_EQ(binary_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.5);
  EXPECT_THROW(binary_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DataError);
}

TEST(Auc, EqualsPairCountingOracleExactly) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const std::size_t levels = 1 + rng.below(12);  // small alphabets force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? static_cast<double>(rng.below(levels)) / 7.0 : rng.normal();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(binary_auc(s, y), pair_count_auc(s, y)) << "trial " << trial;
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(60), t(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = std::round(rng.normal() * 4.0) / 4.0;
      t[i] = std::exp(3.0 * s[i]) + 7.0;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(binary_auc(s, y), binary_auc(t, y));
  }
}

TEST(Auc, MacroOneVsRest) {
  const Tensor<float> p(Shape{6, 3}, {0.8f, 0.1f, 0.1f, 0.6f, 0.3f, 0.1f, 0.2f, 0.7f, 0.1f,
                                      0.1f, 0.2f, 0.7f, 0.3f, 0.3f, 0.4f, 0.5f, 0.4f, 0.1f});
  const std::vector<int> y{0, 0, 1, 2, 2, 1};
  double want = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> s;
    std::vector<int> b;
    for (std::size_t i = 0; i < 6; ++i) {
      s.push_back(p(i, static_cast<std::size_t>(c)));
      b.push_back(y[i] == c ? 1 : 0);
    }
    want += pair_count_auc(s, b) / 3.0;
  }
  EXPECT_NEAR(auc(p, y), want, 1e-15);
  const std::vector<int> all_zero(6, 0);
  EXPECT_THROW(auc(p, all_zero), DataError);
}

TEST(CrossEntropy, MatchesDefinition) {
  const Tensor<float> p(Shape{2, 2}, {0.25f, 0.75f, 1.0f, 0.0f});
  EXPECT_NEAR(cross_entropy(p, std::vector<int>{1, 0}), -std::log(0.75) / 2.0, 1e-7);
  EXPECT_NEAR(cross_entropy(p, std::vector<int>{1, 1}), (-std::log(0.75) - std::log(1e-12)) / 2.0, 1e-6);
}

class Protocol : public testing::Test {
 protected:
  void SetUp() override { set_log_stream(nullptr); }
};

std::vector<int> labels_of(std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((i * 7 + i / 3) % classes);
  return y;
}

TEST_F(Protocol, FoldsPartitionAndStratify) {
  const auto y = labels_of(103, 3);
  const auto folds = stratified_folds(y, 5, 4);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(y.size(), 0);
  for (const auto& f : folds) {
    for (std::size_t r : f) ++seen[r];
    std::array<int, 3> counts{};
    for (std::size_t r : f) ++counts[static_cast<std::size_t>(y[r])];
    for (int c = 0; c < 3; ++c) {
      const double total = static_cast<double>(std::count(y.begin(), y.end(), c));
      EXPECT_LE(std::abs(counts[static_cast<std::size_t>(c)] - total / 5.0), 1.0);
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(stratified_folds(y, 5, 4), folds);
  EXPECT_NE(stratified_folds(y, 5, 5), folds);
}

TEST_F(Protocol, TinyClassFallsBackBestEffort) {
  std::vector<int> y(20, 0);
  y[3] = y[11] = 1;
  const auto folds = stratified_folds(y, 5, 1);
  std::size_t total = 0;
  for (const auto& f : folds) total += f.size();
  EXPECT_EQ(total, 20u);
}

TEST_F(Protocol, HoldoutKeepsEachClassOnBothSides) {
  const auto y = labels_of(50, 2);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 50; i += 2) rows.push_back(i);
  const HoldoutSplit s = stratified_holdout(y, rows, 0.2, 3);
  EXPECT_EQ(s.train.size() + s.holdout.size(), rows.size());
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (std::size_t r : s.holdout) EXPECT_TRUE(all.insert(r).second);
  std::set<int> held;
  for (std::size_t r : s.holdout) held.insert(y[r]);
  EXPECT_EQ(held.size(), 2u);
}

TEST_F(Protocol, FewShotExamples) {
  const auto y = labels_of(60, 3);
  std::vector<std::vector<std::string>> cells(60, std::vector<std::string>{"0.5"});
  const auto t = testing_support::make_table("t", {{"a", ColumnKind::numerical}}, cells, y);
  const FewShotSample a = fewshot_sample(t, {5, 1});
  EXPECT_EQ(a.train.num_rows(), 15u);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(std::count(a.train.labels.begin(), a.train.labels.end(), c), 5);
  std::set<std::size_t> used(a.train_rows.begin(), a.train_rows.end());
  for (std::size_t r : a.pool_rows) EXPECT_FALSE(used.count(r));
  EXPECT_EQ(a.train_rows.size() + a.pool_rows.size(), 60u);
  EXPECT_EQ(fewshot_sample(t, {5, 1}).train_rows, a.train_rows);
  EXPECT_NE(fewshot_sample(t, {5, 2}).train_rows, a.train_rows);
  try {
    fewshot_sample(t, {21, 1});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("class '0'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(fewshot_sample(t, {0, 1}), ConfigError);
}

TableDataset random_label_table(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> cells;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    cells.push_back({std::to_string(rng.uniform())});
    y.push_back(static_cast<int>(i % 2));
  }
  rng.shuffle(y.begin(), y.end());
  return testing_support::make_table("noise", {{"a", ColumnKind::numerical}}, cells, y);
}

FoldRunner constant_runner() {
  return [](const FoldData& fold, FoldResult&) {
    return Tensor<float>::matrix(fold.test.num_rows(), 2, 0.5f);
  };
}

TEST_F(Protocol, ConstantPredictionScoresOneHalf) {
  const auto t = random_label_table(400, 1);
  const EvalReport r = kfold_eval(t, constant_runner(), EvalConfig{}, nlohmann::json{{"model", "constant"}});
  ASSERT_EQ(r.folds.size(), 5u);
  EXPECT_NEAR(r.mean_auc, 0.5, 0.02);
  double sum = 0.0;
  for (const auto& f : r.folds) sum += f.auc;
  EXPECT_EQ(r.mean_auc, sum / 5.0);
}

TEST_F(Protocol, FoldsSeeDisjointSplits) {
  const auto t = random_label_table(100, 2);
  std::vector<std::size_t> test_total;
  const FoldRunner check = [&](const FoldData& fold, FoldResult& res) {
    EXPECT_EQ(fold.train.num_rows() + fold.validation.num_rows() + fold.test.num_rows(), 100u);
    EXPECT_NEAR(static_cast<double>(fold.validation.num_rows()),
                0.2 * static_cast<double>(fold.train.num_rows() + fold.validation.num_rows()), 1.0);
    test_total.push_back(fold.test.num_rows());
    res.best_epoch = 1;
    return Tensor<float>::matrix(fold.test.num_rows(), 2, 0.5f);
  };
  kfold_eval(t, check, EvalConfig{}, {});
  std::size_t total = 0;
  for (auto n : test_total) total += n;
  EXPECT_EQ(total, 100u);
}

TEST_F(Protocol, FewShotFoldsTrainOnShotsPerClass) {
  const auto t = random_label_table(100, 3);
  EvalConfig cfg;
  cfg.fewshot = 5;
  const FoldRunner check = [](const FoldData& fold, FoldResult&) {
    EXPECT_EQ(fold.train.num_rows(), 10u);
    EXPECT_EQ(std::count(fold.train.labels.begin(), fold.train.labels.end(), 1), 5);
    EXPECT_EQ(fold.validation.num_rows(), 10u);
    return Tensor<float>::matrix(fold.test.num_rows(), 2, 0.5f);
  };
  kfold_eval(t, check, cfg, {});
}

TEST_F(Protocol, ReportsAreReproducibleAndDigestTracksConfig) {
  const auto t = random_label_table(60, 4);
  const nlohmann::json conf{{"lr", 1e-4}};
  const auto a = report_to_json(kfold_eval(t, constant_runner(), EvalConfig{}, conf)).dump();
  const auto b = report_to_json(kfold_eval(t, constant_runner(), EvalConfig{}, conf)).dump();
  EXPECT_EQ(a, b);
  EvalConfig other;
  other.seed = 1;
  const auto d1 = kfold_eval(t, constant_runner(), EvalConfig{}, conf).config_digest;
  EXPECT_NE(kfold_eval(t, constant_runner(), other, conf).config_digest, d1);
  EXPECT_NE(kfold_eval(t, constant_runner(), EvalConfig{}, nlohmann::json{{"lr", 3e-4}}).config_digest, d1);
}

TEST_F(Protocol, RejectsTooFewRows) {
  const auto t = random_label_table(8, 5);
  EXPECT_THROW(kfold_eval(t, constant_runner(), EvalConfig{}, {}), DataError);
}

TEST_F(Protocol, PlotDataListsEpochs) {
  EvalReport r;
  FoldResult f;
  f.fold = 2;
  f.history = {{1, 0.5, 0.75, 0.6}, {2, 0.25, std::nan(""), std::nan("")}};
  r.folds.push_back(f);
  EXPECT_EQ(plot_data(r), "fold,epoch,train_loss,val_auc\n2,1,0.500000,0.750000\n2,2,0.250000,\n");
}

TEST(Synth, FamilyIsDeterministicAndFollowsTheRule) {
  SynthConfig cfg;
  cfg.tables = 4;
  cfg.rows = 50;
  cfg.seed = 3;
  const auto a = synth_family(cfg);
  const auto b = synth_family(cfg);
  const auto& vocab = synth_vocabulary();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a[i].same_data(b[i]));
    EXPECT_GE(a[i].num_features(), cfg.min_columns);
    EXPECT_LE(a[i].num_features(), cfg.max_columns);
    for (const auto& c : a[i].schema) {
      EXPECT_TRUE(std::any_of(vocab.begin(), vocab.end(), [&](const auto& v) { return v.name == c.name; }));
    }
    for (const auto& row : a[i].rows) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (a[i].schema[j].kind == ColumnKind::numerical) {
          EXPECT_GE(row[j].number, 0.0);
          EXPECT_LE(row[j].number, 1.0);
        }
      }
    }
  }
  EXPECT_FALSE(a[0].same_data(a[1]));
}

TEST(Synth, NoiseFreeColumnsAreMonotoneInTheLabel) {
  SynthConfig cfg;
  cfg.rows = 200;
  cfg.noise = 0.0;
  const auto t = synth_table(cfg, 0);
  for (std::size_t j = 0; j < t.num_features(); ++j) {
    if (t.schema[j].kind != ColumnKind::numerical) continue;
    std::vector<double> s;
    for (const auto& r : t.rows) s.push_back(r[j].number);
    const double a = binary_auc(s, t.labels);
    EXPECT_TRUE(a == 1.0 || a == 0.0) << t.schema[j].name << " " << a;
  }
}

TEST(Synth, SurvivesCuration) {
  const Wordlist words = Wordlist::load(testing_support::wordlist_path());
  SynthConfig cfg;
  cfg.tables = 3;
  cfg.rows = 30;
  for (const auto& t : synth_family(cfg)) {
    const CurationResult r = curate(t, CurationPolicy{}, words);
    EXPECT_TRUE(r.kept) << t.name << " " << r.detail;
  }
}

TEST(Synth, SeparableTableLabel) {
  const auto t = separable_table(100, 4, 2);
  ASSERT_EQ(t.num_features(), 4u);
  for (std::size_t r = 0; r < t.num_rows(); ++r) EXPECT_EQ(t.labels[r], t.rows[r][0].number > 0.5 ? 1 : 0);
  EXPECT_THROW(separable_table(1, 1, 0), ConfigError);
}

}  // namespace
}  // namespace tabxfer
