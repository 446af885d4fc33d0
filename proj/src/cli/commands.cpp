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

#include "tabxfer/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "tabxfer/ingest/forest.hpp"
#include "tabxfer/train/checkpoint.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"
#include "tabxfer/util/text.hpp"

namespace tabxfer {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required path: ") + what);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void write_resolved(const fs::path& path, const RunConfig& config) {
  write_text(path, to_json(config).dump(2) + "\n");
}

fs::path sidecar(const fs::path& file, const std::string& suffix) { return fs::path(file.string() + suffix); }

std::string losses_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,val_auc\n";
  for (const auto& e : r.history) {
    out += std::to_string(e.epoch) + "," + format_fixed(e.train_loss, 6) + "," +
           (std::isnan(e.val_auc) ? std::string() : format_fixed(e.val_auc, 6)) + "\n";
  }
  return out;
}

Model start_model(const RunConfig& config) {
  if (config.paths.checkpoint.empty()) return Model(config.model, config.seed);
  return load_checkpoint(config.paths.checkpoint).model;
}

// ---- curate ----

void cmd_curate(const RunConfig& config) {
  require(config.paths.corpus, "corpus");
  require(config.paths.output, "output");
  config.curation.validate();
  const auto files = list_tables(config.paths.corpus);
  if (files.empty()) throw DataError("no tables found in " + config.paths.corpus);
  const Wordlist words = Wordlist::load(config.curation.wordlist_path);

  fs::create_directories(config.paths.output);
  std::string log;
  std::size_t kept = 0;
  for (const auto& csv : files) {
    const TableDataset raw = load_table(csv, manifest_path_for(csv));
    CurationResult r = curate(raw, config.curation, words);
    log += r.record + "\n";
    log_event("curate.table", json::parse(r.record));
    if (!r.kept) continue;
    TableDataset t = std::move(r.table);
    if (t.num_features() > config.curation.max_features_before_prune) {
      if (t.labeled()) {
        t = feature_importance_prune(t, config.curation, derive_seed({config.seed, 41}));
        log += t.provenance.curation_log.back() + "\n";
      } else {
        const json skip{{"table", t.name}, {"action", "prune_skipped"}, {"reason", "unlabeled"}};
        log += skip.dump() + "\n";
        log_event("curate.prune_skipped", skip);
      }
    }
    save_table(t, config.paths.output);
    ++kept;
  }
  write_text(fs::path(config.paths.output) / "curation_log.jsonl", log);
  write_resolved(fs::path(config.paths.output) / "resolved_config.json", config);
  log_event("curate.done", {{"tables", files.size()}, {"kept", kept}});
  if (kept == 0) throw DataError("no table survived curation");
}

// ---- pretrain ----

TrainResult pretrain_into(Model& model, const std::vector<TableDataset>& corpus, const RunConfig& config,
                          Objective objective) {
  TrainConfig tc = config.pretrain;
  tc.seed = config.seed;
  if (objective == Objective::supcon) return pretrain_supcon(model, corpus, tc);
  return pretrain_mtm(model, corpus, tc);
}

void cmd_pretrain(const RunConfig& config) {
  require(config.paths.corpus, "corpus");
  require(config.paths.output, "output");
  if (config.objective == Objective::finetune) throw ConfigError("pretrain: objective must be mtm or supcon");
  config.model.validate();
  const auto corpus = load_corpus(config.paths.corpus);
  Model model = start_model(config);
  const TrainResult r = pretrain_into(model, corpus, config, config.objective);

  TrainingProvenance prov;
  prov.objective = std::string(objective_name(config.objective));
  prov.epochs = r.epochs_run;
  prov.best_epoch = r.best_epoch;
  prov.corpus_digest = corpus_digest(corpus);
  prov.seed = config.seed;
  save_checkpoint(config.paths.output, model, prov);
  write_text(sidecar(config.paths.output, ".losses.csv"), losses_csv(r));
  write_resolved(sidecar(config.paths.output, ".config.json"), config);
  log_event("pretrain.done", {{"best_epoch", r.best_epoch}, {"best_loss", r.best_loss},
                              {"skipped_batches", r.skipped_batches}, {"output", config.paths.output}});
}

// ---- finetune ----

void cmd_finetune(const RunConfig& config) {
  require(config.paths.data, "data");
  require(config.paths.output, "output");
  const TableDataset data = load_dataset(config.paths.data);
  std::vector<std::size_t> rows(data.num_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const HoldoutSplit split = stratified_holdout(data.labels, rows, config.eval.validation_fraction, config.seed);
  Model model = start_model(config);
  TrainConfig tc = config.finetune;
  tc.seed = config.seed;
  const TrainResult r = finetune(model, data.select_rows(split.train), data.select_rows(split.holdout), tc);

  TrainingProvenance prov;
  prov.objective = "finetune";
  prov.epochs = r.epochs_run;
  prov.best_epoch = r.best_epoch;
  const std::vector<TableDataset> corpus{data};
  prov.corpus_digest = corpus_digest(corpus);
  prov.seed = config.seed;
  prov.label_names = data.label_names;
  save_checkpoint(config.paths.output, model, prov);
  write_text(sidecar(config.paths.output, ".losses.csv"), losses_csv(r));
  write_resolved(sidecar(config.paths.output, ".config.json"), config);
  log_event("finetune.done", {{"best_epoch", r.best_epoch}, {"best_val_auc", r.best_val_auc}});
}

// ---- eval / fewshot ----

EvalReport evaluate(const RunConfig& config, const TableDataset& data, const Model* pretrained) {
  const ModelConfig model_config = config.model;
  const std::uint64_t seed = config.seed;
  const ModelFactory factory = [pretrained, model_config, seed](const FoldData&) {
    return pretrained ? *pretrained : Model(model_config, seed);
  };
  EvalConfig ec = config.eval;
  ec.seed = config.seed;
  json resolved = to_json(config);
  resolved.erase("paths");  // outputs do not change what is measured
  resolved["paths"] = {{"data", config.paths.data}, {"checkpoint", config.paths.checkpoint}};
  return kfold_eval(data, finetune_runner(factory, config.finetune), ec, resolved);
}

void write_report(const RunConfig& config, const EvalReport& report, const std::string& mode) {
  json j = report_to_json(report);
  j["mode"] = mode;
  write_text(config.paths.report, j.dump(2) + "\n");
  if (!config.paths.plot.empty()) write_text(config.paths.plot, plot_data(report));
  write_resolved(sidecar(config.paths.report, ".config.json"), config);
}

void cmd_eval(const RunConfig& config) {
  require(config.paths.data, "data");
  require(config.paths.report, "report");
  const TableDataset data = load_dataset(config.paths.data);
  std::optional<Model> pretrained;
  if (!config.paths.checkpoint.empty()) pretrained.emplace(load_checkpoint(config.paths.checkpoint).model);
  const EvalReport report = evaluate(config, data, pretrained ? &*pretrained : nullptr);
  write_report(config, report, pretrained ? "pretrained" : "from_scratch");
}

void cmd_fewshot(const RunConfig& config) {
  RunConfig c = config;
  if (!c.eval.fewshot) c.eval.fewshot = 5;
  cmd_eval(c);
}

// ---- sweep ----

void cmd_sweep(const RunConfig& config) {
  require(config.paths.data, "data");
  require(config.paths.report, "report");
  const std::string& axis = config.sweep.axis;
  if (axis != "mask_rate" && axis != "k" && axis != "lr") {
    throw ConfigError("sweep: axis must be mask_rate, k or lr, got '" + axis + "'");
  }
  if (config.sweep.values.empty()) throw ConfigError("sweep: empty value list");
  if (axis != "lr" && config.paths.corpus.empty()) throw ConfigError("sweep: axis " + axis + " needs a corpus");

  std::vector<double> values = config.sweep.values;
  std::sort(values.begin(), values.end());
  const TableDataset data = load_dataset(config.paths.data);
  std::vector<TableDataset> corpus;
  if (!config.paths.corpus.empty()) corpus = load_corpus(config.paths.corpus);

  json rows = json::array();
  std::string plot = "value,mean_auc,pretrain_loss\n";
  for (double v : values) {
    RunConfig c = config;
    Objective objective = config.objective == Objective::supcon ? Objective::supcon : Objective::mtm;
    if (axis == "mask_rate") {
      c.model.mask.rate = v;
      objective = Objective::mtm;
    } else if (axis == "k") {
      if (v < 1 || v != std::floor(v)) throw ConfigError("sweep: k values must be positive integers");
      c.model.contrastive.subsets = static_cast<std::size_t>(v);
      objective = Objective::supcon;
    } else {
      c.pretrain.lr = v;
      c.finetune.lr = v;
    }
    c.model.validate();
    std::optional<Model> pretrained;
    double pretrain_loss = std::nan("");
    if (!corpus.empty()) {
      pretrained.emplace(c.model, c.seed);
      pretrain_loss = pretrain_into(*pretrained, corpus, c, objective).best_loss;
    }
    const EvalReport report = evaluate(c, data, pretrained ? &*pretrained : nullptr);
    rows.push_back({{"value", v},
                    {"mean_auc", report.mean_auc},
                    {"pretrain_loss", std::isnan(pretrain_loss) ? json(nullptr) : json(pretrain_loss)},
                    {"config_digest", report.config_digest}});
    plot += format_fixed(v, 6) + "," + format_fixed(report.mean_auc, 6) + "," +
            (std::isnan(pretrain_loss) ? std::string() : format_fixed(pretrain_loss, 6)) + "\n";
    log_event("sweep.point", {{"axis", axis}, {"value", v}, {"mean_auc", report.mean_auc}});
  }
  write_text(config.paths.report, json{{"axis", axis}, {"rows", rows}}.dump(2) + "\n");
  write_text(config.paths.plot.empty() ? sidecar(config.paths.report, ".plot.csv") : fs::path(config.paths.plot), plot);
  write_resolved(sidecar(config.paths.report, ".config.json"), config);
}

// ---- synth ----

void cmd_synth(const RunConfig& config) {
  require(config.paths.output, "output");
  SynthConfig sc = config.synth;
  sc.seed = config.seed;
  sc.validate();
  fs::create_directories(config.paths.output);
  for (const auto& t : synth_family(sc)) save_table(t, config.paths.output);
  write_resolved(fs::path(config.paths.output) / "resolved_config.json", config);
}

}  // namespace

std::vector<std::string> command_names() {
  return {"curate", "pretrain", "finetune", "eval", "fewshot", "sweep", "synth"};
}

void run_command(const RunConfig& config) {
  log_event("run.start", {{"command", config.command}, {"seed", config.seed}});
  if (config.command == "curate") return cmd_curate(config);
  if (config.command == "pretrain") return cmd_pretrain(config);
  if (config.command == "finetune") return cmd_finetune(config);
  if (config.command == "eval") return cmd_eval(config);
  if (config.command == "fewshot") return cmd_fewshot(config);
  if (config.command == "sweep") return cmd_sweep(config);
  if (config.command == "synth") return cmd_synth(config);
  throw ConfigError("unknown command '" + config.command + "'");
}

std::vector<TableDataset> load_corpus(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw DataError("no tables found: " + directory.string() + " is not a directory");
  std::vector<TableDataset> out;
  for (const auto& csv : list_tables(directory)) out.push_back(load_table(csv, manifest_path_for(csv)));
  if (out.empty()) throw DataError("no tables found in " + directory.string());
  return out;
}

TableDataset load_dataset(const fs::path& csv_path) {
  TableDataset t = load_table(csv_path, manifest_path_for(csv_path));
  if (!t.labeled()) throw DataError(csv_path.string() + " has no label column");
  return t;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const TrainingError*>(&e)) return 4;
  return 1;
}

}  // namespace tabxfer
