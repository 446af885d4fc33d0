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

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "tabxfer/cli/commands.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"

namespace {

using tabxfer::RunConfig;

// Flag values; unset flags leave the config file (or defaults) alone.
struct Overrides {
  std::string config_file;
  std::string log_file;
  bool quiet = false;

  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus, data, checkpoint, output, report, plot, wordlist;
  std::optional<std::string> objective, pooling, provider, lookup;
  std::optional<std::size_t> layers, dim, heads, ffn, token_dim;
  std::optional<double> dropout;
  std::optional<double> mask_rate, inclusion, temperature;
  std::optional<std::size_t> subsets;
  std::optional<double> lr;
  std::optional<std::size_t> epochs, batch_size, patience, pretrain_epochs, finetune_epochs;
  std::optional<bool> no_dropout;
  std::optional<std::size_t> folds, fewshot;
  std::optional<double> missing_max, semantic_min;
  std::optional<std::size_t> tables, rows;
  std::optional<double> noise;
  std::optional<std::string> axis;
  std::vector<double> values;
};

void add_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_file, "JSON run config; flags override it")->check(CLI::ExistingFile);
  cmd.add_option("--log", o.log_file, "write JSON-lines log records here instead of stderr");
  cmd.add_flag("--quiet", o.quiet, "suppress log records");
  cmd.add_option("--seed", o.seed, "run seed (default: TABXFER_SEED or 0)");

  cmd.add_option("--corpus", o.corpus, "directory of CSV tables with manifests");
  cmd.add_option("--data", o.data, "labeled CSV table (manifest alongside)");
  cmd.add_option("--checkpoint", o.checkpoint, "input checkpoint");
  cmd.add_option("--output", o.output, "output checkpoint or directory");
  cmd.add_option("--report", o.report, "report JSON path");
  cmd.add_option("--plot", o.plot, "plot data CSV path");
  cmd.add_option("--wordlist", o.wordlist, "dictionary for semantic column screening");

  cmd.add_option("--objective", o.objective, "mtm or supcon");
  cmd.add_option("--layers", o.layers);
  cmd.add_option("--dim", o.dim);
  cmd.add_option("--heads", o.heads);
  cmd.add_option("--ffn", o.ffn, "feed-forward hidden width");
  cmd.add_option("--token-dim", o.token_dim, "hashed token width (0: model width)");
  cmd.add_option("--dropout", o.dropout, "encoder dropout rate");
  cmd.add_option("--pooling", o.pooling, "average, max, self_attention or none");
  cmd.add_option("--provider", o.provider, "hashed or lookup_file");
  cmd.add_option("--lookup", o.lookup, "token vector file for the lookup provider");
  cmd.add_option("--mask-rate", o.mask_rate);
  cmd.add_option("--subsets", o.subsets, "contrastive subsets per row (k)");
  cmd.add_option("--inclusion", o.inclusion, "feature inclusion probability (q)");
  cmd.add_option("--temperature", o.temperature);

  cmd.add_option("--lr", o.lr, "learning rate of the command's training stage (sweep: both stages)");
  cmd.add_option("--epochs", o.epochs, "maximum epochs of the command's training stage (sweep: both stages)");
  cmd.add_option("--pretrain-epochs", o.pretrain_epochs);
  cmd.add_option("--finetune-epochs", o.finetune_epochs);
  cmd.add_option("--batch-size", o.batch_size);
  cmd.add_option("--patience", o.patience);
  cmd.add_flag("--no-dropout", o.no_dropout, "train without dropout");
  cmd.add_option("--folds", o.folds);
  cmd.add_option("--fewshot,--shots", o.fewshot, "training rows per class");

  cmd.add_option("--missing-max", o.missing_max);
  cmd.add_option("--semantic-min", o.semantic_min);
  cmd.add_option("--tables", o.tables);
  cmd.add_option("--rows", o.rows);
  cmd.add_option("--noise", o.noise);
  cmd.add_option("--axis", o.axis, "sweep axis: mask_rate, k or lr");
  cmd.add_option("--values", o.values, "sweep values")->delimiter(',');
}

template <typename T, typename U>
void set(const std::optional<T>& v, U& target) {
  if (v) target = *v;
}

RunConfig resolve(const std::string& command, const Overrides& o) {
  RunConfig c;
  c.seed = tabxfer::default_seed();
  if (!o.config_file.empty()) c = tabxfer::load_run_config(o.config_file, c);
  c.command = command;
  set(o.seed, c.seed);
  set(o.corpus, c.paths.corpus);
  set(o.data, c.paths.data);
  set(o.checkpoint, c.paths.checkpoint);
  set(o.output, c.paths.output);
  set(o.report, c.paths.report);
  set(o.plot, c.paths.plot);
  if (o.wordlist) c.curation.wordlist_path = *o.wordlist;

  if (o.objective) c.objective = tabxfer::parse_objective(*o.objective);
  set(o.layers, c.model.encoder.layers);
  set(o.dim, c.model.encoder.dim);
  set(o.heads, c.model.encoder.heads);
  set(o.ffn, c.model.encoder.ffn_hidden);
  set(o.token_dim, c.model.embed.token_dim);
  if (o.dropout) c.model.encoder.dropout = c.model.encoder.attention_dropout = *o.dropout;
  if (o.pooling) c.model.embed.pooling = tabxfer::parse_pooling(*o.pooling);
  if (o.provider) c.model.embed.mode = tabxfer::parse_provider_mode(*o.provider);
  set(o.lookup, c.model.embed.lookup_path);
  set(o.mask_rate, c.model.mask.rate);
  set(o.subsets, c.model.contrastive.subsets);
  set(o.inclusion, c.model.contrastive.inclusion);
  set(o.temperature, c.model.contrastive.temperature);

  std::vector<tabxfer::TrainConfig*> stages;
  if (command == "pretrain" || command == "sweep") stages.push_back(&c.pretrain);
  if (command != "pretrain") stages.push_back(&c.finetune);
  for (tabxfer::TrainConfig* stage : stages) {
    set(o.lr, stage->lr);
    set(o.epochs, stage->max_epochs);
    set(o.batch_size, stage->batch_size);
    set(o.patience, stage->patience);
  }
  set(o.pretrain_epochs, c.pretrain.max_epochs);
  set(o.finetune_epochs, c.finetune.max_epochs);
  if (o.no_dropout && *o.no_dropout) c.pretrain.dropout = c.finetune.dropout = false;
  set(o.folds, c.eval.folds);
  if (o.fewshot) c.eval.fewshot = *o.fewshot;

  set(o.missing_max, c.curation.missing_fraction_max);
  set(o.semantic_min, c.curation.semantic_fraction_min);
  set(o.tables, c.synth.tables);
  set(o.rows, c.synth.rows);
  set(o.noise, c.synth.noise);
  set(o.axis, c.sweep.axis);
  if (!o.values.empty()) c.sweep.values = o.values;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabxfer: transferable transformers for tabular classification"};
  app.require_subcommand(1);
  Overrides o;
  const std::map<std::string, std::string> help = {
      {"curate", "screen and clean a corpus of tables"},
      {"pretrain", "self-supervised (mtm) or supervised contrastive (supcon) pre-training"},
      {"finetune", "fine-tune on one labeled table and save the model"},
      {"eval", "k-fold cross-validated AUC, from scratch or from a checkpoint"},
      {"fewshot", "k-fold evaluation training on N rows per class"},
      {"sweep", "repeat pretrain + eval over values of one hyperparameter"},
      {"synth", "write a synthetic table family"},
  };
  for (const auto& name : tabxfer::command_names()) add_options(*app.add_subcommand(name, help.at(name)), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::ofstream log_file;
  if (o.quiet) {
    tabxfer::set_log_stream(nullptr);
  } else if (!o.log_file.empty()) {
    log_file.open(o.log_file, std::ios::app);
    if (!log_file) {
      std::cerr << "error: cannot open log file " << o.log_file << "\n";
      return 2;
    }
    tabxfer::set_log_stream(&log_file);
  }

  try {
    const RunConfig config = resolve(app.get_subcommands().front()->get_name(), o);
    tabxfer::run_command(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tabxfer::exit_code_for(e);
  }
  return 0;
}
