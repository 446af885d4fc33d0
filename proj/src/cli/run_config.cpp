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

#include "tabxfer/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "tabxfer/util/errors.hpp"

namespace tabxfer {
using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError("config: section '" + std::string(section) + "' must be an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [key, _] : j.items()) {
    if (!ok.contains(key)) throw ConfigError("config: unknown key '" + key + "' in section '" + std::string(section) + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

json train_json(const TrainConfig& t) {
  return {{"lr", t.lr},         {"batch_size", t.batch_size}, {"max_epochs", t.max_epochs}, {"patience", t.patience},
          {"dropout", t.dropout}, {"clip_norm", t.clip_norm},   {"eval_batch", t.eval_batch}};
}

void read_train(const json& j, std::string_view section, TrainConfig& t) {
  check_keys(j, section, {"lr", "batch_size", "max_epochs", "patience", "dropout", "clip_norm", "eval_batch"});
  read(j, "lr", t.lr);
  read(j, "batch_size", t.batch_size);
  read(j, "max_epochs", t.max_epochs);
  read(j, "patience", t.patience);
  read(j, "dropout", t.dropout);
  read(j, "clip_norm", t.clip_norm);
  read(j, "eval_batch", t.eval_batch);
}

}  // namespace

RunConfig::RunConfig() {
  pretrain.lr = 3e-4;
  pretrain.max_epochs = 500;
  finetune.lr = 1e-4;
  finetune.max_epochs = 200;
  curation.wordlist_path = std::filesystem::path(TABXFER_DATA_DIR) / "wordlist.txt";
}

json to_json(const RunConfig& c) {
  json eval{{"folds", c.eval.folds}, {"validation_fraction", c.eval.validation_fraction}, {"fewshot", nullptr}};
  if (c.eval.fewshot) eval["fewshot"] = *c.eval.fewshot;
  return {
      {"command", c.command},
      {"seed", c.seed},
      {"paths",
       {{"corpus", c.paths.corpus},
        {"data", c.paths.data},
        {"checkpoint", c.paths.checkpoint},
        {"output", c.paths.output},
        {"report", c.paths.report},
        {"plot", c.paths.plot}}},
      {"objective", objective_name(c.objective)},
      {"model", to_json(c.model)},
      {"pretrain", train_json(c.pretrain)},
      {"finetune", train_json(c.finetune)},
      {"eval", eval},
      {"curation",
       {{"semantic_fraction_min", c.curation.semantic_fraction_min},
        {"missing_fraction_max", c.curation.missing_fraction_max},
        {"max_features_before_prune", c.curation.max_features_before_prune},
        {"prune_keep_top", c.curation.prune_keep_top},
        {"wordlist", c.curation.wordlist_path.string()}}},
      {"synth",
       {{"tables", c.synth.tables},
        {"rows", c.synth.rows},
        {"min_columns", c.synth.min_columns},
        {"max_columns", c.synth.max_columns},
        {"noise", c.synth.noise}}},
      {"sweep", {{"axis", c.sweep.axis}, {"values", c.sweep.values}}},
  };
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  check_keys(j, "root",
             {"command", "seed", "paths", "objective", "model", "pretrain", "finetune", "eval", "curation", "synth",
              "sweep"});
  read(j, "command", c.command);
  read(j, "seed", c.seed);
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths", {"corpus", "data", "checkpoint", "output", "report", "plot"});
    read(p, "corpus", c.paths.corpus);
    read(p, "data", c.paths.data);
    read(p, "checkpoint", c.paths.checkpoint);
    read(p, "output", c.paths.output);
    read(p, "report", c.paths.report);
    read(p, "plot", c.paths.plot);
  }
  if (j.contains("objective")) c.objective = parse_objective(j["objective"].get<std::string>());
  if (j.contains("model")) {
    // Merge over the current model section so partial sections work.
    json merged = to_json(c.model);
    merged.merge_patch(j["model"]);
    c.model = model_config_from_json(merged);
  }
  if (j.contains("pretrain")) read_train(j["pretrain"], "pretrain", c.pretrain);
  if (j.contains("finetune")) read_train(j["finetune"], "finetune", c.finetune);
  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_keys(e, "eval", {"folds", "validation_fraction", "fewshot"});
    read(e, "folds", c.eval.folds);
    read(e, "validation_fraction", c.eval.validation_fraction);
    if (e.contains("fewshot")) {
      if (e["fewshot"].is_null()) {
        c.eval.fewshot.reset();
      } else {
        std::size_t n = 0;
        read(e, "fewshot", n);
        c.eval.fewshot = n;
      }
    }
  }
  if (j.contains("curation")) {
    const json& p = j["curation"];
    check_keys(p, "curation",
               {"semantic_fraction_min", "missing_fraction_max", "max_features_before_prune", "prune_keep_top",
                "wordlist"});
    read(p, "semantic_fraction_min", c.curation.semantic_fraction_min);
    read(p, "missing_fraction_max", c.curation.missing_fraction_max);
    read(p, "max_features_before_prune", c.curation.max_features_before_prune);
    read(p, "prune_keep_top", c.curation.prune_keep_top);
    std::string w;
    read(p, "wordlist", w);
    if (!w.empty()) c.curation.wordlist_path = w;
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    check_keys(s, "synth", {"tables", "rows", "min_columns", "max_columns", "noise"});
    read(s, "tables", c.synth.tables);
    read(s, "rows", c.synth.rows);
    read(s, "min_columns", c.synth.min_columns);
    read(s, "max_columns", c.synth.max_columns);
    read(s, "noise", c.synth.noise);
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"axis", "values"});
    read(s, "axis", c.sweep.axis);
    read(s, "values", c.sweep.values);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

std::uint64_t default_seed() {
  const char* env = std::getenv("TABXFER_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("TABXFER_SEED is not a number: ") + env);
  return v;
}

}  // namespace tabxfer
