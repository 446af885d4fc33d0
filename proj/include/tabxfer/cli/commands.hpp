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

#include <filesystem>
#include <vector>

#include "tabxfer/cli/run_config.hpp"

namespace tabxfer {

// Each command validates its config, writes its outputs plus the resolved
// config, and throws ConfigError / DataError / TrainingError on failure.
//
// curate:   paths.corpus -> cleaned tables and curation_log.jsonl in paths.output
// pretrain: paths.corpus -> checkpoint at paths.output, per-epoch losses beside it
// finetune: paths.data (+ paths.checkpoint) -> fine-tuned checkpoint at paths.output
// eval:     paths.data (+ paths.checkpoint) -> k-fold report at paths.report
// fewshot:  eval with eval.fewshot shots per class (default 5)
// sweep:    one pretrain (when paths.corpus is set) + eval per sweep value
// synth:    synthetic table family into paths.output
void run_command(const RunConfig& config);

std::vector<std::string> command_names();

// Loads every table in a directory; throws DataError "no tables found".
std::vector<TableDataset> load_corpus(const std::filesystem::path& directory);
TableDataset load_dataset(const std::filesystem::path& csv_path);

// Exit status for an exception escaping run_command.
int exit_code_for(const std::exception& e);

}  // namespace tabxfer
