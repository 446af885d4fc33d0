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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabxfer/eval/protocol.hpp"
#include "tabxfer/ingest/curate.hpp"
#include "tabxfer/synth/synth.hpp"
#include "tabxfer/train/model.hpp"
#include "tabxfer/train/trainer.hpp"

namespace tabxfer {

struct RunPaths {
  std::string corpus;      // directory of CSV + manifest pairs
  std::string data;        // one CSV (manifest alongside)
  std::string checkpoint;  // input checkpoint
  std::string output;      // checkpoint file or directory, per command
  std::string report;
  std::string plot;
};

struct SweepSpec {
  std::string axis;  // mask_rate, k or lr
  std::vector<double> values;
};

// Everything a command needs. Serialized next to every output so a run can
// be repeated from that file alone.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  RunPaths paths;
  Objective objective = Objective::mtm;
  ModelConfig model;
  TrainConfig pretrain;
  TrainConfig finetune;
  EvalConfig eval;
  CurationPolicy curation;
  SynthConfig synth;
  SweepSpec sweep;

  RunConfig();
};

nlohmann::json to_json(const RunConfig& c);

// Starts from `base` and applies the keys present in `j`. Unknown keys are
// rejected with ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

// TABXFER_SEED if set, else 0. A non-numeric value is a ConfigError.
std::uint64_t default_seed();

}  // namespace tabxfer
