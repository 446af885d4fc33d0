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

#include "tabxfer/train/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "tabxfer/util/digest.hpp"
#include "tabxfer/util/errors.hpp"

namespace tabxfer {
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json TrainingProvenance::to_json() const {
  return json{{"objective", objective}, {"epochs", epochs},  {"best_epoch", best_epoch},
              {"corpus_digest", corpus_digest}, {"seed", seed}, {"label_names", label_names}};
}

TrainingProvenance TrainingProvenance::from_json(const json& j) {
  TrainingProvenance p;
  p.objective = j.value("objective", "none");
  p.epochs = j.value("epochs", std::size_t{0});
  p.best_epoch = j.value("best_epoch", std::size_t{0});
  p.corpus_digest = j.value("corpus_digest", "");
  p.seed = j.value("seed", std::uint64_t{0});
  p.label_names = j.value("label_names", std::vector<std::string>{});
  return p;
}

std::string corpus_digest(std::span<const TableDataset> corpus) {
  std::vector<const TableDataset*> order;
  for (const auto& t : corpus) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });

  Sha256 h;
  auto feed = [&](const std::string& s) { h.update_field(s); };
  for (const TableDataset* t : order) {
    feed(t->name);
    for (const auto& c : t->schema) feed(c.name + ":" + std::string(kind_name(c.kind)));
    for (std::size_t i = 0; i < t->num_rows(); ++i) {
      for (const Cell& c : t->rows[i]) {
        std::ostringstream cell;
        cell.precision(17);
        if (c.missing) {
          cell << "\x01";
        } else {
          cell << c.number << "\x1f" << c.text;
        }
        feed(cell.str());
      }
      if (t->labeled()) feed(t->label_names[static_cast<std::size_t>(t->labels[i])]);
    }
  }
  return h.hex();
}

namespace {

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename U>
U get(std::istream& in) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint: truncated file");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model, const TrainingProvenance& provenance) {
  json header{{"model", to_json(model.config())},
              {"seed", model.seed()},
              {"vocabulary", model.embedder().vocabulary().tokens()},
              {"provenance", provenance.to_json()}};
  const std::string text = header.dump();
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, model.params().size());
  for (const auto& [name, p] : model.params()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (std::size_t d : p.value.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.data.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainingProvenance& provenance) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  write_checkpoint(out, model, provenance);
}

LoadedCheckpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw DataError("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const auto n = get<std::uint64_t>(in);
  std::string text(n, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: truncated header");
  const json header = json::parse(text);

  const ModelConfig config = model_config_from_json(header.at("model"));
  Embedder embedder(config.embed, config.encoder.dim);
  embedder.vocabulary() = Vocabulary::from_tokens(header.at("vocabulary").get<std::vector<std::string>>());
  embedder.vocabulary().freeze();
  LoadedCheckpoint loaded{Model(config, header.at("seed").get<std::uint64_t>(), std::move(embedder)),
                          TrainingProvenance::from_json(header.at("provenance"))};

  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("checkpoint: truncated tensor name");
    const auto rank = get<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    Tensor<float> value(shape);
    if (!in.read(reinterpret_cast<char*>(value.data.data()), static_cast<std::streamsize>(value.size() * sizeof(float)))) {
      throw DataError("checkpoint: truncated tensor " + name);
    }
    loaded.model.params().add(name, std::move(value));
  }
  return loaded;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace tabxfer
