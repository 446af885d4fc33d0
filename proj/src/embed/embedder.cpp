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

#include "tabxfer/embed/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tabxfer/numcore/init.hpp"
#include "tabxfer/util/errors.hpp"
#include "tabxfer/util/log.hpp"

namespace tabxfer {

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::average:
      return "average";
    case Pooling::max:
      return "max";
    case Pooling::self_attention:
      return "self_attention";
    case Pooling::none:
      return "none";
  }
  return "?";
}

Pooling parse_pooling(std::string_view s) {
  if (s == "average" || s == "mean") return Pooling::average;
  if (s == "max") return Pooling::max;
  if (s == "self_attention" || s == "attention") return Pooling::self_attention;
  if (s == "none") return Pooling::none;
  throw ConfigError("unknown pooling strategy '" + std::string(s) + "'");
}

std::string build_phrase(std::string_view column_name, std::string_view value, std::string_view phrase_template) {
  std::string out;
  for (std::size_t i = 0; i < phrase_template.size();) {
    if (phrase_template.compare(i, 6, "{name}") == 0) {
      out += column_name;
      i += 6;
    } else if (phrase_template.compare(i, 7, "{value}") == 0) {
      out += value;
      i += 7;
    } else {
      out += phrase_template[i++];
    }
  }
  return out;
}

Tensor<float> pool_tokens(const Tensor<float>& tokens, Pooling strategy, const Tensor<float>* query) {
  if (tokens.empty() || tokens.rows() == 0) throw std::invalid_argument("pool_tokens: no token vectors");
  if (strategy == Pooling::none) return tokens;
  const std::size_t n = tokens.rows(), d = tokens.cols();
  Tensor<float> out = Tensor<float>::matrix(1, d);
  switch (strategy) {
    case Pooling::average:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out(0, j) += tokens(i, j);
      }
      for (float& v : out.data) v /= static_cast<float>(n);
      break;
    case Pooling::max:
      for (std::size_t j = 0; j < d; ++j) {
        out(0, j) = tokens(0, j);
        for (std::size_t i = 1; i < n; ++i) out(0, j) = std::max(out(0, j), tokens(i, j));
      }
      break;
    case Pooling::self_attention: {
      if (query == nullptr || query->size() != d) throw std::invalid_argument("pool_tokens: attention query width mismatch");
      std::vector<double> s(n);
      double hi = -INFINITY;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(tokens(i, j)) * query->data[j];
        s[i] = acc / std::sqrt(static_cast<double>(d));
        hi = std::max(hi, s[i]);
      }
      double z = 0.0;
      for (double& v : s) z += (v = std::exp(v - hi));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out(0, j) += static_cast<float>(s[i] / z) * tokens(i, j);
      }
      break;
    }
    case Pooling::none:
      break;
  }
  return out;
}

std::vector<RowView> full_views(const TableDataset& table, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all(table.num_features());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  std::vector<RowView> views;
  views.reserve(rows.size());
  for (std::size_t r : rows) views.push_back(RowView{r, all, {}});
  return views;
}

Embedder::Embedder(EmbedConfig config, std::size_t model_dim)
    : Embedder(config, model_dim,
               config.mode == ProviderMode::hashed
                   ? EmbeddingProvider::hashed(config.token_dim ? config.token_dim : model_dim, config.hash_seed)
                   : EmbeddingProvider::from_file(config.lookup_path, config.hash_seed)) {}

Embedder::Embedder(EmbedConfig config, std::size_t model_dim, EmbeddingProvider provider)
    : config_(std::move(config)), model_dim_(model_dim), provider_(std::move(provider)) {
  if (model_dim_ == 0) throw ConfigError("embedder: model dimension must be positive");
  if (config_.phrase_template.find("{value}") == std::string::npos) {
    throw ConfigError("embedder: phrase template must contain {value}");
  }
}

std::vector<std::string> Embedder::phrase_tokens(const std::string& column_name, const std::string& value) const {
  if (trim(value).empty()) return tokenize(column_name);
  return tokenize(build_phrase(column_name, value, config_.phrase_template));
}

void Embedder::register_text(std::string_view text) {
  for (auto& t : tokenize(text)) vocab_.add(t);
}

void Embedder::register_table(const TableDataset& table) {
  for (std::size_t j = 0; j < table.num_features(); ++j) {
    const ColumnSpec& col = table.schema[j];
    register_text(col.name);
    if (col.kind != ColumnKind::categorical) continue;
    for (const std::string& v : col.category_vocab) {
      for (auto& t : phrase_tokens(col.name, v)) vocab_.add(t);
      register_text(v);
    }
  }
}

template <typename T>
void Embedder::init_params(ParamStore<T>& params, std::uint64_t seed) {
  vocab_.freeze();
  const std::size_t dim = token_dim();
  if (config_.tokens_trainable() && vocab_.size() > 0) {
    Tensor<T> table = Tensor<T>::matrix(vocab_.size(), dim);
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      const auto v = provider_.vector(vocab_.tokens()[i]);
      std::copy(v.begin(), v.end(), table.row(i).begin());
    }
    params.add("embed.tokens", std::move(table));
  }
  if (projected()) {
    Rng rng = param_rng(seed, "embed.proj.w");
    params.add("embed.proj.w", xavier_uniform<T>(dim, model_dim_, rng));
  }
  if (config_.pooling == Pooling::self_attention) {
    // Zero query: starts out as average pooling.
    params.add("embed.pool.query", Tensor<T>::matrix(1, dim));
  }
}

template <typename T>
Var Embedder::token_matrix(Graph<T>& g, ParamStore<T>& params, const std::vector<std::string>& tokens) const {
  const std::size_t dim = token_dim();
  if (params.contains("embed.tokens")) {
    std::vector<std::size_t> known_idx, known_pos, unknown_pos;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (auto id = vocab_.find(tokens[i])) {
        known_idx.push_back(*id);
        known_pos.push_back(i);
      } else {
        unknown_pos.push_back(i);
      }
    }
    const Var table = g.param(params.at("embed.tokens"));
    if (unknown_pos.empty()) return g.gather_rows(table, known_idx);
    Tensor<T> extra = Tensor<T>::matrix(unknown_pos.size(), dim);
    for (std::size_t i = 0; i < unknown_pos.size(); ++i) {
      const auto v = provider_.vector(tokens[unknown_pos[i]]);
      std::copy(v.begin(), v.end(), extra.row(i).begin());
    }
    if (known_pos.empty()) return g.input(std::move(extra));
    const Var parts[] = {g.gather_rows(table, known_idx), g.input(std::move(extra))};
    const Var stacked = g.concat_rows(parts);
    std::vector<std::size_t> order(tokens.size());
    for (std::size_t i = 0; i < known_pos.size(); ++i) order[known_pos[i]] = i;
    for (std::size_t i = 0; i < unknown_pos.size(); ++i) order[unknown_pos[i]] = known_pos.size() + i;
    return g.gather_rows(stacked, order);
  }
  Tensor<T> m = Tensor<T>::matrix(tokens.size(), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto v = provider_.vector(tokens[i]);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return g.input(std::move(m));
}

template <typename T>
Var Embedder::pool(Graph<T>& g, ParamStore<T>& params, Var tokens, const Segments& seg) const {
  switch (config_.pooling) {
    case Pooling::max:
      return g.segment_max(tokens, seg);
    case Pooling::self_attention: {
      const Var q = g.param(params.at("embed.pool.query"));
      const Var scores = g.scale(g.matmul_nt(tokens, q), T(1) / std::sqrt(static_cast<T>(token_dim())));
      const Var w = g.segment_softmax(scores, seg);
      return g.segment_sum(g.scale_rows(tokens, w), seg);
    }
    case Pooling::average:
    case Pooling::none:
      break;
  }
  return g.segment_mean(tokens, seg);
}

namespace {

enum class Source { cls, mask, item, token };

struct Slot {
  Source src;
  std::size_t id;
};

}  // namespace

template <typename T>
EmbeddedBatch Embedder::embed(Graph<T>& g, ParamStore<T>& params, const TableDataset& table,
                              std::span<const RowView> views) const {
  const bool token_level = config_.pooling == Pooling::none;

  std::vector<std::string> uniq_tokens;
  std::map<std::string, std::size_t, std::less<>> token_ids;
  auto token_id = [&](const std::string& t) {
    auto [it, fresh] = token_ids.try_emplace(t, uniq_tokens.size());
    if (fresh) uniq_tokens.push_back(t);
    return it->second;
  };

  std::map<std::string, std::size_t, std::less<>> item_ids;
  std::vector<std::size_t> item_flat, item_lengths;
  auto item_id = [&](const std::string& key, const std::vector<std::string>& toks) {
    auto [it, fresh] = item_ids.try_emplace(key, item_lengths.size());
    if (fresh) {
      for (const auto& t : toks) item_flat.push_back(token_id(t));
      item_lengths.push_back(toks.size());
    }
    return it->second;
  };

  EmbeddedBatch batch;
  std::vector<Slot> slot_a, slot_b;
  std::vector<T> mult_a, mult_b;
  bool any_mask = false, any_scale = false;
  std::vector<std::size_t> row_lengths, span_lengths;

  auto push = [&](Slot a, T ma, Slot b, T mb) {
    slot_a.push_back(a);
    mult_a.push_back(ma);
    slot_b.push_back(b);
    mult_b.push_back(mb);
    any_scale = any_scale || ma != T(1);
  };
  const Slot none{Source::cls, 0};

  for (const RowView& view : views) {
    if (!view.masked.empty() && view.masked.size() != view.columns.size()) {
      throw std::invalid_argument("embed: mask length does not match the view's column count");
    }
    const std::size_t start = slot_a.size();
    push({Source::cls, 0}, T(1), none, T(0));
    for (std::size_t k = 0; k < view.columns.size(); ++k) {
      const std::size_t c = view.columns[k];
      const ColumnSpec& col = table.schema.at(c);
      const Cell& cell = table.rows.at(view.row).at(c);
      if (cell.missing) {
        throw DataError("embed: missing cell in column '" + col.name + "' of table " + table.name + " (not curated)");
      }
      const std::string header_key = "h\x1f" + col.name;
      const std::size_t first = slot_a.size();
      batch.feature_first.push_back(first);
      if (!view.masked.empty() && view.masked[k]) {
        any_mask = true;
        push({Source::mask, 0}, T(1), {Source::item, item_id(header_key, header_tokens(col.name))}, T(1));
      } else if (col.kind == ColumnKind::numerical) {
        const double x = cell.number;
        if (x < -1e-6 || x > 1.0 + 1e-6) {
          throw DataError("embed: numerical value " + std::to_string(x) + " in column '" + col.name +
                          "' is outside [0, 1]");
        }
        if (token_level) {
          for (const auto& t : header_tokens(col.name)) push({Source::token, token_id(t)}, static_cast<T>(x), none, T(0));
        } else {
          push({Source::item, item_id(header_key, header_tokens(col.name))}, static_cast<T>(x), none, T(0));
        }
      } else {
        if (trim(cell.text).empty() && empty_value_columns_.insert(col.name).second) {
          log_event("embed.empty_value", {{"table", table.name}, {"column", col.name}});
        }
        const auto toks = phrase_tokens(col.name, cell.text);
        if (token_level) {
          for (const auto& t : toks) push({Source::token, token_id(t)}, T(1), none, T(0));
        } else {
          push({Source::item, item_id("p\x1f" + col.name + "\x1f" + cell.text, toks)}, T(1), none, T(0));
        }
      }
      for (std::size_t p = first; p < slot_a.size(); ++p) batch.feature_positions.push_back(p);
      span_lengths.push_back(slot_a.size() - first);
      if (slot_a.size() - first != 1) batch.single_position = false;
    }
    row_lengths.push_back(slot_a.size() - start);
  }
  batch.rows = Segments::from_lengths(row_lengths);
  batch.feature_spans = Segments::from_lengths(span_lengths);

  // Bank: [cls, mask?, pooled items..., tokens...]
  std::vector<Var> pieces{g.param(params.at("encoder.cls"))};
  if (any_mask) pieces.push_back(g.param(params.at("mtm.mask")));
  const std::size_t item_base = pieces.size();
  const bool use_tokens = std::any_of(slot_a.begin(), slot_a.end(), [](Slot s) { return s.src == Source::token; });
  if (!uniq_tokens.empty()) {
    const Var tok = token_matrix(g, params, uniq_tokens);
    const Var w = projected() ? g.param(params.at("embed.proj.w")) : Var{};
    if (!item_lengths.empty()) {
      Var pooled = pool(g, params, g.gather_rows(tok, item_flat), Segments::from_lengths(item_lengths));
      if (projected()) pooled = g.matmul(pooled, w);
      pieces.push_back(pooled);
    }
    if (use_tokens) pieces.push_back(projected() ? g.matmul(tok, w) : tok);
  }
  const Var bank = pieces.size() == 1 ? pieces[0] : g.concat_rows(pieces);
  const std::size_t token_base = item_base + item_lengths.size();

  auto resolve = [&](Slot s) -> std::size_t {
    switch (s.src) {
      case Source::cls:
        return 0;
      case Source::mask:
        return 1;
      case Source::item:
        return item_base + s.id;
      case Source::token:
        return token_base + s.id;
    }
    return 0;
  };
  const std::size_t n = slot_a.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = resolve(slot_a[i]);
  Var x = g.gather_rows(bank, idx);
  if (any_scale) x = g.scale_rows(x, g.input(Tensor<T>(Shape{n, 1}, mult_a)));
  if (any_mask) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = resolve(slot_b[i]);
    x = g.add(x, g.scale_rows(g.gather_rows(bank, idx), g.input(Tensor<T>(Shape{n, 1}, mult_b))));
  }
  batch.x = x;
  return batch;
}

template <typename T>
Var Embedder::feature_outputs(Graph<T>& g, Var h, const EmbeddedBatch& batch) const {
  if (batch.single_position) return g.gather_rows(h, batch.feature_first);
  return g.segment_mean(g.gather_rows(h, batch.feature_positions), batch.feature_spans);
}

template <typename T>
Tensor<T> Embedder::text_embeddings(ParamStore<T>& params, const std::vector<std::vector<std::string>>& texts) const {
  Graph<T> g;
  std::vector<std::string> uniq;
  std::map<std::string, std::size_t, std::less<>> ids;
  std::vector<std::size_t> flat, lengths;
  for (const auto& toks : texts) {
    if (toks.empty()) throw std::invalid_argument("text_embeddings: empty token list");
    for (const auto& t : toks) {
      auto [it, fresh] = ids.try_emplace(t, uniq.size());
      if (fresh) uniq.push_back(t);
      flat.push_back(it->second);
    }
    lengths.push_back(toks.size());
  }
  Var pooled = pool(g, params, g.gather_rows(token_matrix(g, params, uniq), flat), Segments::from_lengths(lengths));
  if (projected()) pooled = g.matmul(pooled, g.param(params.at("embed.proj.w")));
  return g.value(pooled);
}

template <typename T>
Tensor<T> Embedder::categorical_targets(ParamStore<T>& params, const std::vector<std::string>& values) const {
  std::vector<std::vector<std::string>> texts;
  texts.reserve(values.size());
  for (const auto& v : values) texts.push_back(tokenize(v));
  return text_embeddings(params, texts);
}

template <typename T>
Tensor<T> Embedder::header_embedding(ParamStore<T>& params, const std::string& column_name) const {
  return text_embeddings(params, {header_tokens(column_name)});
}

template <typename T>
Tensor<T> Embedder::encode_categorical(ParamStore<T>& params, const std::string& column_name,
                                       const std::string& value) const {
  if (trim(value).empty() && empty_value_columns_.insert(column_name).second) {
    log_event("embed.empty_value", {{"column", column_name}});
  }
  return text_embeddings(params, {phrase_tokens(column_name, value)});
}

template <typename T>
Tensor<T> Embedder::encode_numerical(ParamStore<T>& params, const std::string& column_name, double x) const {
  if (x < -1e-6 || x > 1.0 + 1e-6) {
    throw DataError("encode_numerical: value " + std::to_string(x) + " for '" + column_name + "' is outside [0, 1]");
  }
  Tensor<T> c = header_embedding(params, column_name);
  for (T& v : c.data) v *= static_cast<T>(x);
  return c;
}

template <typename T>
Tensor<T> Embedder::encode_row(ParamStore<T>& params, const TableDataset& table, std::size_t row) const {
  Graph<T> g;
  const std::size_t rows[] = {row};
  const auto views = full_views(table, rows);
  const EmbeddedBatch b = embed(g, params, table, views);
  return g.value(feature_outputs(g, b.x, b));
}

#define TABXFER_EMBEDDER_INSTANTIATE(T)                                                                          \
  template void Embedder::init_params(ParamStore<T>&, std::uint64_t);                                            \
  template EmbeddedBatch Embedder::embed(Graph<T>&, ParamStore<T>&, const TableDataset&, std::span<const RowView>) \
      const;                                                                                                     \
  template Var Embedder::feature_outputs(Graph<T>&, Var, const EmbeddedBatch&) const;                            \
  template Tensor<T> Embedder::text_embeddings(ParamStore<T>&, const std::vector<std::vector<std::string>>&) const; \
  template Tensor<T> Embedder::categorical_targets(ParamStore<T>&, const std::vector<std::string>&) const;       \
  template Tensor<T> Embedder::header_embedding(ParamStore<T>&, const std::string&) const;                       \
  template Tensor<T> Embedder::encode_categorical(ParamStore<T>&, const std::string&, const std::string&) const;  \
  template Tensor<T> Embedder::encode_numerical(ParamStore<T>&, const std::string&, double) const;               \
  template Tensor<T> Embedder::encode_row(ParamStore<T>&, const TableDataset&, std::size_t) const;

TABXFER_EMBEDDER_INSTANTIATE(float)
TABXFER_EMBEDDER_INSTANTIATE(double)

}  // namespace tabxfer
