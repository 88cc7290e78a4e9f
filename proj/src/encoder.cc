// Copyright 2026 The DCG Authors.
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

#include "dcg/encoder.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace dcg {
namespace {

double Dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

double Norm(const double* a, std::size_t n) { return std::sqrt(Dot(a, a, n)); }

// Mean of the item's feature rows for one tower. Shared by EncodeItem and the
// tape path so both produce bit-identical values.
void ItemVector(const Parameters& params, const Item& item, Tower tower,
                double* out) {
  const std::size_t d = params.dim();
  std::fill(out, out + d, 0.0);
  if (item.features.empty()) {
    throw Error(fmt::format("item {} has no features", item.id));
  }
  for (const auto& f : item.features) {
    if (f.field < 0 || static_cast<std::size_t>(f.field) >= params.num_fields() ||
        f.id < 0 ||
        static_cast<std::size_t>(f.id) >= params.vocab_sizes()[f.field]) {
      throw Error(fmt::format("item {}: feature ({}, {}) out of range", item.id,
                              f.field, f.id));
    }
    const auto row = params.row(params.TableIndex(tower, f.field), f.id);
    for (std::size_t k = 0; k < d; ++k) out[k] += row[k];
  }
  const double count = static_cast<double>(item.features.size());
  for (std::size_t k = 0; k < d; ++k) out[k] /= count;
}

std::vector<double> SequenceWeights(std::size_t length, double decay) {
  std::vector<double> w(length);
  double total = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    w[t] = std::pow(decay, static_cast<double>(length - 1 - t));
    total += w[t];
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace

std::string SimilarityName(SimilarityMode s) {
  return s == SimilarityMode::kCosine ? "cosine" : "inner_product";
}

SimilarityMode ParseSimilarity(const std::string& name) {
  if (name == "cosine") return SimilarityMode::kCosine;
  if (name == "inner_product") return SimilarityMode::kInnerProduct;
  throw ConfigError("unknown similarity mode '" + name + "'");
}

void EncoderConfig::Validate() const {
  if (dim == 0) throw ConfigError("encoder.dim must be positive");
  if (!(temperature > 0.0)) throw ConfigError("encoder.temperature must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ConfigError("encoder.decay must be in (0, 1]");
  }
  if (!(init_scale > 0.0)) throw ConfigError("encoder.init_scale must be > 0");
}

Parameters::Parameters(const EncoderConfig& config,
                       std::vector<std::size_t> vocab_sizes)
    : config_(config), vocab_sizes_(std::move(vocab_sizes)) {
  config_.Validate();
  if (vocab_sizes_.empty()) throw Error("parameters need at least one field");
  for (std::size_t s = 0; s < num_table_sets(); ++s) {
    for (std::size_t rows : vocab_sizes_) {
      tables_.emplace_back(rows * config_.dim, 0.0);
    }
  }
}

Parameters Parameters::Random(const EncoderConfig& config,
                              std::vector<std::size_t> vocab_sizes,
                              std::uint64_t seed) {
  Parameters params(config, std::move(vocab_sizes));
  Rng rng(seed);
  for (auto& t : params.tables_) {
    for (auto& v : t) v = config.init_scale * StandardNormal(rng);
  }
  return params;
}

void Parameters::ScaleAll(double factor) {
  for (auto& t : tables_) {
    for (auto& v : t) v *= factor;
  }
}

std::span<double> Gradients::Row(std::size_t t, std::size_t r) {
  auto& row = rows_.at(t)[r];
  if (row.empty()) row.assign(dim_, 0.0);
  return row;
}

const std::vector<double>* Gradients::Find(std::size_t t, std::size_t r) const {
  const auto& table = rows_.at(t);
  auto it = table.find(r);
  return it == table.end() ? nullptr : &it->second;
}

std::size_t Gradients::num_rows() const {
  std::size_t n = 0;
  for (const auto& t : rows_) n += t.size();
  return n;
}

void Gradients::Add(const Gradients& other, double scale) {
  if (rows_.empty()) {
    dim_ = other.dim_;
    rows_.resize(other.rows_.size());
  }
  if (other.rows_.size() != rows_.size() || other.dim_ != dim_) {
    throw Error("gradient shape mismatch");
  }
  for (std::size_t t = 0; t < rows_.size(); ++t) {
    for (const auto& [r, g] : other.rows_[t]) {
      auto row = Row(t, r);
      for (std::size_t k = 0; k < dim_; ++k) row[k] += scale * g[k];
    }
  }
}

void Gradients::Scale(double factor) {
  for (auto& t : rows_) {
    for (auto& [r, g] : t) {
      for (auto& v : g) v *= factor;
    }
  }
}

std::vector<double> EncodeItem(const Parameters& params, const Item& item,
                               Tower tower) {
  std::vector<double> out(params.dim());
  ItemVector(params, item, tower, out.data());
  return out;
}

std::vector<double> EncodeUser(const Parameters& params,
                               const ItemCatalog& catalog,
                               std::span<const ItemId> sequence) {
  if (sequence.empty()) throw Error("cannot encode an empty click sequence");
  const std::size_t d = params.dim();
  const auto weights = SequenceWeights(sequence.size(), params.config().decay);
  std::vector<double> out(d, 0.0), item(d);
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    ItemVector(params, catalog.item(sequence[t]), Tower::kUser, item.data());
    for (std::size_t k = 0; k < d; ++k) out[k] += weights[t] * item[k];
  }
  return out;
}

double Similarity(std::span<const double> u, std::span<const double> v,
                  SimilarityMode mode, double temperature) {
  if (u.size() != v.size()) throw Error("similarity: dimension mismatch");
  const double dot = Dot(u.data(), v.data(), u.size());
  if (mode == SimilarityMode::kInnerProduct) return dot;
  const double nu = Norm(u.data(), u.size());
  const double nv = Norm(v.data(), v.size());
  if (nu == 0.0 || nv == 0.0) {
    throw Error("cosine similarity of a zero vector");
  }
  // Same association order as the tape path: normalize, then dot.
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += (u[k] / nu) * (v[k] / nv);
  return s / temperature;
}

namespace {

class TapeBuilder {
 public:
  TapeBuilder(const Parameters& params, const ItemCatalog& catalog,
              const BatchInput& input)
      : params_(params), catalog_(catalog), input_(input) {
    tape_.dim = params.dim();
    tape_.num_fields = params.num_fields();
    tape_.num_tables = params.num_tables();
    tape_.similarity = params.config().similarity;
    tape_.temperature = params.config().temperature;
  }

  std::size_t ItemNode(ItemId item, Tower tower) {
    const std::size_t set = params_.TableIndex(tower, 0) / params_.num_fields();
    const std::int64_t key =
        static_cast<std::int64_t>(set) * (std::int64_t{1} << 32) + item;
    auto it = item_nodes_.find(key);
    if (it != item_nodes_.end()) return it->second;
    if (item < 0 || static_cast<std::size_t>(item) >= catalog_.size()) {
      throw Error(fmt::format("item {} outside catalog", item));
    }
    Tape::Node node;
    node.kind = Tape::NodeKind::kItem;
    node.item = item;
    node.table_set = set;
    node.features = catalog_.item(item).features;
    const std::size_t index = AddNode(std::move(node));
    ItemVector(params_, catalog_.item(item), tower, Value(index));
    item_nodes_.emplace(key, index);
    ++stats_.item_encodes;
    return index;
  }

  std::size_t SequenceNode(std::span<const ItemId> sequence) {
    if (sequence.empty()) throw Error("cannot encode an empty click sequence");
    const auto weights =
        SequenceWeights(sequence.size(), params_.config().decay);
    Tape::Node node;
    node.kind = Tape::NodeKind::kSequence;
    for (std::size_t t = 0; t < sequence.size(); ++t) {
      node.terms.emplace_back(ItemNode(sequence[t], Tower::kUser), weights[t]);
    }
    const std::size_t index = AddNode(std::move(node));
    double* out = Value(index);
    std::fill(out, out + tape_.dim, 0.0);
    for (const auto& [item_node, w] : tape_.nodes[index].terms) {
      const double* v = Value(item_node);
      for (std::size_t k = 0; k < tape_.dim; ++k) out[k] += w * v[k];
    }
    ++stats_.sequence_encodes;
    return index;
  }

  std::size_t CandidateNode(const Candidate& c) {
    switch (c.kind) {
      case CandidateKind::kItem: {
        const auto item = static_cast<ItemId>(c.index);
        if (candidate_items_.insert(item).second) {
          ++stats_.candidate_item_encodes;
        }
        return ItemNode(item, Tower::kItem);
      }
      case CandidateKind::kSequence: {
        auto it = target_nodes_.find(c.index);
        if (it != target_nodes_.end()) return it->second;
        if (c.index < 0 ||
            static_cast<std::size_t>(c.index) >= input_.target_sequences.size()) {
          throw Error("candidate references a missing target sequence");
        }
        const std::size_t node = SequenceNode(input_.target_sequences[c.index]);
        target_nodes_.emplace(c.index, node);
        return node;
      }
      case CandidateKind::kCached: {
        auto it = cached_nodes_.find(c.index);
        if (it != cached_nodes_.end()) return it->second;
        const std::size_t d = tape_.dim;
        if (c.index < 0 ||
            (static_cast<std::size_t>(c.index) + 1) * d >
                input_.cached_vectors.size()) {
          throw Error("candidate references a missing cached vector");
        }
        Tape::Node node;
        node.kind = Tape::NodeKind::kConstant;
        const std::size_t index = AddNode(std::move(node));
        std::copy_n(input_.cached_vectors.begin() + c.index * d, d,
                    Value(index));
        cached_nodes_.emplace(c.index, index);
        return index;
      }
    }
    throw Error("bad candidate kind");
  }

  ForwardResult Run() {
    const auto& queries = input_.queries;
    if (input_.candidates.size() != queries.size()) {
      throw Error("batch forward: one candidate set per query required");
    }
    for (const auto& q : queries) tape_.query_nodes.push_back(SequenceNode(q));
    std::unordered_map<const CandidatePool*, std::size_t> pool_index;
    for (const auto& set : input_.candidates) {
      if (!set.pool || set.pos_index >= set.pool->size()) {
        throw Error("candidate set without a valid positive index");
      }
      auto [it, inserted] =
          pool_index.emplace(set.pool.get(), tape_.pools.size());
      if (inserted) {
        std::vector<std::size_t> nodes;
        nodes.reserve(set.pool->size());
        for (const auto& c : *set.pool) nodes.push_back(CandidateNode(c));
        tape_.pools.push_back(std::move(nodes));
      }
      tape_.query_pool.push_back(it->second);
    }
    Normalize();

    ForwardResult result;
    result.logits.resize(queries.size());
    const std::size_t d = tape_.dim;
    const bool cosine = tape_.similarity == SimilarityMode::kCosine;
    const std::vector<double>& vecs = cosine ? tape_.unit : tape_.values;
    for (std::size_t b = 0; b < queries.size(); ++b) {
      const auto& pool = tape_.pools[tape_.query_pool[b]];
      const double* u = &vecs[tape_.query_nodes[b] * d];
      auto& row = result.logits[b];
      row.resize(pool.size());
      for (std::size_t j = 0; j < pool.size(); ++j) {
        const double s = Dot(u, &vecs[pool[j] * d], d);
        row[j] = cosine ? s / tape_.temperature : s;
      }
    }
    result.tape = std::move(tape_);
    result.stats = stats_;
    return result;
  }

 private:
  std::size_t AddNode(Tape::Node node) {
    tape_.nodes.push_back(std::move(node));
    tape_.values.resize(tape_.nodes.size() * tape_.dim, 0.0);
    return tape_.nodes.size() - 1;
  }

  double* Value(std::size_t node) { return &tape_.values[node * tape_.dim]; }

  void Normalize() {
    const std::size_t d = tape_.dim;
    const std::size_t n = tape_.nodes.size();
    tape_.norms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      tape_.norms[i] = Norm(&tape_.values[i * d], d);
    }
    if (tape_.similarity != SimilarityMode::kCosine) return;
    tape_.unit.resize(n * d);
    // Only nodes that are scored need a unit vector; item nodes used purely
    // inside sequences may legitimately be zero.
    std::vector<bool> scored(n, false);
    for (std::size_t q : tape_.query_nodes) scored[q] = true;
    for (const auto& pool : tape_.pools) {
      for (std::size_t c : pool) scored[c] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!scored[i]) continue;
      if (tape_.norms[i] == 0.0) {
        throw Error("cosine similarity of a zero vector");
      }
      for (std::size_t k = 0; k < d; ++k) {
        tape_.unit[i * d + k] = tape_.values[i * d + k] / tape_.norms[i];
      }
    }
  }

  const Parameters& params_;
  const ItemCatalog& catalog_;
  const BatchInput& input_;
  Tape tape_;
  ForwardStats stats_;
  std::unordered_map<std::int64_t, std::size_t> item_nodes_;
  std::unordered_map<std::int64_t, std::size_t> target_nodes_;
  std::unordered_map<std::int64_t, std::size_t> cached_nodes_;
  std::unordered_set<ItemId> candidate_items_;
};

}  // namespace

ForwardResult BatchForward(const Parameters& params, const ItemCatalog& catalog,
                           const BatchInput& input) {
  return TapeBuilder(params, catalog, input).Run();
}

Gradients BatchBackward(const Tape& tape, const Logits& dlogits) {
  const std::size_t d = tape.dim;
  const std::size_t n = tape.nodes.size();
  if (dlogits.size() != tape.query_nodes.size()) {
    throw Error(fmt::format("batch backward: {} dlogit rows for {} queries",
                            dlogits.size(), tape.query_nodes.size()));
  }
  std::vector<double> grad(n * d, 0.0);
  std::vector<bool> touched(n, false);
  const bool cosine = tape.similarity == SimilarityMode::kCosine;
  const double inv_t = 1.0 / tape.temperature;

  for (std::size_t b = 0; b < dlogits.size(); ++b) {
    const auto& pool = tape.pools[tape.query_pool[b]];
    if (dlogits[b].size() != pool.size()) {
      throw Error(fmt::format("batch backward: row {} has {} dlogits for {} "
                              "candidates",
                              b, dlogits[b].size(), pool.size()));
    }
    const std::size_t q = tape.query_nodes[b];
    double* gq = &grad[q * d];
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const double g = dlogits[b][j];
      if (g == 0.0) continue;
      const std::size_t c = pool[j];
      const bool live = tape.nodes[c].kind != Tape::NodeKind::kConstant;
      double* gc = &grad[c * d];
      touched[q] = true;
      if (live) touched[c] = true;
      if (!cosine) {
        const double* u = &tape.values[q * d];
        const double* v = &tape.values[c * d];
        for (std::size_t k = 0; k < d; ++k) gq[k] += g * v[k];
        if (live) {
          for (std::size_t k = 0; k < d; ++k) gc[k] += g * u[k];
        }
        continue;
      }
      // phi = <u^, v^> / t;  dphi/du = (v^ - cos u^) / (t |u|).
      const double* uh = &tape.unit[q * d];
      const double* vh = &tape.unit[c * d];
      const double cos = Dot(uh, vh, d);
      const double sq = g * inv_t / tape.norms[q];
      for (std::size_t k = 0; k < d; ++k) gq[k] += sq * (vh[k] - cos * uh[k]);
      if (live) {
        const double sc = g * inv_t / tape.norms[c];
        for (std::size_t k = 0; k < d; ++k) gc[k] += sc * (uh[k] - cos * vh[k]);
      }
    }
  }

  // Sequence nodes only reference item nodes created before them.
  for (std::size_t i = n; i-- > 0;) {
    const auto& node = tape.nodes[i];
    if (node.kind != Tape::NodeKind::kSequence || !touched[i]) continue;
    const double* gs = &grad[i * d];
    for (const auto& [item_node, w] : node.terms) {
      double* gi = &grad[item_node * d];
      for (std::size_t k = 0; k < d; ++k) gi[k] += w * gs[k];
      touched[item_node] = true;
    }
  }

  Gradients out(tape.num_tables, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = tape.nodes[i];
    if (node.kind != Tape::NodeKind::kItem || !touched[i]) continue;
    const double* gi = &grad[i * d];
    if (std::all_of(gi, gi + d, [](double x) { return x == 0.0; })) continue;
    const double share = 1.0 / static_cast<double>(node.features.size());
    for (const auto& f : node.features) {
      auto row = out.Row(node.table_set * tape.num_fields + f.field, f.id);
      for (std::size_t k = 0; k < d; ++k) row[k] += share * gi[k];
    }
  }
  return out;
}

}  // namespace dcg
