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

#include "dcg/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include "json.hpp"

namespace dcg {
namespace {

std::vector<std::string> SplitOn(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

bool SkipLine(const std::string& line) {
  return line.empty() || line[0] == '#';
}

std::ifstream OpenInput(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

template <typename T>
bool ParseInt(const std::string& text, T* value) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, *value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

ItemCatalog::ItemCatalog()
    : field_names_{kIdFieldName},
      field_index_{{kIdFieldName, kIdField}},
      values_(1),
      value_index_(1) {}

ItemId ItemCatalog::AddItem(
    const std::string& external_id,
    const std::vector<std::pair<std::string, std::string>>& fields) {
  if (by_external_id_.count(external_id)) {
    throw Error("duplicate item id '" + external_id + "'");
  }
  const auto id = static_cast<ItemId>(items_.size());
  Item item;
  item.id = id;
  item.features.push_back({kIdField, id});
  for (const auto& [name, value] : fields) {
    if (name == kIdFieldName) {
      throw Error("field name '" + name + "' is reserved");
    }
    auto [it, inserted] =
        field_index_.emplace(name, static_cast<int>(field_names_.size()));
    if (inserted) {
      field_names_.push_back(name);
      values_.emplace_back();
      value_index_.emplace_back();
    }
    const int field = it->second;
    auto& index = value_index_[field];
    auto [vit, vinserted] = index.emplace(
        value, static_cast<std::int32_t>(values_[field].size()));
    if (vinserted) values_[field].push_back(value);
    item.features.push_back({field, vit->second});
  }
  std::sort(item.features.begin(), item.features.end(),
            [](const Feature& a, const Feature& b) { return a.field < b.field; });
  for (std::size_t i = 1; i < item.features.size(); ++i) {
    if (item.features[i].field == item.features[i - 1].field) {
      throw Error("item '" + external_id + "' repeats field '" +
                  field_names_[item.features[i].field] + "'");
    }
  }
  items_.push_back(std::move(item));
  external_ids_.push_back(external_id);
  by_external_id_.emplace(external_id, id);
  values_[kIdField].push_back(external_id);
  return id;
}

std::optional<ItemId> ItemCatalog::Find(const std::string& external_id) const {
  auto it = by_external_id_.find(external_id);
  if (it == by_external_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> ItemCatalog::FeatureVocabSizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(values_.size());
  for (const auto& v : values_) sizes.push_back(v.size());
  return sizes;
}

const std::string& ItemCatalog::FeatureValue(int field,
                                             std::int32_t id) const {
  return values_.at(field).at(id);
}

Dataset::Dataset(std::vector<ClickRecord> records, std::size_t num_items)
    : records_(std::move(records)), num_items_(num_items) {
  for (const auto& r : records_) {
    if (r.item < 0 || static_cast<std::size_t>(r.item) >= num_items_) {
      throw Error(fmt::format("record of user {} references item {} outside "
                              "catalog of size {}",
                              r.user, r.item, num_items_));
    }
  }
  std::stable_sort(records_.begin(), records_.end(),
                   [](const ClickRecord& a, const ClickRecord& b) {
                     if (a.user != b.user) return a.user < b.user;
                     return a.timestamp < b.timestamp;
                   });
  std::vector<std::int64_t> tied_users;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (i == 0 || records_[i].user != records_[i - 1].user) {
      if (i > 0) offsets_.push_back(i);
      user_ids_.push_back(records_[i].user);
    } else if (records_[i].timestamp == records_[i - 1].timestamp) {
      if (tied_users.empty() || tied_users.back() != records_[i].user) {
        tied_users.push_back(records_[i].user);
      }
    }
  }
  if (!records_.empty()) offsets_.push_back(records_.size());
  if (!tied_users.empty()) {
    throw Error(fmt::format(
        "timestamps not strictly increasing for user(s) {}",
        fmt::join(tied_users, ", ")));
  }
}

std::span<const ClickRecord> Dataset::clicks(std::size_t user) const {
  return std::span<const ClickRecord>(records_).subspan(offsets_.at(user),
                                                        length(user));
}

ClickSequence Dataset::Items(std::size_t user) const {
  ClickSequence items;
  for (const auto& r : clicks(user)) items.push_back(r.item);
  return items;
}

ItemCatalog LoadCatalog(const std::string& path) {
  std::ifstream in = OpenInput(path);
  ItemCatalog catalog;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (SkipLine(line)) continue;
    const auto columns = SplitOn(line, '\t');
    if (columns.size() != 2 || columns[0].empty() || columns[1].empty()) {
      throw ParseError(path, line_no,
                       "expected 'item_id<TAB>field=value(;field=value)*'");
    }
    std::vector<std::pair<std::string, std::string>> fields;
    for (const auto& pair : SplitOn(columns[1], ';')) {
      const auto eq = pair.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == pair.size()) {
        throw ParseError(path, line_no, "malformed feature '" + pair + "'");
      }
      fields.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
    }
    try {
      catalog.AddItem(columns[0], fields);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  if (catalog.empty()) throw Error("empty catalog: " + path);
  return catalog;
}

Dataset LoadInteractions(const std::string& path, const ItemCatalog& catalog) {
  std::ifstream in = OpenInput(path);
  std::vector<ClickRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (SkipLine(line)) continue;
    const auto columns = SplitOn(line, '\t');
    ClickRecord record;
    if (columns.size() != 3 || !ParseInt(columns[0], &record.user) ||
        !ParseInt(columns[2], &record.timestamp)) {
      throw ParseError(path, line_no,
                       "expected 'user_id<TAB>item_id<TAB>timestamp'");
    }
    const auto item = catalog.Find(columns[1]);
    if (!item) {
      throw ParseError(path, line_no, "unknown item id '" + columns[1] + "'");
    }
    record.item = *item;
    records.push_back(record);
  }
  if (records.empty()) throw Error("no interactions in " + path);
  return Dataset(std::move(records), catalog.size());
}

void WriteCatalog(const ItemCatalog& catalog, const std::string& path,
                  const std::string& comment) {
  std::ofstream out = OpenOutput(path);
  if (!comment.empty()) out << "# " << comment << "\n";
  for (const auto& item : catalog.items()) {
    out << catalog.external_id(item.id) << '\t';
    bool first = true;
    for (const auto& f : item.features) {
      if (f.field == ItemCatalog::kIdField) continue;
      if (!first) out << ';';
      out << catalog.field_names()[f.field] << '='
          << catalog.FeatureValue(f.field, f.id);
      first = false;
    }
    // The format requires at least one explicit field.
    if (first) out << "id=" << catalog.external_id(item.id);
    out << '\n';
  }
}

void WriteInteractions(const Dataset& dataset, const ItemCatalog& catalog,
                       const std::string& path, const std::string& comment) {
  std::ofstream out = OpenOutput(path);
  if (!comment.empty()) out << "# " << comment << "\n";
  for (const auto& r : dataset.records()) {
    out << r.user << '\t' << catalog.external_id(r.item) << '\t'
        << r.timestamp << '\n';
  }
}

ClickSequence TruncatePrefix(std::span<const ItemId> seq, std::size_t max_len) {
  const std::size_t start = seq.size() > max_len ? seq.size() - max_len : 0;
  return ClickSequence(seq.begin() + start, seq.end());
}

std::vector<Instance> BuildInstances(const Dataset& dataset,
                                     std::size_t max_prefix_len) {
  if (max_prefix_len < 1) throw Error("max_prefix_len must be >= 1");
  std::vector<Instance> instances;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const ClickSequence items = dataset.Items(u);
    for (std::size_t t = 1; t < items.size(); ++t) {
      instances.push_back(
          {u,
           TruncatePrefix(std::span<const ItemId>(items).first(t),
                          max_prefix_len),
           items[t]});
    }
  }
  return instances;
}

std::vector<std::size_t> ItemClickCounts(const Dataset& dataset) {
  std::vector<std::size_t> counts(dataset.num_items(), 0);
  for (const auto& r : dataset.records()) ++counts[r.item];
  return counts;
}

std::vector<double> EmpiricalItemDistribution(const Dataset& dataset) {
  if (dataset.empty()) throw Error("empirical distribution of empty dataset");
  const auto counts = ItemClickCounts(dataset);
  const double total = static_cast<double>(dataset.num_records());
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = static_cast<double>(counts[i]) / total;
  }
  return p;
}

Split LeaveLastSplit(const Dataset& dataset) {
  Split split;
  std::vector<ClickRecord> train_records;
  struct Held {
    std::int64_t user;
    ClickSequence history;
    ItemId valid;
    ItemId test;
  };
  std::vector<Held> held;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto clicks = dataset.clicks(u);
    if (clicks.size() < 3) {
      ++split.dropped_users;
      continue;
    }
    const std::size_t n = clicks.size();
    Held h{dataset.user_id(u), {}, clicks[n - 2].item, clicks[n - 1].item};
    for (std::size_t t = 0; t + 2 < n; ++t) {
      train_records.push_back(clicks[t]);
      h.history.push_back(clicks[t].item);
    }
    held.push_back(std::move(h));
  }
  split.train = Dataset(std::move(train_records), dataset.num_items());
  // Retained users keep their relative order, so dense index == position.
  for (std::size_t u = 0; u < held.size(); ++u) {
    auto& h = held[u];
    split.valid.push_back({u, h.history, h.valid});
    h.history.push_back(h.valid);
    split.test.push_back({u, std::move(h.history), h.test});
  }
  return split;
}

void WorldConfig::Validate() const {
  if (num_items == 0 || num_users == 0 || relevance_rank == 0 ||
      slate_size == 0 || interactions_per_user == 0) {
    throw ConfigError("world: all counts must be positive");
  }
  if (slate_size > num_items) {
    throw ConfigError("world: slate_size exceeds num_items");
  }
  if (!(exposure_skew >= 0.0) || !std::isfinite(exposure_skew)) {
    throw ConfigError("world: exposure_skew must be >= 0");
  }
  if (!(relevance_scale > 0.0) || !(prior_popularity_mass > 0.0)) {
    throw ConfigError(
        "world: relevance_scale and prior_popularity_mass must be > 0");
  }
}

std::vector<double> GroundTruth::TrueRelevance(std::size_t user) const {
  const std::size_t n = num_items();
  std::vector<double> logits(n);
  const double scale = relevance_scale / std::sqrt(static_cast<double>(rank));
  const double* u = &user_factors.at(user * rank);
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = &item_factors[i * rank];
    double dot = 0.0;
    for (std::size_t k = 0; k < rank; ++k) dot += u[k] * v[k];
    logits[i] = scale * dot;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - m);
    z += l;
  }
  for (auto& l : logits) l /= z;
  return logits;
}

std::vector<double> GroundTruth::MarginalRelevance() const {
  std::vector<double> marginal(num_items(), 0.0);
  for (std::size_t u = 0; u < num_users(); ++u) {
    const auto rel = TrueRelevance(u);
    for (std::size_t i = 0; i < rel.size(); ++i) marginal[i] += rel[i];
  }
  for (auto& m : marginal) m /= static_cast<double>(num_users());
  return marginal;
}

SimulatedWorld SimulateBiasedLogs(const WorldConfig& world) {
  world.Validate();
  Rng rng(world.seed);
  const std::size_t n_items = world.num_items;
  const std::size_t n_users = world.num_users;
  const std::size_t rank = world.relevance_rank;

  GroundTruth truth;
  truth.rank = rank;
  truth.relevance_scale = world.relevance_scale;
  truth.item_factors.resize(n_items * rank);
  truth.user_factors.resize(n_users * rank);
  for (auto& v : truth.item_factors) v = StandardNormal(rng);
  for (auto& v : truth.user_factors) v = StandardNormal(rng);

  // Warm-start popularity is Zipf over a random permutation of the items,
  // independent of relevance.
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n_items; i > 1; --i) {
    std::swap(order[i - 1], order[UniformIndex(rng, i)]);
  }
  truth.initial_popularity.assign(n_items, 0.0);
  double harmonic = 0.0;
  for (std::size_t r = 0; r < n_items; ++r) harmonic += 1.0 / (r + 1.0);
  const double mass = world.prior_popularity_mass * n_items;
  for (std::size_t r = 0; r < n_items; ++r) {
    truth.initial_popularity[order[r]] = mass / ((r + 1.0) * harmonic);
  }
  truth.exposure_counts.assign(n_items, 0);

  // The catalog has the id field plus a coarse category derived from the
  // dominant latent direction, so items share some feature rows.
  SimulatedWorld out;
  for (std::size_t i = 0; i < n_items; ++i) {
    const double* v = &truth.item_factors[i * rank];
    std::size_t best = 0;
    for (std::size_t k = 1; k < rank; ++k) {
      if (std::abs(v[k]) > std::abs(v[best])) best = k;
    }
    const std::size_t category = 2 * best + (v[best] < 0.0 ? 1 : 0);
    out.catalog.AddItem(fmt::format("i{}", i),
                        {{"category", fmt::format("c{}", category)}});
  }

  std::vector<double> popularity = truth.initial_popularity;
  std::vector<double> exposure_weight(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    exposure_weight[i] = std::pow(popularity[i], world.exposure_skew);
  }
  const double scale =
      world.relevance_scale / std::sqrt(static_cast<double>(rank));
  std::vector<ClickRecord> records;
  records.reserve(n_users * world.interactions_per_user);
  using Keyed = std::pair<double, std::size_t>;
  std::vector<std::size_t> slate(world.slate_size);
  std::vector<double> slate_weights(world.slate_size);
  for (std::size_t t = 0; t < world.interactions_per_user; ++t) {
    for (std::size_t u = 0; u < n_users; ++u) {
      // Weighted sampling without replacement: keep the slate_size largest
      // keys log(U) / w.
      std::priority_queue<Keyed, std::vector<Keyed>, std::greater<Keyed>> top;
      for (std::size_t i = 0; i < n_items; ++i) {
        const double w = exposure_weight[i];
        double uniform = UniformUnit(rng);
        while (uniform == 0.0) uniform = UniformUnit(rng);
        const double key = std::log(uniform) / w;
        if (top.size() < world.slate_size) {
          top.emplace(key, i);
        } else if (key > top.top().first) {
          top.pop();
          top.emplace(key, i);
        }
      }
      for (std::size_t s = world.slate_size; s-- > 0;) {
        slate[s] = top.top().second;
        top.pop();
      }
      std::sort(slate.begin(), slate.end());
      const double* uf = &truth.user_factors[u * rank];
      double max_logit = -INFINITY;
      for (std::size_t s = 0; s < slate.size(); ++s) {
        const double* v = &truth.item_factors[slate[s] * rank];
        double dot = 0.0;
        for (std::size_t k = 0; k < rank; ++k) dot += uf[k] * v[k];
        slate_weights[s] = scale * dot;
        max_logit = std::max(max_logit, slate_weights[s]);
        ++truth.exposure_counts[slate[s]];
      }
      double z = 0.0;
      for (auto& w : slate_weights) {
        w = std::exp(w - max_logit);
        z += w;
      }
      double draw = UniformUnit(rng) * z;
      std::size_t pick = slate.size() - 1;
      for (std::size_t s = 0; s < slate.size(); ++s) {
        draw -= slate_weights[s];
        if (draw < 0.0) {
          pick = s;
          break;
        }
      }
      const std::size_t clicked = slate[pick];
      popularity[clicked] += 1.0;
      exposure_weight[clicked] =
          std::pow(popularity[clicked], world.exposure_skew);
      records.push_back({static_cast<std::int64_t>(u),
                         static_cast<ItemId>(clicked),
                         static_cast<std::int64_t>(t * n_users + u)});
    }
  }
  out.dataset = Dataset(std::move(records), n_items);
  out.truth = std::move(truth);
  return out;
}

std::vector<ItemId> SampleUniformExposureClicks(const GroundTruth& truth,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ItemId> clicks(truth.num_users());
  for (std::size_t u = 0; u < truth.num_users(); ++u) {
    const auto rel = truth.TrueRelevance(u);
    double draw = UniformUnit(rng);
    ItemId pick = static_cast<ItemId>(rel.size() - 1);
    for (std::size_t i = 0; i < rel.size(); ++i) {
      draw -= rel[i];
      if (draw < 0.0) {
        pick = static_cast<ItemId>(i);
        break;
      }
    }
    clicks[u] = pick;
  }
  return clicks;
}

void WriteGroundTruth(const GroundTruth& truth, const ItemCatalog& catalog,
                      const std::string& path,
                      const std::string& config_hash) {
  std::ofstream out = OpenOutput(path);
  nlohmann::json meta = {{"type", "meta"},
                         {"rank", truth.rank},
                         {"relevance_scale", truth.relevance_scale},
                         {"num_users", truth.num_users()},
                         {"num_items", truth.num_items()}};
  if (!config_hash.empty()) meta["config_hash"] = config_hash;
  out << meta.dump() << '\n';
  const std::size_t r = truth.rank;
  for (std::size_t u = 0; u < truth.num_users(); ++u) {
    std::vector<double> f(truth.user_factors.begin() + u * r,
                          truth.user_factors.begin() + (u + 1) * r);
    out << nlohmann::json{{"type", "user"}, {"user", u}, {"factors", f}}.dump()
        << '\n';
  }
  for (std::size_t i = 0; i < truth.num_items(); ++i) {
    std::vector<double> f(truth.item_factors.begin() + i * r,
                          truth.item_factors.begin() + (i + 1) * r);
    out << nlohmann::json{{"type", "item"},
                          {"item", catalog.external_id(static_cast<ItemId>(i))},
                          {"factors", f},
                          {"initial_popularity", truth.initial_popularity[i]},
                          {"exposures", truth.exposure_counts[i]}}
               .dump()
        << '\n';
  }
}

GroundTruth LoadGroundTruth(const std::string& path,
                            const ItemCatalog& catalog) {
  std::ifstream in = OpenInput(path);
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  std::size_t num_users = 0;
  std::vector<bool> seen_item;
  while (std::getline(in, line)) {
    ++line_no;
    if (SkipLine(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const std::string type = j.at("type");
      if (type == "meta") {
        truth.rank = j.at("rank");
        truth.relevance_scale = j.at("relevance_scale");
        num_users = j.at("num_users");
        truth.user_factors.assign(num_users * truth.rank, 0.0);
        truth.item_factors.assign(catalog.size() * truth.rank, 0.0);
        truth.initial_popularity.assign(catalog.size(), 0.0);
        truth.exposure_counts.assign(catalog.size(), 0);
        seen_item.assign(catalog.size(), false);
      } else if (type == "user") {
        const std::size_t u = j.at("user");
        const std::vector<double> f = j.at("factors");
        if (u >= num_users || f.size() != truth.rank) {
          throw ParseError(path, line_no, "bad user record");
        }
        std::copy(f.begin(), f.end(), truth.user_factors.begin() + u * truth.rank);
      } else if (type == "item") {
        const auto id = catalog.Find(j.at("item").get<std::string>());
        const std::vector<double> f = j.at("factors");
        if (!id || f.size() != truth.rank) {
          throw ParseError(path, line_no, "bad item record");
        }
        std::copy(f.begin(), f.end(),
                  truth.item_factors.begin() + *id * truth.rank);
        truth.initial_popularity[*id] = j.at("initial_popularity");
        truth.exposure_counts[*id] = j.at("exposures");
        seen_item[*id] = true;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  if (truth.rank == 0) throw Error("ground truth without meta record: " + path);
  if (std::find(seen_item.begin(), seen_item.end(), false) != seen_item.end()) {
    throw Error("ground truth does not cover the catalog: " + path);
  }
  return truth;
}

double GiniCoefficient(std::span<const std::uint64_t> counts) {
  if (counts.empty()) return 0.0;
  std::vector<double> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    total += sorted[i];
    weighted += (i + 1.0) * sorted[i];
  }
  if (total == 0.0) return 0.0;
  return (2.0 * weighted) / (n * total) - (n + 1.0) / n;
}

double TotalVariation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("total variation: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

}  // namespace dcg
