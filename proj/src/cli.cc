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

#include "dcg/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dcg/encoder.h"
#include "dcg/oracle.h"
#include "dcg/retrieval_eval.h"
#include "json.hpp"

namespace dcg {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Flags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string mode;
};

void SetUpLogging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("dcg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("DCG_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level)
                          : spdlog::level::info);
}

KeyValueConfig LoadConfig(const Flags& flags, bool required) {
  if (flags.config.empty()) {
    if (required) throw ConfigError("this command needs --config");
    return {};
  }
  if (!fs::exists(flags.config)) {
    throw ConfigError("config file not found: " + flags.config);
  }
  KeyValueConfig kv = KeyValueConfig::Load(flags.config);
  kv.RequireKnown(KnownConfigKeys());
  return kv;
}

void ApplySeed(const Flags& flags, KeyValueConfig& kv, const std::string& key) {
  if (flags.seed) kv.Set(key, std::to_string(*flags.seed));
}

fs::path OutputDir(const Flags& flags) {
  fs::path dir(flags.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error("cannot create output directory " + dir.string());
  }
  return dir;
}

void WriteJson(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path DataDir(const KeyValueConfig& kv) {
  return fs::path(kv.GetString("data.dir", "data"));
}

int Simulate(const Flags& flags) {
  KeyValueConfig kv = LoadConfig(flags, true);
  ApplySeed(flags, kv, "world.seed");
  const WorldConfig world = WorldConfigFromKeyValue(kv);
  const std::string hash = HexDigest(kv.Hash());
  const fs::path dir = OutputDir(flags);
  const SimulatedWorld sim = SimulateBiasedLogs(world);
  const std::string comment = "config_hash=" + hash;
  WriteCatalog(sim.catalog, (dir / "catalog.tsv").string(), comment);
  WriteInteractions(sim.dataset, sim.catalog,
                    (dir / "interactions.tsv").string(), comment);
  WriteGroundTruth(sim.truth, sim.catalog, (dir / "truth.jsonl").string(), hash);
  std::vector<std::uint64_t> clicks;
  for (std::size_t c : ItemClickCounts(sim.dataset)) clicks.push_back(c);
  fmt::print("simulated {} users, {} items, {} clicks; click gini {:.4f}\n",
             sim.dataset.num_users(), sim.catalog.size(),
             sim.dataset.num_records(), GiniCoefficient(clicks));
  fmt::print("wrote {}/{{catalog.tsv,interactions.tsv,truth.jsonl}} "
             "(config {})\n",
             dir.string(), hash);
  return kExitOk;
}

struct LoadedData {
  ItemCatalog catalog;
  Dataset dataset;
};

LoadedData LoadData(const KeyValueConfig& kv) {
  const fs::path dir = DataDir(kv);
  LoadedData data;
  data.catalog = LoadCatalog((dir / "catalog.tsv").string());
  data.dataset = LoadInteractions((dir / "interactions.tsv").string(),
                                  data.catalog);
  return data;
}

int TrainCommand(const Flags& flags) {
  KeyValueConfig kv = LoadConfig(flags, true);
  ApplySeed(flags, kv, "train.seed");
  if (!flags.mode.empty()) kv.Set("train.mode", flags.mode);
  if (flags.workers == 0) throw ConfigError("--workers must be >= 1");
  const TrainConfig config = TrainConfig::FromKeyValue(kv);
  config.Validate();
  const std::uint64_t hash_value = kv.Hash();
  const std::string hash = HexDigest(hash_value);
  const fs::path dir = OutputDir(flags);

  const LoadedData data = LoadData(kv);
  const Split split = LeaveLastSplit(data.dataset);
  spdlog::info("training {} on {} users ({} dropped), {} workers",
               TrainModeName(config.mode), split.train.num_users(),
               split.dropped_users, flags.workers);
  const TrainResult result =
      RunWorkers(config, data.catalog, split.train, flags.workers, split.valid);
  SaveCheckpoint(result.params, (dir / "model.ckpt").string(), hash_value);
  WriteHistory(result.history, config, (dir / "history.jsonl").string(), hash);

  const EpochRecord& last = result.history.back();
  fmt::print("mode {}  epochs {}  final loss {:.6f}", TrainModeName(config.mode),
             result.history.size(), last.mean_loss);
  if (last.valid_hit_rate) {
    fmt::print("  valid HR@{} {:.4f}", config.eval_k, *last.valid_hit_rate);
  }
  fmt::print("\nitem forwards {}  user forwards {}  candidate bytes {}\n",
             last.counters.item_encoder_forwards,
             last.counters.user_encoder_forwards,
             last.counters.candidate_bytes_moved);
  fmt::print("wrote {}/model.ckpt and history.jsonl (config {})\n",
             dir.string(), hash);
  return kExitOk;
}

int EvalCommand(const Flags& flags) {
  KeyValueConfig kv = LoadConfig(flags, true);
  ApplySeed(flags, kv, "eval.seed");
  const std::string hash = HexDigest(kv.Hash());
  const fs::path dir = OutputDir(flags);
  const TrainConfig train_config = TrainConfig::FromKeyValue(kv);

  EvalOptions options;
  options.k = kv.GetUint("eval.k", options.k);
  options.protocol =
      ParseEvalProtocol(kv.GetString("eval.protocol", EvalProtocolName(options.protocol)));
  options.sampled_negatives =
      kv.GetUint("eval.sampled_negatives", options.sampled_negatives);
  options.seed = kv.GetUint("eval.seed", options.seed);
  options.max_prefix_len = train_config.max_prefix_len;
  const std::size_t buckets = kv.GetUint("eval.buckets", 10);
  if (options.k == 0) throw ConfigError("eval.k must be positive");

  const LoadedData data = LoadData(kv);
  if (options.k > data.catalog.size()) {
    throw ConfigError("eval.k exceeds the number of items");
  }
  const std::string checkpoint =
      kv.GetString("eval.checkpoint", (dir / "model.ckpt").string());
  const Parameters params = LoadCheckpoint(checkpoint);
  const Split split = LeaveLastSplit(data.dataset);
  if (split.test.empty()) throw Error("no user has enough clicks to evaluate");

  const RankingResult ranking =
      EvaluateRanking(params, data.catalog, split.test, options);
  std::vector<ClickSequence> queries;
  for (const auto& inst : split.test) queries.push_back(inst.prefix);
  const RecommendationLog recs =
      options.protocol == EvalProtocol::kFull
          ? ranking.recommendations
          : Recommend(params, data.catalog, queries, options.k,
                      options.max_prefix_len);

  std::vector<double> popularity;
  for (std::size_t c : ItemClickCounts(split.train)) {
    popularity.push_back(static_cast<double>(c));
  }
  const auto histogram = DegreeHistogram(recs, popularity, buckets);

  Json j;
  j["config_hash"] = hash;
  j["protocol"] = EvalProtocolName(options.protocol);
  if (options.protocol == EvalProtocol::kSampled) {
    j["sampled_negatives"] = options.sampled_negatives;
  }
  j["k"] = options.k;
  j["seed"] = options.seed;
  j["instances"] = ranking.metrics.count;
  j["hit_rate"] = ranking.metrics.hit_rate;
  j["ndcg"] = ranking.metrics.ndcg;
  j["mrr"] = ranking.metrics.mrr;
  j["aggregate_diversity"] = AggregateDiversity(recs);
  j["popularity_index"] = PopularityIndex(recs, popularity);
  j["popularity_index_definition"] =
      "mean popularity percentile of recommended items, mid-rank ties, "
      "training click counts";

  const fs::path truth_path = DataDir(kv) / "truth.jsonl";
  if (fs::exists(truth_path)) {
    const GroundTruth truth = LoadGroundTruth(truth_path.string(), data.catalog);
    const auto clicks = SampleUniformExposureClicks(truth, options.seed);
    double hits = 0.0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      const auto user = split.train.user_id(split.test[i].user);
      if (user < 0 || static_cast<std::size_t>(user) >= clicks.size()) {
        throw Error(fmt::format("user {} missing from the ground truth", user));
      }
      hits += HitAtK(recs[i], clicks[user], options.k);
    }
    j["truth_hit_rate"] = hits / static_cast<double>(split.test.size());
  }
  WriteJson(j, dir / "metrics.json");
  WriteHistogramCsv(histogram, (dir / "histogram.csv").string(), hash);

  fmt::print("{} protocol, {} users: HR@{} {:.4f}  NDCG@{} {:.4f}  MRR@{} {:.4f}\n",
             EvalProtocolName(options.protocol), ranking.metrics.count,
             options.k, ranking.metrics.hit_rate, options.k,
             ranking.metrics.ndcg, options.k, ranking.metrics.mrr);
  fmt::print("aggregate diversity {}  popularity index {:.4f}\n",
             j["aggregate_diversity"].get<std::size_t>(),
             j["popularity_index"].get<double>());
  if (j.contains("truth_hit_rate")) {
    fmt::print("uniform-exposure truth HR@{} {:.4f}\n", options.k,
               j["truth_hit_rate"].get<double>());
  }
  fmt::print("wrote {}/metrics.json and histogram.csv (config {})\n",
             dir.string(), hash);
  return kExitOk;
}

int VerifyTheoremCommand(const Flags& flags) {
  KeyValueConfig kv = LoadConfig(flags, false);
  ApplySeed(flags, kv, "theorem.seed");
  const std::string hash = HexDigest(kv.Hash());
  TheoremOptions o;
  o.instances = kv.GetUint("theorem.instances", o.instances);
  o.contexts = kv.GetUint("theorem.contexts", o.contexts);
  o.items = kv.GetUint("theorem.items", o.items);
  o.min_prob = kv.GetDouble("theorem.min_prob", o.min_prob);
  o.fit.negatives = kv.GetUint("theorem.negatives", o.fit.negatives);
  o.fit.steps = kv.GetUint("theorem.steps", o.fit.steps);
  o.fit.lr_start = kv.GetDouble("theorem.lr_start", o.fit.lr_start);
  o.fit.lr_end = kv.GetDouble("theorem.lr_end", o.fit.lr_end);
  o.fit.tv_tolerance = kv.GetDouble("theorem.tv_tolerance", o.fit.tv_tolerance);
  o.agreement_tolerance =
      kv.GetDouble("theorem.agreement_tolerance", o.agreement_tolerance);
  o.kl_tolerance = kv.GetDouble("theorem.kl_tolerance", o.kl_tolerance);
  o.seed = kv.GetUint("theorem.seed", o.seed);
  o.fit.seed = o.seed;
  if (o.items == 0 || o.contexts == 0 || o.instances == 0) {
    throw ConfigError("theorem sizes must be positive");
  }
  if (o.min_prob * static_cast<double>(o.items) >= 1.0 || o.min_prob < 0.0) {
    throw ConfigError("theorem.min_prob times theorem.items must be below 1");
  }

  const TheoremReport report = VerifyTheorem(o);
  Json j;
  j["config_hash"] = hash;
  j["contexts"] = o.contexts;
  j["items"] = o.items;
  j["negatives"] = o.fit.negatives;
  j["steps"] = o.fit.steps;
  j["tv_tolerance"] = o.fit.tv_tolerance;
  j["agreement_tolerance"] = o.agreement_tolerance;
  j["kl_tolerance"] = o.kl_tolerance;
  j["instances"] = Json::array();
  for (std::size_t i = 0; i < report.instances.size(); ++i) {
    const auto& r = report.instances[i];
    j["instances"].push_back({{"index", i},
                              {"contrastive_tv", r.row_tv},
                              {"contrastive_kl", r.row_kl},
                              {"ipw_descent_kl", r.ipw_descent_kl},
                              {"ipw_analytic_exact", r.ipw_analytic_exact},
                              {"agreement_tv", r.agreement_tv},
                              {"passed", r.passed}});
    double worst = 0.0;
    for (double tv : r.row_tv) worst = std::max(worst, tv);
    fmt::print("instance {:2d}  max TV {:.4f}  IPW KL {:.2e}  agreement {:.4f}"
               "  {}\n",
               i, worst, r.ipw_descent_kl, r.agreement_tv,
               r.passed ? "PASS" : "FAIL");
  }
  j["passed"] = report.passed;
  if (!flags.out.empty()) WriteJson(j, OutputDir(flags) / "report.json");
  fmt::print("{}\n", report.passed ? "all instances passed" : "FAILED");
  return report.passed ? kExitOk : kExitAcceptance;
}

int GradcheckCommand(const Flags& flags) {
  KeyValueConfig kv = LoadConfig(flags, false);
  ApplySeed(flags, kv, "gradcheck.seed");
  const std::string hash = HexDigest(kv.Hash());
  const double tolerance = kv.GetDouble("gradcheck.tolerance", 1e-4);
  const std::size_t coords = kv.GetUint("gradcheck.coordinates", 100);
  const std::uint64_t seed = kv.GetUint("gradcheck.seed", 1);

  Json j;
  j["config_hash"] = hash;
  j["tolerance"] = tolerance;
  j["cases"] = Json::array();
  bool passed = true;
  fmt::print("{:<26} {:<7} {:<14} {:>7} {:>12}\n", "loss", "towers",
             "similarity", "coords", "max_rel_err");
  for (CheckedLoss loss : AllCheckedLosses()) {
    for (bool tied : {false, true}) {
      for (SimilarityMode sim :
           {SimilarityMode::kCosine, SimilarityMode::kInnerProduct}) {
        GradCheckCase c;
        c.loss = loss;
        c.tied = tied;
        c.similarity = sim;
        c.min_coordinates = coords;
        c.seed = seed;
        const GradCheckReport r = RunGradientCheck(c);
        const bool ok =
            r.max_relative_error <= tolerance && r.coordinates >= coords;
        passed = passed && ok;
        fmt::print("{:<26} {:<7} {:<14} {:>7} {:>12.3e} {}\n",
                   CheckedLossName(loss), tied ? "tied" : "untied",
                   SimilarityName(sim), r.coordinates, r.max_relative_error,
                   ok ? "PASS" : "FAIL");
        j["cases"].push_back({{"loss", CheckedLossName(loss)},
                              {"towers", tied ? "tied" : "untied"},
                              {"similarity", SimilarityName(sim)},
                              {"coordinates", r.coordinates},
                              {"max_relative_error", r.max_relative_error},
                              {"passed", ok}});
      }
    }
  }
  j["passed"] = passed;
  if (!flags.out.empty()) WriteJson(j, OutputDir(flags) / "gradcheck.json");
  return passed ? kExitOk : kExitAcceptance;
}

int BenchCommand(const Flags& flags) {
  KeyValueConfig kv = LoadConfig(flags, false);
  ApplySeed(flags, kv, "bench.seed");
  const std::string hash = HexDigest(kv.Hash());
  BenchOptions o;
  o.num_items = kv.GetUint("bench.items", o.num_items);
  o.batch_size = kv.GetUint("bench.batch_size", o.batch_size);
  o.queue_capacity = kv.GetUint("bench.queue_capacity", o.queue_capacity);
  o.negatives = kv.GetUint("bench.negatives", o.negatives);
  o.dim = kv.GetUint("bench.dim", o.dim);
  o.seed = kv.GetUint("bench.seed", o.seed);

  const BenchResult result = RunCounterBench(o);
  Json j;
  j["config_hash"] = hash;
  j["items"] = o.num_items;
  j["batch_size"] = o.batch_size;
  j["queue_capacity"] = o.queue_capacity;
  j["negatives"] = o.negatives;
  j["rows"] = Json::array();
  fmt::print("{:<20} {:>14} {:>14} {:>16}\n", "mode", "item_forwards",
             "user_forwards", "candidate_bytes");
  for (const auto& row : result.rows) {
    fmt::print("{:<20} {:>14} {:>14} {:>16}\n", TrainModeName(row.mode),
               row.counters.item_encoder_forwards,
               row.counters.user_encoder_forwards,
               row.counters.candidate_bytes_moved);
    j["rows"].push_back(
        {{"mode", TrainModeName(row.mode)},
         {"item_encoder_forwards", row.counters.item_encoder_forwards},
         {"user_encoder_forwards", row.counters.user_encoder_forwards},
         {"candidate_bytes_moved", row.counters.candidate_bytes_moved}});
  }
  j["forward_ratio"] = result.forward_ratio;
  j["bound"] = result.bound;
  j["passed"] = result.passed;
  fmt::print("cached/explicit item forwards {:.6f} (bound B/(B+|Q|) = {:.6f}) "
             "{}\n",
             result.forward_ratio, result.bound,
             result.passed ? "PASS" : "FAIL");
  if (!flags.out.empty()) WriteJson(j, OutputDir(flags) / "bench.json");
  return result.passed ? kExitOk : kExitAcceptance;
}

}  // namespace

const std::set<std::string>& KnownConfigKeys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = TrainConfig::Keys();
    for (const char* key :
         {"world.num_items", "world.num_users", "world.relevance_rank",
          "world.exposure_skew", "world.slate_size",
          "world.interactions_per_user", "world.seed", "world.relevance_scale",
          "world.prior_popularity_mass", "data.dir", "eval.checkpoint",
          "eval.protocol", "eval.sampled_negatives", "eval.seed",
          "eval.buckets", "theorem.instances", "theorem.contexts",
          "theorem.items", "theorem.min_prob", "theorem.negatives",
          "theorem.steps", "theorem.lr_start", "theorem.lr_end",
          "theorem.tv_tolerance", "theorem.agreement_tolerance",
          "theorem.kl_tolerance", "theorem.seed", "gradcheck.tolerance",
          "gradcheck.coordinates", "gradcheck.seed", "bench.items",
          "bench.batch_size", "bench.queue_capacity", "bench.negatives",
          "bench.dim", "bench.seed"}) {
      k.insert(key);
    }
    return k;
  }();
  return keys;
}

WorldConfig WorldConfigFromKeyValue(const KeyValueConfig& kv) {
  WorldConfig w;
  w.num_items = kv.GetUint("world.num_items", w.num_items);
  w.num_users = kv.GetUint("world.num_users", w.num_users);
  w.relevance_rank = kv.GetUint("world.relevance_rank", w.relevance_rank);
  w.exposure_skew = kv.GetDouble("world.exposure_skew", w.exposure_skew);
  w.slate_size = kv.GetUint("world.slate_size", w.slate_size);
  w.interactions_per_user =
      kv.GetUint("world.interactions_per_user", w.interactions_per_user);
  w.seed = kv.GetUint("world.seed", w.seed);
  w.relevance_scale = kv.GetDouble("world.relevance_scale", w.relevance_scale);
  w.prior_popularity_mass =
      kv.GetDouble("world.prior_popularity_mass", w.prior_popularity_mass);
  w.Validate();
  return w;
}

const StepCounters& BenchResult::Counters(TrainMode mode) const {
  for (const auto& row : rows) {
    if (row.mode == mode) return row.counters;
  }
  throw Error("bench has no row for mode " + TrainModeName(mode));
}

BenchResult RunCounterBench(const BenchOptions& options) {
  const std::size_t B = options.batch_size;
  if (B == 0 || options.queue_capacity < B) {
    throw ConfigError("bench needs 0 < batch_size <= queue_capacity");
  }
  if (options.num_items < B) {
    throw ConfigError("bench needs at least batch_size items");
  }
  ItemCatalog catalog;
  for (std::size_t i = 0; i < options.num_items; ++i) {
    catalog.AddItem(fmt::format("i{}", i), {{"cat", fmt::format("c{}", i % 50)}});
  }
  EncoderConfig enc;
  enc.dim = options.dim;
  const Parameters params =
      Parameters::Random(enc, catalog.FeatureVocabSizes(), options.seed);
  const std::vector<double> uniform(options.num_items,
                                    1.0 / static_cast<double>(options.num_items));
  const Proposal proposal = Proposal::Make(ProposalKind::kUniform, uniform);

  // Batch s holds B distinct positives; consecutive batches walk the catalog.
  Rng rng(options.seed);
  auto make_batch = [&](std::size_t s) {
    std::vector<Instance> batch(B);
    for (std::size_t b = 0; b < B; ++b) {
      const auto target =
          static_cast<ItemId>((s * B + b) % options.num_items);
      ClickSequence prefix(5);
      for (auto& y : prefix) {
        y = static_cast<ItemId>(UniformIndex(rng, options.num_items));
      }
      batch[b] = {b, std::move(prefix), target};
    }
    return batch;
  };

  BenchResult result;
  result.options = options;
  const std::size_t warmup = (options.queue_capacity + B - 1) / B;
  for (TrainMode mode :
       {TrainMode::kSampledSoftmax, TrainMode::kClrecInBatch,
        TrainMode::kClrecQueue, TrainMode::kClrecQueueCached}) {
    TrainConfig config;
    config.mode = mode;
    config.batch_size = B;
    config.queue_capacity = options.queue_capacity;
    config.negatives = options.negatives;
    config.encoder = enc;
    config.sampler = ProposalKind::kUniform;
    TrainState state =
        TrainState::Create(config, catalog, proposal, options.seed);
    const std::size_t steps = IsQueueMode(mode) ? warmup : 1;
    StepResult last;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto batch = make_batch(s);
      last = TrainStep(config, params, catalog, batch, state);
    }
    result.rows.push_back({mode, last.counters});
  }
  const double cached = static_cast<double>(
      result.Counters(TrainMode::kClrecQueueCached).item_encoder_forwards);
  const double explicit_forwards = static_cast<double>(
      result.Counters(TrainMode::kSampledSoftmax).item_encoder_forwards);
  result.forward_ratio = cached / explicit_forwards;
  result.bound = static_cast<double>(B) /
                 static_cast<double>(B + options.queue_capacity);
  result.passed = result.forward_ratio <= result.bound + 1e-9;
  return result;
}

int RunCli(int argc, char** argv) {
  SetUpLogging();
  CLI::App app{"Two-tower candidate generation: simulate, train, evaluate"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("-c,--config", flags.config, "key = value config file");
    sub->add_option("-o,--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "seed override");
    sub->add_option("--workers", flags.workers, "data-parallel workers");
    sub->add_option("--mode", flags.mode, "training mode override");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Command commands[] = {
      {"simulate", "generate a biased click log with ground truth", Simulate},
      {"train", "train a model and write a checkpoint", TrainCommand},
      {"eval", "evaluate a checkpoint", EvalCommand},
      {"verify-theorem", "fit both losses on random tables",
       VerifyTheoremCommand},
      {"gradcheck", "compare manual gradients with finite differences",
       GradcheckCommand},
      {"bench", "compare encoder-work counters across modes", BenchCommand},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) subs.emplace_back(app.add_subcommand(c.name, c.help), &c);
  for (auto& [sub, c] : subs) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  try {
    for (auto& [sub, c] : subs) {
      if (sub->parsed()) return c->run(flags);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace dcg
