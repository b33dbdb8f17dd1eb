#pragma once

// Experiment matrix: for every replicate the corpus is split once and the
// vocabulary, keyword index and cluster tree are built from the selection
// pool; every (strategy, seed size) cell then selects a seed set, trains a
// model, scores the fixed test set and evaluates it.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "seedsel/cluster.hpp"
#include "seedsel/config.hpp"
#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/eval.hpp"
#include "seedsel/keywords.hpp"
#include "seedsel/learn.hpp"
#include "seedsel/rng.hpp"
#include "seedsel/select.hpp"
#include "seedsel/textpipe.hpp"

namespace seedsel {

struct StageTimings {
  double select_ms = 0.0;
  double train_ms = 0.0;
  double score_ms = 0.0;
  double evaluate_ms = 0.0;
};

struct RecallReadout {
  double level = 0.0;
  double precision = 0.0;
  std::size_t k = 0;
};

struct ExperimentResult {
  Strategy strategy = Strategy::random_sample;
  std::size_t seed_size = 0;
  std::size_t replicate = 0;
  std::uint64_t cell_seed = 0;
  bool ok = false;
  std::string error_kind;
  std::string error_message;

  std::uint64_t test_set_hash = 0;
  std::size_t test_set_size = 0;
  SeedSet seed;
  std::size_t seed_positives = 0;
  std::size_t seed_labeled = 0;
  TrainMeta train_meta;
  PRCurve curve;
  std::vector<RecallReadout> readouts;
  StageTimings timings;

  /// Precision at `level`, if that level was evaluated.
  std::optional<double> precision_at(double level) const {
    for (const auto& r : readouts)
      if (std::abs(r.level - level) < 1e-12) return r.precision;
    return std::nullopt;
  }
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Deterministic metrics document (no timings), used for byte-level comparison.
inline nlohmann::json metrics_to_json(const ExperimentResult& r) {
  nlohmann::json j{
      {"strategy", std::string(strategy_name(r.strategy))},
      {"seed_size", r.seed_size},
      {"replicate", r.replicate},
      {"cell_seed", r.cell_seed},
      {"status", r.ok ? "ok" : "failed"},
      {"test_set_hash", hex64(r.test_set_hash)},
      {"test_set_size", r.test_set_size},
  };
  if (!r.ok) {
    j["error"] = {{"kind", r.error_kind}, {"message", r.error_message}};
  }
  if (r.seed_labeled > 0) {
    j["seed_positives"] = r.seed_positives;
    j["seed_labeled"] = r.seed_labeled;
  }
  if (r.ok) {
    j["train_meta"] = {{"epochs", r.train_meta.epochs},
                       {"final_loss", r.train_meta.final_loss},
                       {"seed_size", r.train_meta.seed_size},
                       {"positives", r.train_meta.positives}};
    nlohmann::json readouts = nlohmann::json::array();
    for (const auto& x : r.readouts)
      readouts.push_back({{"recall_level", x.level}, {"precision", x.precision}, {"k", x.k}});
    j["precision_at_recall"] = readouts;
  }
  return j;
}

inline ExperimentResult metrics_from_json(const nlohmann::json& j) {
  ExperimentResult r;
  try {
    r.strategy = parse_strategy(j.at("strategy").get<std::string>());
    r.seed_size = j.at("seed_size").get<std::size_t>();
    r.replicate = j.at("replicate").get<std::size_t>();
    r.cell_seed = j.at("cell_seed").get<std::uint64_t>();
    r.ok = j.at("status").get<std::string>() == "ok";
    r.test_set_hash = std::stoull(j.at("test_set_hash").get<std::string>(), nullptr, 16);
    r.test_set_size = j.at("test_set_size").get<std::size_t>();
    if (auto e = j.find("error"); e != j.end()) {
      r.error_kind = e->at("kind").get<std::string>();
      r.error_message = e->at("message").get<std::string>();
    }
    if (j.contains("seed_positives")) r.seed_positives = j.at("seed_positives").get<std::size_t>();
    if (j.contains("seed_labeled")) r.seed_labeled = j.at("seed_labeled").get<std::size_t>();
    if (auto m = j.find("train_meta"); m != j.end()) {
      r.train_meta.epochs = m->at("epochs").get<std::size_t>();
      r.train_meta.final_loss = m->at("final_loss").get<double>();
      r.train_meta.seed_size = m->at("seed_size").get<std::size_t>();
      r.train_meta.positives = m->at("positives").get<std::size_t>();
    }
    if (auto p = j.find("precision_at_recall"); p != j.end())
      for (const auto& x : *p)
        r.readouts.push_back({x.at("recall_level").get<double>(), x.at("precision").get<double>(),
                              x.at("k").get<std::size_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed metrics document: ") + e.what());
  }
  return r;
}

/// Writes via a temporary file and rename, so readers never see partial files.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Per-replicate shared state; immutable once built.
struct PreparedReplicate {
  std::size_t replicate = 0;
  CorpusSplit split;
  Vocabulary vocabulary;
  std::vector<SparseVector> vectors;  // by DocIndex
  KeywordIndex keyword_index;
  std::optional<ClusterTree> tree;
  std::uint64_t test_set_hash = 0;
  std::vector<ScoredItem> test_template;  // labeled test documents, score unset
};

/// Stream seed for one cell; independent of which other cells exist.
inline std::uint64_t cell_seed(std::uint64_t master, Strategy s, std::size_t size,
                               std::size_t replicate) {
  return derive_seed(master, strategy_name(s), size, replicate);
}

inline PreparedReplicate prepare_replicate(const LabeledCorpus& corpus,
                                           std::span<const TokenSequence> tokens,
                                           const KeywordList& keywords, const ExperimentConfig& cfg,
                                           std::size_t replicate) {
  PreparedReplicate rep;
  rep.replicate = replicate;
  SplitSpec split_spec = cfg.split;
  split_spec.rng_seed = derive_seed(cfg.split.rng_seed, "replicate-split", cfg.rng_seed, replicate);
  rep.split = split(corpus, split_spec);
  rep.test_set_hash = id_set_hash(corpus, rep.split.test_set);
  rep.vocabulary = build_vocabulary(tokens, rep.split.selection_pool, cfg.vectorizer);
  rep.vectors.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) rep.vectors[i] = vectorize(tokens[i], rep.vocabulary);
  rep.keyword_index = build_index(tokens, rep.split.selection_pool, keywords, cfg.keyword_points);

  bool need_tree = false;
  for (auto s : cfg.strategies) need_tree = need_tree || uses_clusters(s);
  if (need_tree) {
    ClusterParams params = cfg.cluster;
    params.rng_seed = derive_seed(cfg.cluster.rng_seed, "replicate-cluster", cfg.rng_seed, replicate);
    rep.tree = build_tree(rep.split.selection_pool, rep.vectors, rep.vocabulary.size(), params);
  }
  for (DocIndex d : rep.split.test_set)
    if (corpus[d].label) rep.test_template.push_back({corpus[d].id, 0.0, *corpus[d].label});
  return rep;
}

/// Runs one cell. Errors are captured in the result, never thrown. The
/// trained model is moved into `model_out` when one is given.
inline ExperimentResult run_cell(const LabeledCorpus& corpus, const PreparedReplicate& rep,
                                 const ExperimentConfig& cfg, Strategy strategy,
                                 std::size_t seed_size, std::optional<Model>* model_out = nullptr) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  ExperimentResult r;
  r.strategy = strategy;
  r.seed_size = seed_size;
  r.replicate = rep.replicate;
  r.cell_seed = cell_seed(cfg.rng_seed, strategy, seed_size, rep.replicate);
  r.test_set_hash = rep.test_set_hash;
  r.test_set_size = rep.split.test_set.size();
  try {
    auto t0 = clock::now();
    SelectionInputs in{&corpus, rep.split.selection_pool, &rep.keyword_index,
                       rep.tree ? &*rep.tree : nullptr};
    r.seed = select_seed(in, SeedSpec{strategy, seed_size, r.cell_seed});
    r.timings.select_ms = ms_since(t0);

    std::vector<TrainingExample> examples;
    for (const auto& pick : r.seed.picks) {
      const auto& doc = corpus[pick.doc];
      if (!doc.label) continue;
      ++r.seed_labeled;
      if (*doc.label == Label::positive) ++r.seed_positives;
      examples.push_back({rep.vectors[pick.doc], *doc.label});
    }
    t0 = clock::now();
    TrainConfig tc = cfg.train;
    tc.rng_seed = derive_seed(r.cell_seed, "train");
    Model model = train(examples, rep.vocabulary.size(), tc);
    model.vocabulary_hash = rep.vocabulary.hash();
    r.train_meta = model.meta;
    r.timings.train_ms = ms_since(t0);

    t0 = clock::now();
    std::vector<ScoredItem> scored = rep.test_template;
    std::size_t slot = 0;
    for (DocIndex d : rep.split.test_set) {
      if (!corpus[d].label) continue;
      scored[slot++].score = score(model, rep.vectors[d]);
    }
    r.timings.score_ms = ms_since(t0);

    t0 = clock::now();
    r.curve = pr_curve(scored);
    for (double level : cfg.recall_levels) {
      const auto& p = point_at_recall(r.curve, level);
      r.readouts.push_back({level, p.precision, p.k});
    }
    r.timings.evaluate_ms = ms_since(t0);
    r.ok = true;
    if (model_out) *model_out = std::move(model);
    return r;
  } catch (const Error& e) {
    r.ok = false;
    r.error_kind = e.kind();
    r.error_message = e.what();
  }
  return r;
}

inline std::filesystem::path cell_directory(const std::filesystem::path& root,
                                            const ExperimentResult& r) {
  return root / ("rep" + std::to_string(r.replicate)) / ("size" + std::to_string(r.seed_size)) /
         std::string(strategy_name(r.strategy));
}

inline void write_cell(const std::filesystem::path& root, const LabeledCorpus& corpus,
                       const ExperimentConfig& cfg, const ExperimentResult& r,
                       const Model* model) {
  const auto dir = cell_directory(root, r);
  nlohmann::json echo = config_to_json(cfg);
  echo["cell"] = {{"strategy", std::string(strategy_name(r.strategy))},
                  {"seed_size", r.seed_size},
                  {"replicate", r.replicate},
                  {"cell_seed", r.cell_seed}};
  write_file_atomic(dir / "config.json", echo.dump(2) + "\n");
  if (r.seed.size() > 0) {
    std::ostringstream seed_csv;
    write_seed_csv(seed_csv, corpus, r.seed);
    write_file_atomic(dir / "seed.csv", seed_csv.str());
  }
  if (model) write_file_atomic(dir / "model.json", model_to_json(*model).dump() + "\n");
  if (r.ok) {
    std::ostringstream curve_csv;
    write_curve_csv(curve_csv, r.curve);
    write_file_atomic(dir / "curve.csv", curve_csv.str());
  }
  write_file_atomic(dir / "timings.json",
                    nlohmann::json{{"select_ms", r.timings.select_ms},
                                   {"train_ms", r.timings.train_ms},
                                   {"score_ms", r.timings.score_ms},
                                   {"evaluate_ms", r.timings.evaluate_ms}}
                            .dump(2) + "\n");
  write_file_atomic(dir / "metrics.json", metrics_to_json(r).dump(2) + "\n");
}

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  bool write_models = true;
  /// Called once per finished cell (from worker threads, serialized).
  std::function<void(const ExperimentResult&)> on_cell;
};

namespace detail {

/// Runs fn(i) for i in [0, n) on a bounded pool of threads.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

}  // namespace detail

/// Runs every (replicate, seed size, strategy) cell. Results are ordered by
/// replicate, then seed size, then strategy, as listed in the config.
inline std::vector<ExperimentResult> run_experiment_matrix(const LabeledCorpus& corpus,
                                                           const KeywordList& keywords,
                                                           const ExperimentConfig& cfg,
                                                           const RunOptions& options = {}) {
  cfg.validate();
  const auto tokens = tokenize_corpus(corpus);
  std::vector<ExperimentResult> results;
  std::mutex emit;
  for (std::size_t rep_id = 0; rep_id < cfg.replicates; ++rep_id) {
    const PreparedReplicate rep = prepare_replicate(corpus, tokens, keywords, cfg, rep_id);
    if (options.output_dir) {
      const auto dir = *options.output_dir / ("rep" + std::to_string(rep_id));
      std::ostringstream vocab_csv;
      write_vocabulary_csv(vocab_csv, rep.vocabulary);
      write_file_atomic(dir / "vocabulary.csv", vocab_csv.str());
      if (rep.tree) {
        std::ostringstream tree_jsonl;
        write_tree_jsonl(tree_jsonl, *rep.tree, rep.vocabulary);
        write_file_atomic(dir / "tree.jsonl", tree_jsonl.str());
      }
    }
    struct Cell {
      Strategy strategy;
      std::size_t size;
    };
    std::vector<Cell> cells;
    for (std::size_t size : cfg.seed_sizes)
      for (Strategy s : cfg.strategies) cells.push_back({s, size});
    std::vector<ExperimentResult> rep_results(cells.size());
    detail::parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
      std::optional<Model> model;
      const bool keep_model = options.output_dir && options.write_models;
      ExperimentResult r =
          run_cell(corpus, rep, cfg, cells[i].strategy, cells[i].size, keep_model ? &model : nullptr);
      if (options.output_dir) {
        write_cell(*options.output_dir, corpus, cfg, r, model ? &*model : nullptr);
      }
      if (options.on_cell) {
        std::lock_guard lock(emit);
        options.on_cell(r);
      }
      rep_results[i] = std::move(r);
    });
    for (auto& r : rep_results) results.push_back(std::move(r));
  }
  return results;
}

inline std::vector<ExperimentResult> run_experiment_matrix(const ExperimentConfig& cfg,
                                                           const RunOptions& options = {}) {
  const LabeledCorpus corpus = load_corpus(cfg.corpus_path, cfg.corpus_format);
  const KeywordList keywords = cfg.keyword_path ? load_keyword_list(*cfg.keyword_path) : KeywordList{};
  if (options.output_dir) {
    write_file_atomic(*options.output_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  }
  return run_experiment_matrix(corpus, keywords, cfg, options);
}

}  // namespace seedsel
