#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "seedsel/cluster.hpp"
#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/keywords.hpp"
#include "seedsel/learn.hpp"
#include "seedsel/select.hpp"
#include "seedsel/textpipe.hpp"

namespace seedsel {

struct ExperimentConfig {
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  std::optional<std::filesystem::path> keyword_path;
  PointMode keyword_points = PointMode::distinct;
  SplitSpec split;
  VectorizerConfig vectorizer;
  ClusterParams cluster;
  TrainConfig train;
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<std::size_t> seed_sizes{500, 1000, 2000};
  std::vector<double> recall_levels{0.50, 0.75, 0.90};
  std::uint64_t rng_seed = 0;
  std::size_t replicates = 1;
  std::size_t workers = 0;  // 0: one per hardware thread

  void validate() const {
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0))
      throw ValidationError("split.test_fraction must lie in (0, 1)");
    vectorizer.validate();
    cluster.validate();
    train.validate();
    if (strategies.empty()) throw ValidationError("at least one strategy is required");
    if (seed_sizes.empty()) throw ValidationError("at least one seed size is required");
    for (auto s : seed_sizes)
      if (s < 1) throw ValidationError("seed sizes must be positive");
    for (double r : recall_levels)
      if (!(r > 0.0 && r <= 1.0)) throw ValidationError("recall levels must lie in (0, 1]");
    if (replicates < 1) throw ValidationError("replicates must be at least 1");
    if (std::set<Strategy>(strategies.begin(), strategies.end()).size() != strategies.size())
      throw ValidationError("duplicate strategy in config");
    if (std::set<std::size_t>(seed_sizes.begin(), seed_sizes.end()).size() != seed_sizes.size())
      throw ValidationError("duplicate seed size in config");
  }
};

namespace detail {

template <class Fn>
void for_each_key(const nlohmann::json& obj, std::string_view section, Fn&& fn) {
  if (!obj.is_object())
    throw ValidationError("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    try {
      if (!fn(key, value))
        throw ValidationError("unknown config key '" +
                              (section.empty() ? key : std::string(section) + "." + key) + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("bad value for config key '" + key + "': " + e.what());
    }
  }
}

}  // namespace detail

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  bool have_corpus = false;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  detail::for_each_key(j, "", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "corpus") {
      detail::for_each_key(v, "corpus", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "path") c.corpus_path = resolve(x.get<std::string>());
        else if (k == "format") c.corpus_format = parse_corpus_format(x.get<std::string>());
        else return false;
        return true;
      });
      have_corpus = !c.corpus_path.empty();
    } else if (key == "keywords") {
      if (v.is_null()) c.keyword_path.reset();
      else c.keyword_path = resolve(v.get<std::string>());
    } else if (key == "keyword_points") {
      const auto mode = v.get<std::string>();
      if (mode == "distinct") c.keyword_points = PointMode::distinct;
      else if (mode == "occurrences") c.keyword_points = PointMode::occurrences;
      else throw ValidationError("keyword_points must be 'distinct' or 'occurrences'");
    } else if (key == "split") {
      detail::for_each_key(v, "split", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "test_fraction") c.split.test_fraction = x.get<double>();
        else if (k == "rng_seed") c.split.rng_seed = x.get<std::uint64_t>();
        else return false;
        return true;
      });
    } else if (key == "vectorizer") {
      detail::for_each_key(v, "vectorizer", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "max_tokens") c.vectorizer.max_tokens = x.get<std::size_t>();
        else if (k == "stemming") c.vectorizer.stemming = x.get<bool>();
        else if (k == "ngram_order") c.vectorizer.ngram_order = x.get<int>();
        else return false;
        return true;
      });
    } else if (key == "cluster") {
      detail::for_each_key(v, "cluster", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "branching") c.cluster.branching = x.get<std::size_t>();
        else if (k == "depth") c.cluster.depth = x.get<std::size_t>();
        else if (k == "max_iterations") c.cluster.max_iterations = x.get<std::size_t>();
        else if (k == "convergence_tol") c.cluster.convergence_tol = x.get<double>();
        else if (k == "rng_seed") c.cluster.rng_seed = x.get<std::uint64_t>();
        else if (k == "min_split_size") c.cluster.min_split_size = x.get<std::size_t>();
        else if (k == "restarts") c.cluster.restarts = x.get<std::size_t>();
        else return false;
        return true;
      });
    } else if (key == "train") {
      detail::for_each_key(v, "train", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "l2_lambda") c.train.l2_lambda = x.get<double>();
        else if (k == "max_epochs") c.train.max_epochs = x.get<std::size_t>();
        else if (k == "tolerance") c.train.tolerance = x.get<double>();
        else if (k == "fit_intercept") c.train.fit_intercept = x.get<bool>();
        else if (k == "rng_seed") c.train.rng_seed = x.get<std::uint64_t>();
        else return false;
        return true;
      });
    } else if (key == "strategies") {
      c.strategies.clear();
      for (const auto& s : v) c.strategies.push_back(parse_strategy(s.get<std::string>()));
    } else if (key == "seed_sizes") {
      c.seed_sizes = v.get<std::vector<std::size_t>>();
    } else if (key == "recall_levels") {
      c.recall_levels = v.get<std::vector<double>>();
    } else if (key == "rng_seed") {
      c.rng_seed = v.get<std::uint64_t>();
    } else if (key == "replicates") {
      c.replicates = v.get<std::size_t>();
    } else if (key == "workers") {
      c.workers = v.get<std::size_t>();
    } else {
      return false;
    }
    return true;
  });
  if (!have_corpus) throw ValidationError("config requires corpus.path");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, path.parent_path());
}

/// Field-for-field echo of the config (paths as given, resolved).
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json strategies = nlohmann::json::array();
  for (auto s : c.strategies) strategies.push_back(std::string(strategy_name(s)));
  return nlohmann::json{
      {"corpus", {{"path", c.corpus_path.string()}, {"format", c.corpus_format == CorpusFormat::jsonl ? "jsonl" : "csv"}}},
      {"keywords", c.keyword_path ? nlohmann::json(c.keyword_path->string()) : nlohmann::json(nullptr)},
      {"keyword_points", c.keyword_points == PointMode::distinct ? "distinct" : "occurrences"},
      {"split", {{"test_fraction", c.split.test_fraction}, {"rng_seed", c.split.rng_seed}}},
      {"vectorizer",
       {{"max_tokens", c.vectorizer.max_tokens},
        {"stemming", c.vectorizer.stemming},
        {"ngram_order", c.vectorizer.ngram_order}}},
      {"cluster",
       {{"branching", c.cluster.branching},
        {"depth", c.cluster.depth},
        {"max_iterations", c.cluster.max_iterations},
        {"convergence_tol", c.cluster.convergence_tol},
        {"rng_seed", c.cluster.rng_seed},
        {"min_split_size", c.cluster.min_split_size},
        {"restarts", c.cluster.restarts}}},
      {"train",
       {{"l2_lambda", c.train.l2_lambda},
        {"max_epochs", c.train.max_epochs},
        {"tolerance", c.train.tolerance},
        {"fit_intercept", c.train.fit_intercept},
        {"rng_seed", c.train.rng_seed}}},
      {"strategies", strategies},
      {"seed_sizes", c.seed_sizes},
      {"recall_levels", c.recall_levels},
      {"rng_seed", c.rng_seed},
      {"replicates", c.replicates},
      {"workers", c.workers},
  };
}

}  // namespace seedsel
