#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "seedsel/seedsel.hpp"

using namespace seedsel;
namespace fs = std::filesystem;

namespace {

const SyntheticCorpus& small_corpus() {
  static const SyntheticCorpus syn = [] {
    SyntheticSpec s;
    s.n_docs = 3000;
    s.rng_seed = 12;
    return generate_synthetic(s);
  }();
  return syn;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.seed_sizes = {100, 200, 400};
  cfg.cluster.depth = 3;
  cfg.rng_seed = 3;
  cfg.workers = 2;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentResult fake(Strategy s, std::size_t size, double p50, double p75, double p90,
                      std::size_t rep = 0, std::uint64_t hash = 1) {
  ExperimentResult r;
  r.strategy = s;
  r.seed_size = size;
  r.replicate = rep;
  r.ok = true;
  r.test_set_hash = hash;
  r.readouts = {{0.5, p50, 1}, {0.75, p75, 2}, {0.9, p90, 3}};
  return r;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto j = nlohmann::json::parse(R"({
    "corpus": {"path": "c.jsonl", "format": "csv"},
    "keywords": "k.txt",
    "split": {"test_fraction": 0.2, "rng_seed": 5},
    "vectorizer": {"max_tokens": 500},
    "cluster": {"depth": 2},
    "train": {"l2_lambda": 0.01},
    "strategies": ["random_sample", "clustering"],
    "seed_sizes": [10, 20],
    "rng_seed": 99,
    "replicates": 2
  })");
  const auto c = config_from_json(j, "/data");
  REQUIRE(c.corpus_path == fs::path("/data/c.jsonl"));
  REQUIRE(c.corpus_format == CorpusFormat::csv);
  REQUIRE(c.keyword_path == fs::path("/data/k.txt"));
  REQUIRE(c.split.test_fraction == 0.2);
  REQUIRE(c.vectorizer.max_tokens == 500);
  REQUIRE(c.cluster.depth == 2);
  REQUIRE(c.cluster.branching == 3);
  REQUIRE(c.train.l2_lambda == 0.01);
  REQUIRE(c.strategies.size() == 2);
  REQUIRE(c.recall_levels == std::vector<double>{0.5, 0.75, 0.9});
  REQUIRE(c.replicates == 2);

  const auto echoed = config_from_json(config_to_json(c));
  REQUIRE(config_to_json(echoed) == config_to_json(c));

  const ExperimentConfig d = config_from_json(nlohmann::json::parse(R"({"corpus":{"path":"x"}})"));
  REQUIRE(d.seed_sizes == std::vector<std::size_t>{500, 1000, 2000});
  REQUIRE(d.strategies.size() == 8);
  REQUIRE(d.vectorizer.max_tokens == 20000);
  REQUIRE(d.split.test_fraction == 0.10);
}

TEST_CASE("config rejects unknown keys and bad values") {
  auto bad = [](const char* text) {
    return config_from_json(nlohmann::json::parse(text));
  };
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"colour":1})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x","encoding":"utf8"}})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"train":{"optimizer":"sgd"}})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"seed_sizes":[1]})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"seed_sizes":[]})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"seed_sizes":[5,5]})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"strategies":["magic"]})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"recall_levels":[0]})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"replicates":"two"})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"split":{"test_fraction":1.0}})"), ValidationError);
  REQUIRE_THROWS_AS(bad(R"({"corpus":{"path":"x"},"vectorizer":{"ngram_order":2}})"), ValidationError);
}

TEST_CASE("default matrix has 24 cells on one test set") {
  const auto& syn = small_corpus();
  const auto results = run_experiment_matrix(syn.corpus, syn.keywords, small_config());
  REQUIRE(results.size() == 24);
  std::set<std::pair<Strategy, std::size_t>> cells;
  for (const auto& r : results) {
    cells.insert({r.strategy, r.seed_size});
    REQUIRE(r.ok);
    REQUIRE(r.test_set_hash == results[0].test_set_hash);
    REQUIRE(r.seed.size() == r.seed_size);
    REQUIRE(r.readouts.size() == 3);
  }
  REQUIRE(cells.size() == 24);
}

TEST_CASE("a failing cell leaves the others intact") {
  const auto& syn = small_corpus();
  const auto cfg = small_config();
  const auto with = run_experiment_matrix(syn.corpus, syn.keywords, cfg);
  const auto without = run_experiment_matrix(syn.corpus, KeywordList{}, cfg);
  REQUIRE(without.size() == 24);
  for (std::size_t i = 0; i < without.size(); ++i) {
    const auto& r = without[i];
    if (uses_keywords(r.strategy)) {
      REQUIRE_FALSE(r.ok);
      REQUIRE(r.error_kind == "infeasible");
    } else {
      REQUIRE(r.ok);
      REQUIRE(metrics_to_json(r).dump() == metrics_to_json(with[i]).dump());
    }
  }
}

TEST_CASE("adding cells does not perturb existing ones") {
  const auto& syn = small_corpus();
  auto cfg = small_config();
  cfg.strategies = {Strategy::random_sample};
  cfg.seed_sizes = {200};
  const auto one = run_experiment_matrix(syn.corpus, syn.keywords, cfg);
  REQUIRE(one.size() == 1);
  const auto all = run_experiment_matrix(syn.corpus, syn.keywords, small_config());
  bool found = false;
  for (const auto& r : all)
    if (r.strategy == Strategy::random_sample && r.seed_size == 200) {
      REQUIRE(metrics_to_json(r).dump() == metrics_to_json(one[0]).dump());
      found = true;
    }
  REQUIRE(found);
}

TEST_CASE("worker count does not change metrics") {
  const auto& syn = small_corpus();
  auto cfg = small_config();
  cfg.workers = 1;
  const auto serial = run_experiment_matrix(syn.corpus, syn.keywords, cfg);
  cfg.workers = 4;
  const auto threaded = run_experiment_matrix(syn.corpus, syn.keywords, cfg);
  REQUIRE(serial.size() == threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i)
    REQUIRE(metrics_to_json(serial[i]).dump() == metrics_to_json(threaded[i]).dump());
}

TEST_CASE("replicates use different splits") {
  const auto& syn = small_corpus();
  auto cfg = small_config();
  cfg.strategies = {Strategy::random_sample};
  cfg.seed_sizes = {100};
  cfg.replicates = 3;
  const auto r = run_experiment_matrix(syn.corpus, syn.keywords, cfg);
  REQUIRE(r.size() == 3);
  REQUIRE(r[0].test_set_hash != r[1].test_set_hash);
  REQUIRE(r[1].test_set_hash != r[2].test_set_hash);
}

TEST_CASE("degenerate seeds fail their cell with a typed error") {
  SyntheticSpec s;
  s.n_docs = 2000;
  s.richness = 0.01;
  const auto syn = generate_synthetic(s);
  auto cfg = small_config();
  cfg.strategies = {Strategy::random_sample};
  cfg.seed_sizes = {2};
  cfg.replicates = 20;
  std::size_t degenerate = 0;
  for (const auto& r : run_experiment_matrix(syn.corpus, syn.keywords, cfg)) {
    if (r.seed_positives == 0 || r.seed_positives == r.seed_labeled) {
      REQUIRE_FALSE(r.ok);
      REQUIRE(r.error_kind == "degenerate_seed");
      ++degenerate;
    }
  }
  REQUIRE(degenerate > 0);
}

TEST_CASE("output directory layout and reload") {
  const auto& syn = small_corpus();
  const auto dir = fresh_dir("seedsel_harness_out");
  {
    std::ofstream c(dir / "corpus.jsonl");
    write_jsonl(c, syn.corpus);
    std::ofstream k(dir / "keywords.txt");
    for (const auto& l : syn.keyword_lines) k << l << '\n';
  }
  auto cfg = small_config();
  cfg.corpus_path = dir / "corpus.jsonl";
  cfg.keyword_path = dir / "keywords.txt";
  RunOptions opt;
  opt.output_dir = dir / "results";
  std::size_t seen = 0;
  opt.on_cell = [&](const ExperimentResult&) { ++seen; };
  const auto results = run_experiment_matrix(cfg, opt);
  REQUIRE(seen == 24);
  REQUIRE(fs::exists(dir / "results" / "config.json"));
  REQUIRE(fs::exists(dir / "results" / "rep0" / "vocabulary.csv"));
  REQUIRE(fs::exists(dir / "results" / "rep0" / "tree.jsonl"));
  const auto cell = dir / "results" / "rep0" / "size100" / "random_sample";
  for (const char* f : {"config.json", "seed.csv", "model.json", "curve.csv", "timings.json", "metrics.json"})
    REQUIRE(fs::exists(cell / f));
  std::size_t tmp = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "results"))
    tmp += e.path().extension() == ".tmp";
  REQUIRE(tmp == 0);

  const auto echo = nlohmann::json::parse(slurp(cell / "config.json"));
  REQUIRE(echo.at("cell").at("strategy") == "random_sample");
  REQUIRE(echo.at("train").at("l2_lambda") == cfg.train.l2_lambda);

  // the dumped model reproduces the recorded precision
  const auto tokens = tokenize_corpus(syn.corpus);
  const auto rep = prepare_replicate(syn.corpus, tokens, syn.keywords, cfg, 0);
  const Model m = load_model(cell / "model.json", rep.vocabulary);
  std::vector<ScoredItem> scored = rep.test_template;
  std::size_t slot = 0;
  for (DocIndex d : rep.split.test_set)
    if (syn.corpus[d].label) scored[slot++].score = score(m, rep.vectors[d]);
  const auto curve = pr_curve(scored);
  const auto loaded = load_results(dir / "results");
  REQUIRE(loaded.size() == 24);
  bool matched = false;
  for (const auto& r : loaded)
    if (r.strategy == Strategy::random_sample && r.seed_size == 100) {
      REQUIRE(precision_at_recall(curve, 0.75) == *r.precision_at(0.75));
      matched = true;
    }
  REQUIRE(matched);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    // load order is by path; compare through the metrics text
    bool same = false;
    for (const auto& r : results) same = same || metrics_to_json(r).dump() == metrics_to_json(loaded[i]).dump();
    REQUIRE(same);
  }
}

TEST_CASE("report table ordering") {
  std::vector<ExperimentResult> rs{fake(Strategy::random_sample, 500, 0.6, 0.4, 0.3),
                                   fake(Strategy::clustering, 500, 0.7, 0.5, 0.2),
                                   fake(Strategy::stratified_keyword, 1000, 0.9, 0.9, 0.9)};
  const auto t = report_table(rs, 500);
  REQUIRE(t.size() == 2);
  REQUIRE(t[0].strategy == Strategy::clustering);
  REQUIRE(t[1].strategy == Strategy::random_sample);

  std::vector<ExperimentResult> tie{fake(Strategy::random_sample, 500, 0.6, 0.4, 0.3),
                                    fake(Strategy::clustering, 500, 0.7, 0.4, 0.2)};
  const auto u = report_table(tie, 500);
  REQUIRE(u[0].strategy == Strategy::clustering);  // "clustering" < "random_sample"

  REQUIRE(report_table(std::vector<ExperimentResult>{}, 500).empty());

  std::vector<ExperimentResult> mixed{fake(Strategy::random_sample, 500, 0.6, 0.4, 0.3, 0, 1),
                                      fake(Strategy::clustering, 500, 0.7, 0.5, 0.2, 0, 2)};
  REQUIRE_THROWS_AS(report_table(mixed, 500), ValidationError);

  std::ostringstream csv;
  write_table_csv(csv, t);
  REQUIRE(csv.str() ==
          "strategy,precision_at_90,precision_at_75,precision_at_50\n"
          "clustering,20.00%,50.00%,70.00%\n"
          "random_sample,30.00%,40.00%,60.00%\n");
}

TEST_CASE("summary deltas between seed sizes") {
  std::vector<ExperimentResult> rs{fake(Strategy::random_sample, 500, 0.5, 0.4678, 0.3),
                                   fake(Strategy::clustering, 500, 0.5, 0.40, 0.3),
                                   fake(Strategy::random_sample, 2000, 0.6, 0.55, 0.4),
                                   fake(Strategy::clustering, 2000, 0.6, 0.5982, 0.4),
                                   fake(Strategy::clustering, 1000, 0.9, 0.9, 0.9)};
  const auto s = summarize(rs);
  REQUIRE(s.small_size == 500);
  REQUIRE(s.large_size == 2000);
  const LevelDelta* at75 = nullptr;
  for (const auto& d : s.deltas)
    if (d.level == 0.75) at75 = &d;
  REQUIRE(at75 != nullptr);
  REQUIRE(at75->best_large->strategy == Strategy::clustering);
  REQUIRE(at75->best_small->strategy == Strategy::random_sample);
  REQUIRE(format_percent(*at75->delta) == "13.04%");
  for (const auto& b : s.best_sizes)
    if (b.strategy == Strategy::clustering) REQUIRE(b.seed_size == 1000);

  std::vector<ExperimentResult> same{fake(Strategy::random_sample, 500, 0.5, 0.5, 0.5),
                                     fake(Strategy::random_sample, 2000, 0.5, 0.5, 0.5)};
  for (const auto& d : summarize(same).deltas) REQUIRE(*d.delta == 0.0);

  std::vector<ExperimentResult> single{fake(Strategy::random_sample, 500, 0.5, 0.5, 0.5)};
  const auto one = summarize(single);
  REQUIRE(one.deltas.empty());
  REQUIRE_FALSE(one.gaps.empty());

  auto failed = fake(Strategy::clustering, 2000, 0, 0, 0);
  failed.ok = false;
  failed.error_kind = "infeasible";
  std::vector<ExperimentResult> gappy{fake(Strategy::random_sample, 500, 0.5, 0.5, 0.5),
                                      fake(Strategy::random_sample, 2000, 0.6, 0.6, 0.6), failed};
  const auto g = summarize(gappy);
  REQUIRE(g.deltas.size() == 3);
  REQUIRE(g.gaps.size() == 1);

  std::ostringstream text;
  write_summary_text(text, s);
  REQUIRE(text.str().find("13.04%") != std::string::npos);
}
