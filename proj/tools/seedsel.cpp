// seedsel command line: ingest, gen-corpus, run, report, summarize.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "seedsel/seedsel.hpp"

namespace fs = std::filesystem;
using namespace seedsel;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kPartial = 2;

int cmd_ingest(const fs::path& corpus_path, const std::string& format,
               const std::string& keyword_path) {
  const LabeledCorpus corpus = load_corpus(corpus_path, parse_corpus_format(format));
  std::cout << "documents: " << corpus.size() << '\n';
  std::cout << "labeled:   " << corpus.labeled_count() << '\n';
  if (corpus.labeled_count() > 0) {
    const Ratio r = richness(corpus);
    std::cout << "positive:  " << r.numerator << '\n';
    std::cout << "richness:  " << r.percent() << '\n';
  }
  if (!keyword_path.empty()) {
    const KeywordList keywords = load_keyword_list(keyword_path);
    const auto tokens = tokenize_corpus(corpus);
    const auto all = corpus.all_indices();
    const KeywordIndex index = build_index(tokens, all, keywords, PointMode::distinct);
    std::cout << "keywords:  " << keywords.size() << '\n';
    std::cout << "hits:      " << index.hit_documents().size() << '\n';
    std::cout << "hit rate:  " << hit_percentage(index, corpus.size()).percent() << '\n';
  }
  return kOk;
}

int cmd_gen_corpus(const fs::path& spec_path, const fs::path& out_dir) {
  std::ifstream in(spec_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open spec file " + spec_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("spec is not valid JSON: ") + e.what());
  }
  const SyntheticCorpus syn = generate_synthetic(synthetic_spec_from_json(j));
  fs::create_directories(out_dir);
  std::ostringstream corpus_out;
  write_jsonl(corpus_out, syn.corpus);
  write_file_atomic(out_dir / "corpus.jsonl", corpus_out.str());
  std::string kw;
  for (const auto& line : syn.keyword_lines) kw += line + '\n';
  write_file_atomic(out_dir / "keywords.txt", kw);
  std::cout << "wrote " << syn.corpus.size() << " documents (richness "
            << richness(syn.corpus).percent() << ") and " << syn.keyword_lines.size()
            << " keywords to " << out_dir.string() << '\n';
  return kOk;
}

int cmd_run(const fs::path& config_path, const fs::path& out_dir, int workers, bool no_models) {
  ExperimentConfig cfg = load_config(config_path);
  if (workers >= 0) cfg.workers = static_cast<std::size_t>(workers);
  RunOptions opts;
  opts.output_dir = out_dir;
  opts.write_models = !no_models;
  opts.on_cell = [](const ExperimentResult& r) {
    std::fprintf(stderr, "rep%zu size%zu %-34s %s\n", r.replicate, r.seed_size,
                 std::string(strategy_name(r.strategy)).c_str(),
                 r.ok ? "ok" : ("FAILED (" + r.error_kind + ")").c_str());
  };
  const auto results = run_experiment_matrix(cfg, opts);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.ok ? 0 : 1;
  std::cout << results.size() << " cells, " << failed << " failed\n";
  return failed ? kPartial : kOk;
}

int cmd_report(const fs::path& results_dir) {
  const auto results = load_results(results_dir);
  if (results.empty()) throw ValidationError("no metrics.json under " + results_dir.string());
  std::set<std::size_t> sizes;
  for (const auto& r : results) sizes.insert(r.seed_size);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.ok ? 0 : 1;
  for (std::size_t size : sizes) {
    const auto rows = report_table(results, size);
    std::ostringstream csv;
    write_table_csv(csv, rows);
    write_file_atomic(results_dir / ("table_size" + std::to_string(size) + ".csv"), csv.str());
    write_table_text(std::cout, rows, "Seed set size " + std::to_string(size));
    std::cout << '\n';
  }
  if (failed) std::cout << failed << " failed cells omitted\n";
  return failed ? kPartial : kOk;
}

int cmd_summarize(const fs::path& results_dir) {
  const auto results = load_results(results_dir);
  const SummaryReport s = summarize(results);
  std::ostringstream csv;
  write_summary_csv(csv, s);
  write_file_atomic(results_dir / "summary.csv", csv.str());
  write_summary_text(std::cout, s);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seed set selection experiments"};
  app.require_subcommand(1);

  std::string corpus_path, format = "jsonl", keyword_path;
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and print its statistics");
  ingest->add_option("--corpus", corpus_path, "corpus file")->required();
  ingest->add_option("--format", format, "jsonl or csv");
  ingest->add_option("--keywords", keyword_path, "keyword list, one per line");

  std::string spec_path, gen_out;
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus and keyword list");
  gen->add_option("--spec", spec_path, "synthetic spec (JSON)")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  std::string config_path, run_out;
  int workers = -1;
  bool no_models = false;
  auto* run = app.add_subcommand("run", "run the experiment matrix");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", run_out, "results directory")->required();
  run->add_option("--workers", workers, "worker threads (0: all cores)");
  run->add_flag("--no-models", no_models, "skip model.json dumps");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "precision tables per seed size");
  report->add_option("--results", report_dir, "results directory")->required();

  std::string summary_dir;
  auto* summ = app.add_subcommand("summarize", "precision deltas between seed sizes");
  summ->add_option("--results", summary_dir, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*ingest) return cmd_ingest(corpus_path, format, keyword_path);
    if (*gen) return cmd_gen_corpus(spec_path, gen_out);
    if (*run) return cmd_run(config_path, run_out, workers, no_models);
    if (*report) return cmd_report(report_dir);
    if (*summ) return cmd_summarize(summary_dir);
  } catch (const Error& e) {
    std::cerr << "error (" << e.kind() << "): " << e.what() << '\n';
    return kInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}
