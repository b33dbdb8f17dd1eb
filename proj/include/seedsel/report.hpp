#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/experiment.hpp"
#include "seedsel/select.hpp"

namespace seedsel {

/// Recall levels of the published tables, in column order.
inline constexpr std::array<double, 3> kTableLevels{0.90, 0.75, 0.50};

struct TableRow {
  Strategy strategy = Strategy::random_sample;
  double p90 = std::numeric_limits<double>::quiet_NaN();
  double p75 = std::numeric_limits<double>::quiet_NaN();
  double p50 = std::numeric_limits<double>::quiet_NaN();
};

/// Rows for one seed size, ordered by precision at 75% recall (descending),
/// ties by strategy name. Failed cells are omitted. When several replicates
/// are present the table uses their mean.
inline std::vector<TableRow> report_table(std::span<const ExperimentResult> results,
                                          std::size_t seed_size) {
  struct Acc {
    double sum[3] = {0, 0, 0};
    std::size_t n[3] = {0, 0, 0};
  };
  std::map<Strategy, Acc> acc;
  std::map<std::size_t, std::uint64_t> hash_by_replicate;
  for (const auto& r : results) {
    if (r.seed_size != seed_size || !r.ok) continue;
    auto [it, fresh] = hash_by_replicate.emplace(r.replicate, r.test_set_hash);
    if (!fresh && it->second != r.test_set_hash)
      throw ValidationError("results for replicate " + std::to_string(r.replicate) +
                            " were scored on different test sets");
    auto& a = acc[r.strategy];
    for (std::size_t c = 0; c < kTableLevels.size(); ++c) {
      if (auto p = r.precision_at(kTableLevels[c])) {
        a.sum[c] += *p;
        ++a.n[c];
      }
    }
  }
  std::vector<TableRow> rows;
  for (const auto& [strategy, a] : acc) {
    TableRow row;
    row.strategy = strategy;
    double* cols[3] = {&row.p90, &row.p75, &row.p50};
    for (std::size_t c = 0; c < 3; ++c)
      if (a.n[c] > 0) *cols[c] = a.sum[c] / static_cast<double>(a.n[c]);
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) {
    const double x = std::isnan(a.p75) ? -1.0 : a.p75;
    const double y = std::isnan(b.p75) ? -1.0 : b.p75;
    if (x != y) return x > y;
    return strategy_name(a.strategy) < strategy_name(b.strategy);
  });
  return rows;
}

inline std::string percent_cell(double v) { return std::isnan(v) ? "-" : format_percent(v); }

inline void write_table_csv(std::ostream& out, std::span<const TableRow> rows) {
  out << "strategy,precision_at_90,precision_at_75,precision_at_50\n";
  for (const auto& r : rows)
    out << strategy_name(r.strategy) << ',' << percent_cell(r.p90) << ',' << percent_cell(r.p75)
        << ',' << percent_cell(r.p50) << '\n';
}

inline void write_table_text(std::ostream& out, std::span<const TableRow> rows,
                             const std::string& title) {
  std::size_t width = std::string("Seed Method").size();
  for (const auto& r : rows) width = std::max(width, strategy_title(r.strategy).size());
  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() < w) {
      if (left) s.append(w - s.size(), ' ');
      else s.insert(0, w - s.size(), ' ');
    }
    return s;
  };
  out << title << '\n';
  out << pad("Seed Method", width, true) << "  " << pad("90%", 8, false) << "  "
      << pad("75%", 8, false) << "  " << pad("50%", 8, false) << '\n';
  for (const auto& r : rows)
    out << pad(std::string(strategy_title(r.strategy)), width, true) << "  "
        << pad(percent_cell(r.p90), 8, false) << "  " << pad(percent_cell(r.p75), 8, false)
        << "  " << pad(percent_cell(r.p50), 8, false) << '\n';
}

/// Reads every metrics.json under `dir`, ordered by path.
inline std::vector<ExperimentResult> load_results(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ValidationError("results directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "metrics.json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ExperimentResult> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("cannot parse " + f.string() + ": " + e.what());
    }
    out.push_back(metrics_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-size summary

struct BestCell {
  Strategy strategy = Strategy::random_sample;
  double precision = 0.0;
};

struct LevelDelta {
  double level = 0.0;
  std::optional<BestCell> best_small;
  std::optional<BestCell> best_large;
  std::optional<double> delta;  // best_large - best_small
};

struct StrategyBestSize {
  Strategy strategy = Strategy::random_sample;
  std::size_t seed_size = 0;
  double precision_at_75 = 0.0;
};

struct SummaryReport {
  std::size_t small_size = 0;
  std::size_t large_size = 0;
  std::vector<LevelDelta> deltas;  // empty when fewer than two sizes exist
  std::vector<StrategyBestSize> best_sizes;
  std::vector<std::string> gaps;
};

/// Best-of-strategies precision at the largest seed size minus the best at
/// the smallest, per recall level (500 and 2,000 when both are present).
/// Replicates are averaged per (strategy, size) first.
inline SummaryReport summarize(std::span<const ExperimentResult> results) {
  SummaryReport rep;
  std::map<std::pair<Strategy, std::size_t>, std::map<double, std::pair<double, std::size_t>>> mean;
  std::vector<std::size_t> sizes;
  std::vector<double> levels;
  for (const auto& r : results) {
    if (!r.ok) {
      rep.gaps.push_back(std::string(strategy_name(r.strategy)) + " @" + std::to_string(r.seed_size) +
                         " replicate " + std::to_string(r.replicate) + ": " + r.error_kind);
      continue;
    }
    sizes.push_back(r.seed_size);
    for (const auto& x : r.readouts) {
      auto& slot = mean[{r.strategy, r.seed_size}][x.level];
      slot.first += x.precision;
      ++slot.second;
      levels.push_back(x.level);
    }
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  auto avg = [&](Strategy s, std::size_t size, double level) -> std::optional<double> {
    auto it = mean.find({s, size});
    if (it == mean.end()) return std::nullopt;
    auto jt = it->second.find(level);
    if (jt == it->second.end() || jt->second.second == 0) return std::nullopt;
    return jt->second.first / static_cast<double>(jt->second.second);
  };

  for (Strategy s : kAllStrategies) {
    std::optional<StrategyBestSize> best;
    for (std::size_t size : sizes) {
      auto p = avg(s, size, 0.75);
      if (p && (!best || *p > best->precision_at_75)) best = StrategyBestSize{s, size, *p};
    }
    if (best) rep.best_sizes.push_back(*best);
  }

  if (sizes.size() < 2) {
    rep.gaps.push_back("fewer than two seed sizes present; no size deltas");
    return rep;
  }
  const bool default_sizes = std::binary_search(sizes.begin(), sizes.end(), 500) &&
                           std::binary_search(sizes.begin(), sizes.end(), 2000);
  rep.small_size = default_sizes ? 500 : sizes.front();
  rep.large_size = default_sizes ? 2000 : sizes.back();

  for (double level : levels) {
    LevelDelta d;
    d.level = level;
    for (Strategy s : kAllStrategies) {
      if (auto p = avg(s, rep.small_size, level); p && (!d.best_small || *p > d.best_small->precision))
        d.best_small = BestCell{s, *p};
      if (auto p = avg(s, rep.large_size, level); p && (!d.best_large || *p > d.best_large->precision))
        d.best_large = BestCell{s, *p};
    }
    if (d.best_small && d.best_large) d.delta = d.best_large->precision - d.best_small->precision;
    else rep.gaps.push_back("recall " + format_percent(level) + ": missing cells at one size");
    rep.deltas.push_back(d);
  }
  return rep;
}

inline void write_summary_text(std::ostream& out, const SummaryReport& s) {
  if (!s.deltas.empty()) {
    out << "Precision difference from seed size " << s.small_size << " to " << s.large_size << '\n';
    for (const auto& d : s.deltas) {
      out << "  " << format_percent(d.level, 0) << " recall: ";
      if (d.delta) {
        out << (*d.delta < 0 ? "-" : "") << format_percent(std::abs(*d.delta)) << "  (best@"
            << s.large_size << " " << strategy_name(d.best_large->strategy) << " "
            << format_percent(d.best_large->precision) << ", best@" << s.small_size << " "
            << strategy_name(d.best_small->strategy) << " " << format_percent(d.best_small->precision)
            << ")\n";
      } else {
        out << "gap\n";
      }
    }
  }
  if (!s.best_sizes.empty()) {
    out << "Best seed size per strategy (precision at 75% recall)\n";
    for (const auto& b : s.best_sizes)
      out << "  " << strategy_name(b.strategy) << ": " << b.seed_size << " ("
          << format_percent(b.precision_at_75) << ")\n";
  }
  for (const auto& g : s.gaps) out << "  note: " << g << '\n';
}

inline void write_summary_csv(std::ostream& out, const SummaryReport& s) {
  out << "recall_level,small_size,large_size,best_small_strategy,best_small_precision,"
         "best_large_strategy,best_large_precision,delta\n";
  for (const auto& d : s.deltas) {
    out << d.level << ',' << s.small_size << ',' << s.large_size << ',';
    if (d.best_small) out << strategy_name(d.best_small->strategy) << ',' << d.best_small->precision;
    else out << ",";
    out << ',';
    if (d.best_large) out << strategy_name(d.best_large->strategy) << ',' << d.best_large->precision;
    else out << ",";
    out << ',';
    if (d.delta) out << *d.delta;
    out << '\n';
  }
}

}  // namespace seedsel
