#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"

namespace seedsel {

struct ScoredItem {
  std::string id;
  double score = 0.0;
  Label label = Label::negative;
};

struct PRPoint {
  std::size_t k = 0;  // rank prefix length
  double recall = 0.0;
  double precision = 0.0;
  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

struct PRCurve {
  std::vector<PRPoint> points;  // k = 1..N
  std::size_t positives = 0;
};

/// Cumulative precision/recall at every prefix of the ranking by score
/// (descending, ties by id ascending).
inline PRCurve pr_curve(std::span<const ScoredItem> scored) {
  std::vector<const ScoredItem*> order;
  order.reserve(scored.size());
  std::size_t positives = 0;
  for (const auto& s : scored) {
    order.push_back(&s);
    if (s.label == Label::positive) ++positives;
  }
  if (positives == 0) throw UndefinedMetricError("recall undefined: no positive documents");
  std::sort(order.begin(), order.end(), [](const ScoredItem* a, const ScoredItem* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->id < b->id;
  });
  PRCurve curve;
  curve.positives = positives;
  curve.points.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i]->label == Label::positive) ++tp;
    const std::size_t k = i + 1;
    curve.points.push_back({k, static_cast<double>(tp) / static_cast<double>(positives),
                            static_cast<double>(tp) / static_cast<double>(k)});
  }
  return curve;
}

/// Smallest prefix whose recall reaches `level` (no interpolation).
inline const PRPoint& point_at_recall(const PRCurve& curve, double level) {
  if (!(level > 0.0 && level <= 1.0)) throw ValidationError("recall level must lie in (0, 1]");
  if (curve.points.empty()) throw UndefinedMetricError("empty precision-recall curve");
  auto it = std::find_if(curve.points.begin(), curve.points.end(),
                         [level](const PRPoint& p) { return p.recall >= level; });
  if (it == curve.points.end()) return curve.points.back();
  return *it;
}

inline double precision_at_recall(const PRCurve& curve, double level) {
  return point_at_recall(curve, level).precision;
}

/// CSV k,recall,precision
inline void write_curve_csv(std::ostream& out, const PRCurve& curve) {
  out << "k,recall,precision\n";
  char buf[96];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", p.k, p.recall, p.precision);
    out << buf;
  }
}

}  // namespace seedsel
