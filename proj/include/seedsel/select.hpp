#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "seedsel/cluster.hpp"
#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/keywords.hpp"
#include "seedsel/rng.hpp"

namespace seedsel {

enum class Strategy {
  random_sample,
  stratified_keyword,
  stratified_keyword_weighted,
  keyword_model_top_scoring,
  keyword_model_stratified,
  weighted_keyword_model_stratified,
  clustering,
  clustering_weighted,
};

inline constexpr std::array<Strategy, 8> kAllStrategies{
    Strategy::random_sample,
    Strategy::stratified_keyword,
    Strategy::stratified_keyword_weighted,
    Strategy::keyword_model_top_scoring,
    Strategy::keyword_model_stratified,
    Strategy::weighted_keyword_model_stratified,
    Strategy::clustering,
    Strategy::clustering_weighted,
};

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random_sample: return "random_sample";
    case Strategy::stratified_keyword: return "stratified_keyword";
    case Strategy::stratified_keyword_weighted: return "stratified_keyword_weighted";
    case Strategy::keyword_model_top_scoring: return "keyword_model_top_scoring";
    case Strategy::keyword_model_stratified: return "keyword_model_stratified";
    case Strategy::weighted_keyword_model_stratified: return "weighted_keyword_model_stratified";
    case Strategy::clustering: return "clustering";
    case Strategy::clustering_weighted: return "clustering_weighted";
  }
  return "unknown";
}

inline std::string_view strategy_title(Strategy s) {
  switch (s) {
    case Strategy::random_sample: return "Random Sample";
    case Strategy::stratified_keyword: return "Stratified Keyword";
    case Strategy::stratified_keyword_weighted: return "Stratified Keyword - Weighted";
    case Strategy::keyword_model_top_scoring: return "Keyword Model - Top Scoring";
    case Strategy::keyword_model_stratified: return "Keyword Model - Stratified";
    case Strategy::weighted_keyword_model_stratified: return "Weighted Keyword Model - Stratified";
    case Strategy::clustering: return "Clustering";
    case Strategy::clustering_weighted: return "Clustering - Weighted";
  }
  return "Unknown";
}

inline Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies)
    if (strategy_name(s) == name) return s;
  throw ValidationError("unknown strategy '" + std::string(name) + "'");
}

inline bool uses_keywords(Strategy s) {
  return s == Strategy::stratified_keyword || s == Strategy::stratified_keyword_weighted ||
         s == Strategy::keyword_model_top_scoring || s == Strategy::keyword_model_stratified ||
         s == Strategy::weighted_keyword_model_stratified;
}

inline bool uses_clusters(Strategy s) {
  return s == Strategy::clustering || s == Strategy::clustering_weighted;
}

struct SeedSpec {
  Strategy strategy = Strategy::random_sample;
  std::size_t size = 500;
  std::uint64_t rng_seed = 0;
};

/// A selected document and the stratum it was drawn for ("keyword:3",
/// "decile:0", "leaf:17", "fill", ...).
struct SeedPick {
  DocIndex doc;
  std::string stratum;
};

struct SeedSet {
  Strategy strategy = Strategy::random_sample;
  std::uint64_t rng_seed = 0;
  std::vector<SeedPick> picks;  // ascending by doc

  std::size_t size() const noexcept { return picks.size(); }

  std::vector<DocIndex> documents() const {
    std::vector<DocIndex> out;
    out.reserve(picks.size());
    for (const auto& p : picks) out.push_back(p.doc);
    return out;
  }
};

/// Inputs shared by all strategies. `index` and `tree` are only required by
/// the strategies that use them.
struct SelectionInputs {
  const LabeledCorpus* corpus = nullptr;
  std::span<const DocIndex> pool;
  const KeywordIndex* index = nullptr;
  const ClusterTree* tree = nullptr;
};

// ---------------------------------------------------------------------------
// Apportionment

/// Largest-remainder apportionment of `total` proportional to `weights`,
/// without any capacity limit. Ties in the remainder go to the lower index.
inline std::vector<std::size_t> apportion_uncapped(std::span<const std::size_t> weights,
                                                   std::size_t total) {
  std::vector<std::size_t> quota(weights.size(), 0);
  const unsigned __int128 sum = std::accumulate(weights.begin(), weights.end(),
                                                static_cast<unsigned __int128>(0));
  if (sum == 0 || total == 0) return quota;
  std::vector<unsigned __int128> remainder(weights.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const unsigned __int128 num = static_cast<unsigned __int128>(weights[i]) * total;
    quota[i] = static_cast<std::size_t>(num / sum);
    remainder[i] = num % sum;
    assigned += quota[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < total; ++r) {
    const std::size_t i = order[r % order.size()];
    if (weights[i] == 0) continue;
    ++quota[i];
    ++assigned;
  }
  return quota;
}

/// Largest-remainder apportionment with per-stratum capacity. Overflow from
/// capped strata is re-apportioned (by weight) among strata that still have
/// room. The result may sum to less than `total` only when every stratum
/// with positive weight is full.
inline std::vector<std::size_t> apportion(std::span<const std::size_t> weights, std::size_t total,
                                          std::span<const std::size_t> capacities) {
  std::vector<std::size_t> quota(weights.size(), 0);
  std::size_t remaining = total;
  while (remaining > 0) {
    std::vector<std::size_t> active_weights(weights.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0 && quota[i] < capacities[i]) {
        active_weights[i] = weights[i];
        any = true;
      }
    }
    if (!any) break;
    const auto share = apportion_uncapped(active_weights, remaining);
    std::size_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const std::size_t room = capacities[i] - quota[i];
      const std::size_t take = std::min(share[i], room);
      quota[i] += take;
      given += take;
    }
    remaining -= given;
  }
  return quota;
}

/// Proportional quotas over strata of the given sizes, capped at each
/// stratum's size.
inline std::vector<std::size_t> allocate_proportional(std::span<const std::size_t> stratum_sizes,
                                                      std::size_t total) {
  if (total < 1) throw ValidationError("allocation total must be at least 1");
  const std::size_t sum = std::accumulate(stratum_sizes.begin(), stratum_sizes.end(), std::size_t{0});
  if (sum == 0) throw InfeasibleError("all strata are empty");
  if (total > sum)
    throw InfeasibleError("cannot allocate " + std::to_string(total) + " from strata totalling " +
                          std::to_string(sum));
  return apportion(stratum_sizes, total, stratum_sizes);
}

// ---------------------------------------------------------------------------
// Strategies

namespace detail {

class SeedBuilder {
 public:
  SeedBuilder(const SeedSpec& spec) : spec_(spec), rng_(derive_seed(spec.rng_seed, "select")) {}

  Rng& rng() { return rng_; }
  bool taken(DocIndex d) const { return chosen_.contains(d); }
  std::size_t count() const { return picks_.size(); }
  std::size_t wanted() const { return spec_.size; }

  void take(DocIndex d, std::string stratum) {
    if (chosen_.insert(d).second) picks_.push_back({d, std::move(stratum)});
  }

  /// Draws up to `k` not-yet-chosen documents uniformly from `candidates`.
  std::size_t draw(std::span<const DocIndex> candidates, std::size_t k, const std::string& stratum) {
    std::vector<DocIndex> open;
    open.reserve(candidates.size());
    for (DocIndex d : candidates)
      if (!taken(d)) open.push_back(d);
    partial_shuffle(open, k, rng_);
    const std::size_t n = std::min(k, open.size());
    for (std::size_t i = 0; i < n; ++i) take(open[i], stratum);
    return n;
  }

  void fill_from(std::span<const DocIndex> candidates) {
    if (count() < wanted()) draw(candidates, wanted() - count(), "fill");
  }

  SeedSet finish() {
    if (picks_.size() != spec_.size)
      throw InfeasibleError("strategy " + std::string(strategy_name(spec_.strategy)) + " produced " +
                            std::to_string(picks_.size()) + " of " + std::to_string(spec_.size) +
                            " documents");
    std::sort(picks_.begin(), picks_.end(),
              [](const SeedPick& a, const SeedPick& b) { return a.doc < b.doc; });
    return SeedSet{spec_.strategy, spec_.rng_seed, std::move(picks_)};
  }

  std::vector<SeedPick>& picks() { return picks_; }
  void reset(std::vector<SeedPick> picks) {
    picks_ = std::move(picks);
    chosen_.clear();
    for (const auto& p : picks_) chosen_.insert(p.doc);
  }

 private:
  SeedSpec spec_;
  Rng rng_;
  std::unordered_set<DocIndex> chosen_;
  std::vector<SeedPick> picks_;
};

inline void require_size(const SeedSpec& spec, std::size_t available, std::string_view what) {
  if (spec.size < 1) throw InfeasibleError("seed size must be at least 1");
  if (spec.size > available)
    throw InfeasibleError("seed size " + std::to_string(spec.size) + " exceeds " +
                          std::to_string(available) + " " + std::string(what));
}

inline const KeywordIndex& require_index(const SelectionInputs& in) {
  if (in.index == nullptr || in.index->keyword_count() == 0)
    throw InfeasibleError("keyword strategy requires a non-empty keyword index");
  if (in.index->hit_documents().empty())
    throw InfeasibleError("no pool document matches any keyword");
  return *in.index;
}

inline const ClusterTree& require_tree(const SelectionInputs& in) {
  if (in.tree == nullptr || in.tree->leaves.empty())
    throw InfeasibleError("clustering strategy requires a cluster tree");
  std::size_t covered = 0;
  for (std::size_t leaf = 0; leaf < in.tree->leaf_count(); ++leaf)
    covered += in.tree->leaf(leaf).members.size();
  if (covered != in.pool.size()) throw ValidationError("cluster tree does not cover the pool");
  return *in.tree;
}

/// Pool ranked by keyword points (descending), ties by document id.
inline std::vector<DocIndex> rank_by_points(const SelectionInputs& in, const KeywordIndex& index) {
  std::vector<DocIndex> ranked(in.pool.begin(), in.pool.end());
  std::vector<std::uint32_t> points(in.corpus->size(), 0);
  for (DocIndex d : ranked) points[d] = index.points(d);
  std::sort(ranked.begin(), ranked.end(), [&](DocIndex a, DocIndex b) {
    if (points[a] != points[b]) return points[a] > points[b];
    return (*in.corpus)[a].id < (*in.corpus)[b].id;
  });
  return ranked;
}

/// Ten contiguous slices; the first n % 10 slices get one extra member.
inline std::vector<std::span<const DocIndex>> deciles(std::span<const DocIndex> ranked) {
  std::vector<std::span<const DocIndex>> out;
  const std::size_t n = ranked.size();
  std::size_t start = 0;
  for (std::size_t g = 0; g < 10; ++g) {
    const std::size_t len = n / 10 + (g < n % 10 ? 1 : 0);
    out.push_back(ranked.subspan(start, len));
    start += len;
  }
  return out;
}

}  // namespace detail

inline SeedSet random_sample(const SelectionInputs& in, const SeedSpec& spec) {
  detail::require_size(spec, in.pool.size(), "pool documents");
  detail::SeedBuilder b(spec);
  b.draw(in.pool, spec.size, "pool");
  return b.finish();
}

/// One document per keyword (in list order, never reusing a document), then
/// a uniform fill from the remaining keyword-hit documents. When the
/// per-keyword picks alone exceed the size they are subsampled uniformly.
inline SeedSet stratified_keyword(const SelectionInputs& in, const SeedSpec& spec) {
  const KeywordIndex& index = detail::require_index(in);
  detail::require_size(spec, index.hit_documents().size(), "keyword-hit documents");
  detail::SeedBuilder b(spec);
  for (std::size_t k = 0; k < index.keyword_count(); ++k)
    b.draw(index.postings(k), 1, "keyword:" + std::to_string(k));
  if (b.count() > spec.size) {
    auto picks = b.picks();
    partial_shuffle(picks, spec.size, b.rng());
    picks.resize(spec.size);
    b.reset(std::move(picks));
  }
  b.fill_from(index.hit_documents());
  return b.finish();
}

inline SeedSet stratified_keyword_weighted(const SelectionInputs& in, const SeedSpec& spec) {
  const KeywordIndex& index = detail::require_index(in);
  detail::require_size(spec, index.hit_documents().size(), "keyword-hit documents");
  std::vector<std::size_t> sizes;
  for (std::size_t k = 0; k < index.keyword_count(); ++k) sizes.push_back(index.postings(k).size());
  const auto quotas = allocate_proportional(sizes, spec.size);
  detail::SeedBuilder b(spec);
  for (std::size_t k = 0; k < index.keyword_count(); ++k)
    b.draw(index.postings(k), quotas[k], "keyword:" + std::to_string(k));
  b.fill_from(index.hit_documents());
  return b.finish();
}

inline SeedSet keyword_model_top_scoring(const SelectionInputs& in, const SeedSpec& spec) {
  const KeywordIndex& index = detail::require_index(in);
  detail::require_size(spec, in.pool.size(), "pool documents");
  const auto ranked = detail::rank_by_points(in, index);
  detail::SeedBuilder b(spec);
  for (std::size_t i = 0; i < spec.size; ++i) b.take(ranked[i], "rank");
  return b.finish();
}

inline SeedSet keyword_model_stratified(const SelectionInputs& in, const SeedSpec& spec) {
  const KeywordIndex& index = detail::require_index(in);
  if (in.pool.size() < 10) throw InfeasibleError("points deciles need at least 10 pool documents");
  detail::require_size(spec, in.pool.size(), "pool documents");
  const auto ranked = detail::rank_by_points(in, index);
  const auto groups = detail::deciles(ranked);
  detail::SeedBuilder b(spec);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::size_t quota = spec.size / 10 + (g < spec.size % 10 ? 1 : 0);
    b.draw(groups[g], quota, "decile:" + std::to_string(g));
  }
  b.fill_from(ranked);
  return b.finish();
}

inline SeedSet weighted_keyword_model_stratified(const SelectionInputs& in, const SeedSpec& spec) {
  const KeywordIndex& index = detail::require_index(in);
  if (in.pool.size() < 10) throw InfeasibleError("points deciles need at least 10 pool documents");
  detail::require_size(spec, in.pool.size(), "pool documents");
  const auto ranked = detail::rank_by_points(in, index);
  const auto groups = detail::deciles(ranked);
  std::vector<std::size_t> hits(groups.size(), 0), capacity(groups.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    capacity[g] = groups[g].size();
    for (DocIndex d : groups[g])
      if (index.points(d) > 0) ++hits[g];
  }
  if (std::all_of(hits.begin(), hits.end(), [](std::size_t h) { return h == 0; }))
    throw InfeasibleError("no decile contains a keyword-hit document");
  const auto quotas = apportion(hits, spec.size, capacity);
  detail::SeedBuilder b(spec);
  for (std::size_t g = 0; g < groups.size(); ++g)
    b.draw(groups[g], quotas[g], "decile:" + std::to_string(g));
  b.fill_from(ranked);
  return b.finish();
}

/// Equal quota per leaf (remainder one-per-leaf in leaf order), capped at the
/// leaf size; any shortfall is filled uniformly from the rest of the pool.
inline SeedSet clustering_select(const SelectionInputs& in, const SeedSpec& spec) {
  const ClusterTree& tree = detail::require_tree(in);
  detail::require_size(spec, in.pool.size(), "pool documents");
  const std::size_t leaves = tree.leaf_count();
  detail::SeedBuilder b(spec);
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    const std::size_t quota = spec.size / leaves + (leaf < spec.size % leaves ? 1 : 0);
    b.draw(tree.leaf(leaf).members, quota, "leaf:" + std::to_string(leaf));
  }
  b.fill_from(in.pool);
  return b.finish();
}

inline SeedSet clustering_weighted_select(const SelectionInputs& in, const SeedSpec& spec) {
  const ClusterTree& tree = detail::require_tree(in);
  detail::require_size(spec, in.pool.size(), "pool documents");
  std::vector<std::size_t> sizes;
  for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf)
    sizes.push_back(tree.leaf(leaf).members.size());
  const auto quotas = allocate_proportional(sizes, spec.size);
  detail::SeedBuilder b(spec);
  for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf)
    b.draw(tree.leaf(leaf).members, quotas[leaf], "leaf:" + std::to_string(leaf));
  b.fill_from(in.pool);
  return b.finish();
}

inline SeedSet select_seed(const SelectionInputs& in, const SeedSpec& spec) {
  if (in.corpus == nullptr) throw ValidationError("selection requires a corpus");
  switch (spec.strategy) {
    case Strategy::random_sample: return random_sample(in, spec);
    case Strategy::stratified_keyword: return stratified_keyword(in, spec);
    case Strategy::stratified_keyword_weighted: return stratified_keyword_weighted(in, spec);
    case Strategy::keyword_model_top_scoring: return keyword_model_top_scoring(in, spec);
    case Strategy::keyword_model_stratified: return keyword_model_stratified(in, spec);
    case Strategy::weighted_keyword_model_stratified:
      return weighted_keyword_model_stratified(in, spec);
    case Strategy::clustering: return clustering_select(in, spec);
    case Strategy::clustering_weighted: return clustering_weighted_select(in, spec);
  }
  throw ValidationError("unknown strategy");
}

/// Audit export: doc_id,strategy,stratum,rng_seed
inline void write_seed_csv(std::ostream& out, const LabeledCorpus& corpus, const SeedSet& seed) {
  out << "doc_id,strategy,stratum,rng_seed\n";
  for (const auto& p : seed.picks) {
    const std::string& id = corpus[p.doc].id;
    const bool quote = id.find_first_of(",\"\r\n") != std::string::npos;
    if (quote) {
      out << '"';
      for (char c : id) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << id;
    }
    out << ',' << strategy_name(seed.strategy) << ',' << p.stratum << ',' << seed.rng_seed << '\n';
  }
}

}  // namespace seedsel
