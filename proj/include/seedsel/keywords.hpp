#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/textpipe.hpp"

namespace seedsel {

/// Ordered keyword phrases, each already passed through tokenize().
class KeywordList {
 public:
  KeywordList() = default;

  /// Throws ValidationError for phrases that tokenize to nothing or that
  /// duplicate an earlier phrase.
  void add(std::string_view raw) {
    TokenSequence phrase = tokenize(raw);
    if (phrase.empty())
      throw ValidationError("keyword '" + std::string(raw) + "' is empty after normalization");
    if (std::find(phrases_.begin(), phrases_.end(), phrase) != phrases_.end())
      throw ValidationError("duplicate keyword '" + std::string(raw) + "'");
    raw_.emplace_back(raw);
    phrases_.push_back(std::move(phrase));
  }

  std::size_t size() const noexcept { return phrases_.size(); }
  bool empty() const noexcept { return phrases_.empty(); }
  const TokenSequence& phrase(std::size_t i) const { return phrases_[i]; }
  const std::string& raw(std::size_t i) const { return raw_[i]; }

 private:
  std::vector<std::string> raw_;
  std::vector<TokenSequence> phrases_;
};

/// One keyword per line; blank lines and lines starting with '#' are skipped.
inline KeywordList parse_keyword_list(std::istream& in) {
  KeywordList list;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      list.add(line);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
  return list;
}

inline KeywordList load_keyword_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open keyword file " + path.string());
  return parse_keyword_list(in);
}

/// distinct: one point per matching keyword. occurrences: one point per
/// phrase occurrence (sensitivity mode).
enum class PointMode { distinct, occurrences };

class KeywordIndex {
 public:
  KeywordIndex() = default;

  /// postings[k] lists the pool documents containing keyword k.
  KeywordIndex(std::vector<DocIndex> pool, std::vector<std::vector<DocIndex>> postings)
      : pool_(std::move(pool)), postings_(std::move(postings)) {
    std::sort(pool_.begin(), pool_.end());
    for (auto& p : postings_) {
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
      for (DocIndex d : p) ++points_[d];
    }
    finish();
  }

  /// Explicit point totals, for scoring modes other than one point per keyword.
  KeywordIndex(std::vector<DocIndex> pool, std::vector<std::vector<DocIndex>> postings,
               std::unordered_map<DocIndex, std::uint32_t> points)
      : pool_(std::move(pool)), postings_(std::move(postings)), points_(std::move(points)) {
    finish();
  }

  std::size_t keyword_count() const noexcept { return postings_.size(); }
  const std::vector<DocIndex>& postings(std::size_t keyword) const { return postings_[keyword]; }
  const std::vector<DocIndex>& pool() const noexcept { return pool_; }

  std::uint32_t points(DocIndex d) const {
    auto it = points_.find(d);
    return it == points_.end() ? 0 : it->second;
  }

  /// Documents with points >= 1, ascending.
  const std::vector<DocIndex>& hit_documents() const noexcept { return hits_; }

 private:
  void finish() {
    hits_.clear();
    for (const auto& [d, p] : points_)
      if (p > 0) hits_.push_back(d);
    std::sort(hits_.begin(), hits_.end());
  }

  std::vector<DocIndex> pool_;
  std::vector<std::vector<DocIndex>> postings_;
  std::unordered_map<DocIndex, std::uint32_t> points_;
  std::vector<DocIndex> hits_;
};

/// Builds per-keyword postings over the pool. A document matches a keyword
/// when the keyword's tokens occur contiguously in its token sequence.
inline KeywordIndex build_index(std::span<const TokenSequence> corpus_tokens,
                                std::span<const DocIndex> pool, const KeywordList& list,
                                PointMode mode = PointMode::distinct) {
  if (pool.empty()) throw ValidationError("cannot index an empty pool");
  std::vector<DocIndex> members(pool.begin(), pool.end());
  std::sort(members.begin(), members.end());
  std::vector<std::vector<DocIndex>> postings(list.size());
  std::unordered_map<DocIndex, std::uint32_t> point_totals;

  std::unordered_map<std::string_view, std::vector<std::size_t>> by_first_token;
  for (std::size_t k = 0; k < list.size(); ++k) by_first_token[list.phrase(k).front()].push_back(k);

  std::vector<std::uint32_t> occurrences(list.size(), 0);
  std::vector<std::size_t> touched;
  for (DocIndex d : members) {
    const TokenSequence& tokens = corpus_tokens[d];
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
      auto it = by_first_token.find(tokens[pos]);
      if (it == by_first_token.end()) continue;
      for (std::size_t k : it->second) {
        const TokenSequence& phrase = list.phrase(k);
        if (pos + phrase.size() > tokens.size()) continue;
        if (!std::equal(phrase.begin() + 1, phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos) + 1))
          continue;
        if (occurrences[k]++ == 0) touched.push_back(k);
      }
    }
    if (touched.empty()) continue;
    std::uint32_t points = 0;
    for (std::size_t k : touched) {
      postings[k].push_back(d);
      points += mode == PointMode::distinct ? 1 : occurrences[k];
      occurrences[k] = 0;
    }
    point_totals[d] = points;
    touched.clear();
  }
  return KeywordIndex(std::move(members), std::move(postings), std::move(point_totals));
}

/// Share of the pool with at least one keyword hit.
inline Ratio hit_percentage(const KeywordIndex& index, std::size_t pool_size) {
  if (pool_size == 0) throw ValidationError("pool_size must be at least 1");
  return Ratio{index.hit_documents().size(), pool_size};
}

}  // namespace seedsel
