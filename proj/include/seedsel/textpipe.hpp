#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/rng.hpp"

namespace seedsel {

using TokenSequence = std::vector<std::string>;

namespace detail {

// Bytes >= 0x80 belong to UTF-8 multibyte sequences and are kept as word
// characters, so non-ASCII words survive intact (without case folding).
inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

/// Lowercased alphanumeric runs, in order. Tokens shorter than two bytes
/// and tokens made only of digits are dropped.
inline TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2 && !detail::all_digits(current)) out.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (detail::is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::vector<TokenSequence> tokenize_corpus(const LabeledCorpus& corpus) {
  std::vector<TokenSequence> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.documents()) out.push_back(tokenize(d.text));
  return out;
}

struct VectorizerConfig {
  bool stemming = false;
  int ngram_order = 1;
  std::size_t max_tokens = 20000;

  void validate() const {
    if (stemming) throw ValidationError("stemming is not supported");
    if (ngram_order != 1) throw ValidationError("only unigram features are supported");
    if (max_tokens == 0) throw ValidationError("max_tokens must be positive");
  }
};

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Terms in column order, with their document frequencies.
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> document_frequency)
      : terms_(std::move(terms)), df_(std::move(document_frequency)) {
    if (df_.empty()) df_.assign(terms_.size(), 0);
    if (df_.size() != terms_.size()) throw ValidationError("vocabulary size mismatch");
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (!index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second)
        throw ValidationError("duplicate vocabulary term '" + terms_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::string& term(std::size_t column) const { return terms_[column]; }
  std::size_t document_frequency(std::size_t column) const { return df_[column]; }

  std::optional<std::uint32_t> column(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Stable content hash over the ordered term list.
  std::uint64_t hash() const {
    Fnv1a h;
    for (const auto& t : terms_) h.update(t).update(std::string_view("\n"));
    return h.digest();
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Ranks tokens by document frequency (descending, ties lexicographic) and
/// keeps the top cfg.max_tokens.
inline Vocabulary build_vocabulary(std::span<const TokenSequence> pool_tokens,
                                   const VectorizerConfig& cfg = {}) {
  cfg.validate();
  if (pool_tokens.empty()) throw ValidationError("cannot build a vocabulary from an empty pool");
  std::unordered_map<std::string_view, std::size_t> df;
  std::vector<std::string_view> distinct;
  for (const auto& doc : pool_tokens) {
    distinct.assign(doc.begin(), doc.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto t : distinct) ++df[t];
  }
  if (df.empty()) throw ValidationError("vocabulary is empty: pool contains no tokens");
  std::vector<std::pair<std::string_view, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > cfg.max_tokens) ranked.resize(cfg.max_tokens);
  std::vector<std::string> terms;
  std::vector<std::size_t> freq;
  terms.reserve(ranked.size());
  freq.reserve(ranked.size());
  for (const auto& [t, f] : ranked) {
    terms.emplace_back(t);
    freq.push_back(f);
  }
  return Vocabulary(std::move(terms), std::move(freq));
}

/// Convenience overload: vocabulary over the given documents of a tokenized corpus.
inline Vocabulary build_vocabulary(std::span<const TokenSequence> corpus_tokens,
                                   std::span<const DocIndex> pool, const VectorizerConfig& cfg) {
  std::vector<TokenSequence> subset;
  subset.reserve(pool.size());
  for (DocIndex i : pool) subset.push_back(corpus_tokens[i]);
  return build_vocabulary(subset, cfg);
}

struct SparseEntry {
  std::uint32_t column;
  double weight;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Strictly increasing columns, positive finite weights.
struct SparseVector {
  std::vector<SparseEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t nnz() const noexcept { return entries.size(); }

  double dot(std::span<const double> dense) const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight * dense[e.column];
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight * e.weight;
    return s;
  }

  double sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight;
    return s;
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Normalized term frequency: count / in-vocabulary token count.
inline SparseVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<std::uint32_t> columns;
  columns.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto c = vocab.column(t)) columns.push_back(*c);
  }
  SparseVector v;
  if (columns.empty()) return v;
  std::sort(columns.begin(), columns.end());
  const double total = static_cast<double>(columns.size());
  for (std::size_t i = 0; i < columns.size();) {
    std::size_t j = i;
    while (j < columns.size() && columns[j] == columns[i]) ++j;
    v.entries.push_back({columns[i], static_cast<double>(j - i) / total});
    i = j;
  }
  return v;
}

inline SparseVector vectorize(const Document& doc, const Vocabulary& vocab) {
  return vectorize(tokenize(doc.text), vocab);
}

/// Audit dump: rank,token,document_frequency (rank is 1-based).
inline void write_vocabulary_csv(std::ostream& out, const Vocabulary& vocab) {
  out << "rank,token,document_frequency\n";
  for (std::size_t i = 0; i < vocab.size(); ++i)
    out << (i + 1) << ',' << vocab.term(i) << ',' << vocab.document_frequency(i) << '\n';
}

}  // namespace seedsel
