#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "seedsel/error.hpp"
#include "seedsel/rng.hpp"

namespace seedsel {

/// Position of a document inside its LabeledCorpus.
using DocIndex = std::uint32_t;

enum class Label : std::uint8_t { negative = 0, positive = 1 };

struct Document {
  std::string id;
  std::string text;
  std::optional<Label> label;
};

/// Immutable-after-load document collection. Iteration order is insertion
/// order, which every downstream module relies on for determinism.
class LabeledCorpus {
 public:
  explicit LabeledCorpus(std::string name = {}) : name_(std::move(name)) {}

  void add(Document doc) {
    if (doc.id.empty()) throw ValidationError("document id must be non-empty");
    if (docs_.size() >= std::numeric_limits<DocIndex>::max())
      throw ValidationError("corpus too large");
    auto [it, inserted] =
        by_id_.emplace(doc.id, static_cast<DocIndex>(docs_.size()));
    if (!inserted) throw ValidationError("duplicate document id '" + doc.id + "'");
    docs_.push_back(std::move(doc));
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const Document& operator[](DocIndex i) const { return docs_[i]; }
  std::span<const Document> documents() const noexcept { return docs_; }

  std::optional<DocIndex> find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t labeled_count() const {
    return static_cast<std::size_t>(std::count_if(
        docs_.begin(), docs_.end(), [](const Document& d) { return d.label.has_value(); }));
  }

  std::vector<DocIndex> all_indices() const {
    std::vector<DocIndex> out(docs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<DocIndex>(i);
    return out;
  }

 private:
  std::string name_;
  std::vector<Document> docs_;
  std::unordered_map<std::string, DocIndex> by_id_;
};

// ---------------------------------------------------------------------------
// Ratios and percentage display

/// Exact ratio of two counts. percent() rounds half-up at the requested
/// number of decimals using integer arithmetic only.
struct Ratio {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;

  double value() const {
    return denominator == 0 ? 0.0
                            : static_cast<double>(numerator) / static_cast<double>(denominator);
  }

  std::string percent(int decimals = 2) const {
    std::uint64_t scale = 100;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const unsigned __int128 scaled =
        (static_cast<unsigned __int128>(numerator) * scale * 2 + denominator) /
        (static_cast<unsigned __int128>(denominator) * 2);
    return format_scaled(static_cast<std::uint64_t>(scaled), decimals) + "%";
  }

  static std::string format_scaled(std::uint64_t scaled, int decimals) {
    std::string digits = std::to_string(scaled);
    if (decimals == 0) return digits;
    if (digits.size() <= static_cast<std::size_t>(decimals))
      digits.insert(0, static_cast<std::size_t>(decimals) + 1 - digits.size(), '0');
    digits.insert(digits.size() - static_cast<std::size_t>(decimals), ".");
    return digits;
  }

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Half-up percentage rendering for real-valued ratios (e.g. precision).
inline std::string format_percent(double ratio, int decimals = 2) {
  double scale = 100.0;
  for (int i = 0; i < decimals; ++i) scale *= 10.0;
  const double scaled = std::floor(ratio * scale + 0.5 + 1e-9);
  return Ratio::format_scaled(static_cast<std::uint64_t>(std::max(0.0, scaled)), decimals) +
         "%";
}

/// Positive-class rate over the labeled members of a label range.
template <class LabelRange>
Ratio richness_of_labels(const LabelRange& labels) {
  Ratio r{0, 0};
  for (const std::optional<Label>& l : labels) {
    if (!l) continue;
    ++r.denominator;
    if (*l == Label::positive) ++r.numerator;
  }
  if (r.denominator == 0) throw UndefinedMetricError("richness undefined: no labeled documents");
  return r;
}

inline Ratio richness(const LabeledCorpus& corpus, std::span<const DocIndex> view) {
  std::vector<std::optional<Label>> labels;
  labels.reserve(view.size());
  for (DocIndex i : view) labels.push_back(corpus[i].label);
  return richness_of_labels(labels);
}

inline Ratio richness(const LabeledCorpus& corpus) {
  std::vector<std::optional<Label>> labels;
  labels.reserve(corpus.size());
  for (const auto& d : corpus.documents()) labels.push_back(d.label);
  return richness_of_labels(labels);
}

// ---------------------------------------------------------------------------
// Loading

enum class CorpusFormat { jsonl, csv };

inline CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "csv") return CorpusFormat::csv;
  throw ValidationError("unknown corpus format '" + std::string(s) + "'");
}

inline std::optional<Label> parse_label_text(std::string_view s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  if (s == "1") return Label::positive;
  if (s == "0") return Label::negative;
  throw ParseError("label must be 1, 0 or empty, got '" + std::string(s) + "'", line);
}

inline LabeledCorpus parse_jsonl(std::istream& in, std::string name = {}) {
  LabeledCorpus corpus(std::move(name));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!row.is_object()) throw ParseError("row is not a JSON object", line_no);
    Document doc;
    auto id = row.find("id");
    if (id == row.end() || !id->is_string()) throw ParseError("missing string field 'id'", line_no);
    doc.id = id->get<std::string>();
    if (auto text = row.find("text"); text != row.end()) {
      if (!text->is_string()) throw ParseError("field 'text' must be a string", line_no);
      doc.text = text->get<std::string>();
    }
    if (auto label = row.find("label"); label != row.end() && !label->is_null()) {
      if (!label->is_number_integer()) throw ParseError("field 'label' must be 1, 0 or null", line_no);
      const auto v = label->get<long long>();
      if (v == 1)
        doc.label = Label::positive;
      else if (v == 0)
        doc.label = Label::negative;
      else
        throw ParseError("field 'label' must be 1, 0 or null", line_no);
    }
    try {
      corpus.add(std::move(doc));
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
  return corpus;
}

namespace detail {

/// Reads one RFC-4180 record; quoted fields may span lines. Returns false at
/// end of input. `line` is advanced past every physical line consumed.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  const std::size_t start_line = line + 1;
  std::string field;
  bool quoted = false;
  bool after_quote = false;
  for (;;) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw ParseError("unterminated quoted field", start_line);
      fields.push_back(std::move(field));
      ++line;
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      ++line;
      return true;
    } else if (ch == '"') {
      if (!field.empty() || after_quote) throw ParseError("unexpected quote inside field", line + 1);
      quoted = true;
    } else {
      if (after_quote) throw ParseError("characters after closing quote", line + 1);
      field.push_back(ch);
    }
  }
}

}  // namespace detail

inline LabeledCorpus parse_csv(std::istream& in, std::string name = {}) {
  LabeledCorpus corpus(std::move(name));
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!detail::read_csv_record(in, fields, line)) throw ParseError("missing header", 1);
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
  if (fields != std::vector<std::string>{"id", "text", "label"})
    throw ParseError("header must be 'id,text,label'", 1);
  for (;;) {
    const std::size_t record_line = line + 1;
    if (!detail::read_csv_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 3)
      throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), record_line);
    Document doc{fields[0], fields[1], parse_label_text(fields[2], record_line)};
    try {
      corpus.add(std::move(doc));
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (line " + std::to_string(record_line) + ")");
    }
  }
  return corpus;
}

inline LabeledCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  const std::string name = path.stem().string();
  return format == CorpusFormat::jsonl ? parse_jsonl(in, name) : parse_csv(in, name);
}

inline void write_jsonl(std::ostream& out, const LabeledCorpus& corpus) {
  for (const auto& d : corpus.documents()) {
    nlohmann::json row{{"id", d.id}, {"text", d.text}};
    row["label"] = d.label ? nlohmann::json(static_cast<int>(*d.label)) : nlohmann::json(nullptr);
    out << row.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Split

struct SplitSpec {
  double test_fraction = 0.10;
  std::uint64_t rng_seed = 0;
};

struct CorpusSplit {
  std::vector<DocIndex> selection_pool;  // ascending
  std::vector<DocIndex> test_set;        // ascending
};

/// round-half-up(test_fraction * n)
inline std::size_t test_set_size(std::size_t n, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw SizeError("test_fraction must lie strictly between 0 and 1");
  return static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 0.5));
}

inline CorpusSplit split(const LabeledCorpus& corpus, const SplitSpec& spec) {
  const std::size_t n = corpus.size();
  if (n == 0) throw SizeError("cannot split an empty corpus");
  const std::size_t n_test = test_set_size(n, spec.test_fraction);
  if (n_test < 1 || n_test > n - 1)
    throw SizeError("test set size " + std::to_string(n_test) + " is degenerate for " +
                    std::to_string(n) + " documents");
  std::vector<DocIndex> order = corpus.all_indices();
  Rng rng(derive_seed(spec.rng_seed, "split"));
  partial_shuffle(order, n_test, rng);
  CorpusSplit out;
  out.test_set.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.selection_pool.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.test_set.begin(), out.test_set.end());
  std::sort(out.selection_pool.begin(), out.selection_pool.end());
  return out;
}

/// Order-independent hash of a set of document ids.
inline std::uint64_t id_set_hash(const LabeledCorpus& corpus, std::span<const DocIndex> docs) {
  std::vector<std::string_view> ids;
  ids.reserve(docs.size());
  for (DocIndex i : docs) ids.push_back(corpus[i].id);
  std::sort(ids.begin(), ids.end());
  Fnv1a h;
  for (auto id : ids) h.update(id).update(std::string_view("\n"));
  return h.digest();
}

}  // namespace seedsel
