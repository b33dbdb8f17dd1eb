#pragma once

// Synthetic labeled corpora with a known keyword list. Documents mix a
// background word distribution with topic distributions: positives take
// their primary topic from a small set of "hot" topics, negatives from the
// remaining ones. Keyword tokens come from a reserved word range and are
// inserted by a per-document Poisson process whose rate is raised for
// positives (and for a few "noisy" negative topics) by keyword_informativeness.
// Only the first keyword_topics hot topics get the raised rate, so a keyword
// list covers part of the positive class. Negatives whose primary topic is
// hot (topic_leak) blur the boundary further.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/keywords.hpp"
#include "seedsel/rng.hpp"

namespace seedsel {

struct SyntheticSpec {
  std::size_t n_docs = 20000;
  double richness = 0.15;
  std::size_t n_topics = 20;
  std::size_t hot_topics = 4;
  std::size_t noisy_topics = 2;
  std::size_t keyword_topics = 2;
  double topic_leak = 0.05;
  double primary_share = 0.65;
  std::size_t vocab_size = 4000;
  std::size_t topic_words = 150;
  double background_share = 0.65;
  std::size_t n_keywords = 40;
  double keyword_informativeness = 0.8;
  double keyword_rate = 1.0;
  double mean_doc_length = 100.0;
  double doc_length_sigma = 0.6;
  std::size_t min_doc_length = 8;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (n_docs < 2) throw ValidationError("n_docs must be at least 2");
    if (!(richness > 0.0 && richness < 1.0)) throw ValidationError("richness must lie in (0, 1)");
    if (richness * static_cast<double>(n_docs) < 1.0 ||
        (1.0 - richness) * static_cast<double>(n_docs) < 1.0)
      throw ValidationError("richness and n_docs leave one class empty in expectation");
    if (hot_topics < 1 || hot_topics >= n_topics)
      throw ValidationError("hot_topics must be at least 1 and less than n_topics");
    if (noisy_topics > n_topics - hot_topics)
      throw ValidationError("noisy_topics exceeds the number of negative topics");
    if (keyword_topics > hot_topics) throw ValidationError("keyword_topics exceeds hot_topics");
    if (!(topic_leak >= 0.0 && topic_leak < 1.0)) throw ValidationError("topic_leak must lie in [0, 1)");
    if (!(primary_share >= 0.0 && primary_share <= 1.0))
      throw ValidationError("primary_share must lie in [0, 1]");
    if (vocab_size < 10) throw ValidationError("vocab_size must be at least 10");
    if (topic_words < 1 || topic_words > vocab_size)
      throw ValidationError("topic_words must lie in [1, vocab_size]");
    if (!(background_share >= 0.0 && background_share < 1.0))
      throw ValidationError("background_share must lie in [0, 1)");
    if (!(keyword_informativeness >= 0.0 && keyword_informativeness <= 1.0))
      throw ValidationError("keyword_informativeness must lie in [0, 1]");
    if (!(keyword_rate >= 0.0)) throw ValidationError("keyword_rate must be nonnegative");
    if (!(mean_doc_length >= 1.0)) throw ValidationError("mean_doc_length must be at least 1");
    if (static_cast<double>(min_doc_length) > mean_doc_length)
      throw ValidationError("min_doc_length exceeds mean_doc_length");
    if (!(doc_length_sigma >= 0.0)) throw ValidationError("doc_length_sigma must be nonnegative");
  }
};

struct SyntheticCorpus {
  LabeledCorpus corpus;
  KeywordList keywords;
  std::vector<std::string> keyword_lines;
};

namespace detail {

/// Pronounceable, purely alphabetic word for an index (at least two syllables).
inline std::string synthetic_word(std::size_t index) {
  static constexpr char kConsonants[] = "bcdfghjklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  constexpr std::size_t kSyllables = (sizeof kConsonants - 1) * (sizeof kVowels - 1);
  std::string out;
  std::size_t n = index;
  int count = 0;
  do {
    const std::size_t s = n % kSyllables;
    out.push_back(kConsonants[s / (sizeof kVowels - 1)]);
    out.push_back(kVowels[s % (sizeof kVowels - 1)]);
    n /= kSyllables;
    ++count;
  } while (n > 0 || count < 2);
  return out;
}

inline std::vector<double> zipf_weights(std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  return w;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.rng_seed, "synthetic"));

  // Content words occupy [0, vocab_size); keyword words follow.
  std::vector<std::size_t> word_ids(spec.vocab_size);
  for (std::size_t i = 0; i < word_ids.size(); ++i) word_ids[i] = i;

  auto background_order = word_ids;
  partial_shuffle(background_order, background_order.size(), rng);
  const auto background_weights = detail::zipf_weights(spec.vocab_size, 1.0);
  const DiscreteSampler background(background_weights);

  std::vector<std::vector<std::size_t>> topic_vocab(spec.n_topics);
  const auto topic_weights = detail::zipf_weights(spec.topic_words, 0.8);
  const DiscreteSampler topic_sampler(topic_weights);
  for (auto& words : topic_vocab) {
    words = word_ids;
    partial_shuffle(words, spec.topic_words, rng);
    words.resize(spec.topic_words);
  }

  // Every fifth keyword is a two-word phrase.
  SyntheticCorpus out{LabeledCorpus("synthetic"), {}, {}};
  std::vector<std::vector<std::string>> keyword_tokens;
  std::size_t next_word = spec.vocab_size;
  for (std::size_t k = 0; k < spec.n_keywords; ++k) {
    std::vector<std::string> phrase{detail::synthetic_word(next_word++)};
    if (k % 5 == 4) phrase.push_back(detail::synthetic_word(next_word++));
    std::string line = phrase[0];
    for (std::size_t i = 1; i < phrase.size(); ++i) line += " " + phrase[i];
    out.keywords.add(line);
    out.keyword_lines.push_back(line);
    keyword_tokens.push_back(std::move(phrase));
  }
  const DiscreteSampler keyword_sampler(detail::zipf_weights(std::max<std::size_t>(1, spec.n_keywords), 1.0));

  const std::size_t cold = spec.n_topics - spec.hot_topics;
  const double mu = std::log(spec.mean_doc_length) - 0.5 * spec.doc_length_sigma * spec.doc_length_sigma;
  const int id_width = static_cast<int>(std::to_string(spec.n_docs).size());

  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < spec.n_docs; ++i) {
    const bool positive = rng.bernoulli(spec.richness);
    const bool leaked = !positive && rng.bernoulli(spec.topic_leak);
    const std::size_t primary = positive || leaked ? rng.below(spec.hot_topics)
                                                   : spec.hot_topics + rng.below(cold);
    const std::size_t secondary = rng.below(spec.n_topics);
    const double raw_len = std::exp(mu + spec.doc_length_sigma * rng.normal());
    const std::size_t length =
        std::max<std::size_t>(spec.min_doc_length, static_cast<std::size_t>(std::llround(raw_len)));

    tokens.clear();
    for (std::size_t t = 0; t < length; ++t) {
      const double u = rng.uniform();
      std::size_t word;
      if (u < spec.background_share) {
        word = background_order[background(rng)];
      } else if (u < spec.background_share + (1.0 - spec.background_share) * spec.primary_share) {
        word = topic_vocab[primary][topic_sampler(rng)];
      } else {
        word = topic_vocab[secondary][topic_sampler(rng)];
      }
      tokens.push_back(detail::synthetic_word(word));
    }

    const bool noisy = !positive && primary >= spec.hot_topics &&
                       primary < spec.hot_topics + spec.noisy_topics;
    const bool covered = positive && primary < spec.keyword_topics;
    const double multiplier = (covered || noisy) ? 1.0 + spec.keyword_informativeness
                                                  : 1.0 - spec.keyword_informativeness;
    const double rate = spec.keyword_rate * multiplier * static_cast<double>(length) / spec.mean_doc_length;
    const std::size_t events = spec.n_keywords == 0 ? 0 : rng.poisson(rate);
    for (std::size_t e = 0; e < events; ++e) {
      const auto& phrase = keyword_tokens[keyword_sampler(rng)];
      const std::size_t at = rng.below(tokens.size() + 1);
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), phrase.begin(), phrase.end());
    }

    std::string text;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t) text.push_back(t % 17 == 0 ? '\n' : ' ');
      text += tokens[t];
    }
    std::string id = std::to_string(i + 1);
    id.insert(0, static_cast<std::size_t>(id_width) - id.size(), '0');
    out.corpus.add(Document{"doc" + id, std::move(text), positive ? Label::positive : Label::negative});
  }
  return out;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("synthetic spec must be a JSON object");
  SyntheticSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_docs") s.n_docs = value.get<std::size_t>();
      else if (key == "richness") s.richness = value.get<double>();
      else if (key == "n_topics") s.n_topics = value.get<std::size_t>();
      else if (key == "hot_topics") s.hot_topics = value.get<std::size_t>();
      else if (key == "noisy_topics") s.noisy_topics = value.get<std::size_t>();
      else if (key == "keyword_topics") s.keyword_topics = value.get<std::size_t>();
      else if (key == "topic_leak") s.topic_leak = value.get<double>();
      else if (key == "primary_share") s.primary_share = value.get<double>();
      else if (key == "vocab_size") s.vocab_size = value.get<std::size_t>();
      else if (key == "topic_words") s.topic_words = value.get<std::size_t>();
      else if (key == "background_share") s.background_share = value.get<double>();
      else if (key == "n_keywords") s.n_keywords = value.get<std::size_t>();
      else if (key == "keyword_informativeness") s.keyword_informativeness = value.get<double>();
      else if (key == "keyword_rate") s.keyword_rate = value.get<double>();
      else if (key == "mean_doc_length") s.mean_doc_length = value.get<double>();
      else if (key == "doc_length_sigma") s.doc_length_sigma = value.get<double>();
      else if (key == "min_doc_length") s.min_doc_length = value.get<std::size_t>();
      else if (key == "rng_seed") s.rng_seed = value.get<std::uint64_t>();
      else throw ValidationError("unknown synthetic spec key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("bad value for '" + key + "': " + e.what());
    }
  }
  s.validate();
  return s;
}

}  // namespace seedsel
