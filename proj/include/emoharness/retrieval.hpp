#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "emoharness/detail/utf8.hpp"
#include "emoharness/error.hpp"

namespace emo {

// Whitespace split, case fold, and trim of leading/trailing punctuation.
// Unsegmented scripts (Chinese, Japanese) come out as whole-clause tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<char32_t> word;

  auto flush = [&] {
    std::size_t first = 0, last = word.size();
    while (first < last && detail::is_unicode_punct(word[first])) ++first;
    while (last > first && detail::is_unicode_punct(word[last - 1])) --last;
    if (first < last) {
      std::string tok;
      for (std::size_t i = first; i < last; ++i) detail::append_utf8(tok, word[i]);
      tokens.push_back(std::move(tok));
    }
    word.clear();
  };

  for (std::size_t i = 0; i < text.size();) {
    auto ch = detail::decode_utf8(text, i);
    i += ch.len;
    if (detail::is_unicode_space(ch.cp)) {
      flush();
    } else {
      word.push_back(detail::to_lower(ch.cp));
    }
  }
  flush();
  return tokens;
}

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
  double epsilon = 0.25;

  void validate() const {
    if (!(k1 >= 0.0)) throw Error(ErrorKind::argument, "bm25 k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorKind::argument, "bm25 b must be in [0, 1]");
    if (!(epsilon >= 0.0)) throw Error(ErrorKind::argument, "bm25 epsilon must be >= 0");
  }
};

struct RetrievalConfig {
  std::size_t k = 1;
};

struct Document {
  std::string id;
  std::string text;
};

struct ScoredDoc {
  std::string id;
  std::size_t position;
  double score;
};

// Okapi BM25 over a fixed corpus. Immutable after build().
class Bm25Index {
 public:
  static Bm25Index build(std::span<const Document> corpus, Bm25Params params = {}) {
    params.validate();
    if (corpus.empty()) throw Error(ErrorKind::argument, "cannot build a BM25 index over no documents");

    Bm25Index idx;
    idx.params_ = params;
    idx.ids_.reserve(corpus.size());
    idx.lengths_.reserve(corpus.size());
    idx.term_freqs_.resize(corpus.size());

    double total_len = 0.0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      if (!idx.positions_.emplace(corpus[d].id, d).second) {
        throw Error(ErrorKind::argument, "duplicate document id '" + corpus[d].id + "'");
      }
      idx.ids_.push_back(corpus[d].id);
      auto tokens = tokenize(corpus[d].text);
      idx.lengths_.push_back(static_cast<double>(tokens.size()));
      total_len += static_cast<double>(tokens.size());
      auto& tf = idx.term_freqs_[d];
      for (auto& tok : tokens) {
        auto [it, inserted] = idx.vocab_.try_emplace(std::move(tok), idx.vocab_.size());
        if (inserted) idx.postings_.emplace_back();
        ++tf[it->second];
      }
      for (auto [term, count] : tf) idx.postings_[term].push_back({d, count});
    }
    idx.avgdl_ = total_len / static_cast<double>(corpus.size());

    const double n_docs = static_cast<double>(corpus.size());
    idx.raw_idf_.resize(idx.postings_.size());
    double positive_sum = 0.0;
    std::size_t positive_count = 0;
    for (std::size_t t = 0; t < idx.postings_.size(); ++t) {
      const double df = static_cast<double>(idx.postings_[t].size());
      idx.raw_idf_[t] = std::log((n_docs - df + 0.5) / (df + 0.5));
      if (idx.raw_idf_[t] > 0.0) {
        positive_sum += idx.raw_idf_[t];
        ++positive_count;
      }
    }
    idx.idf_floor_ =
        positive_count == 0 ? 0.0 : params.epsilon * positive_sum / static_cast<double>(positive_count);
    idx.idf_ = idx.raw_idf_;
    for (auto& v : idx.idf_) {
      if (v <= 0.0) v = idx.idf_floor_;
    }
    return idx;
  }

  std::size_t doc_count() const noexcept { return ids_.size(); }
  std::size_t vocabulary_size() const noexcept { return vocab_.size(); }
  double average_length() const noexcept { return avgdl_; }
  double idf_floor() const noexcept { return idf_floor_; }
  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<std::string>& doc_ids() const noexcept { return ids_; }

  double doc_length(std::string_view doc_id) const { return lengths_[position_of(doc_id)]; }

  std::size_t document_frequency(const std::string& term) const {
    auto it = vocab_.find(term);
    return it == vocab_.end() ? 0 : postings_[it->second].size();
  }

  std::size_t term_frequency(const std::string& term, std::string_view doc_id) const {
    auto it = vocab_.find(term);
    if (it == vocab_.end()) return 0;
    const auto& tf = term_freqs_[position_of(doc_id)];
    auto f = tf.find(it->second);
    return f == tf.end() ? 0 : f->second;
  }

  // ln((N - n + 0.5) / (n + 0.5)) before flooring; 0 for unknown terms.
  double raw_idf(const std::string& term) const {
    auto it = vocab_.find(term);
    return it == vocab_.end() ? 0.0 : raw_idf_[it->second];
  }

  // IDF after the epsilon floor is applied to non-positive values.
  double idf(const std::string& term) const {
    auto it = vocab_.find(term);
    return it == vocab_.end() ? 0.0 : idf_[it->second];
  }

  std::size_t position_of(std::string_view doc_id) const {
    auto it = positions_.find(std::string(doc_id));
    if (it == positions_.end()) {
      throw Error(ErrorKind::lookup, "document '" + std::string(doc_id) + "' is not indexed");
    }
    return it->second;
  }

  double score(std::string_view query, std::string_view doc_id) const {
    const std::size_t d = position_of(doc_id);
    const auto& tf = term_freqs_[d];
    double total = 0.0;
    for (const auto& tok : tokenize(query)) {
      auto it = vocab_.find(tok);
      if (it == vocab_.end()) continue;
      auto f = tf.find(it->second);
      if (f == tf.end()) continue;
      total += term_weight(it->second, f->second, lengths_[d]);
    }
    return total;
  }

  // Exactly k documents by descending score; equal scores keep corpus order.
  std::vector<ScoredDoc> top_k(std::string_view query, const RetrievalConfig& config) const {
    if (config.k < 1 || config.k > doc_count()) {
      throw Error(ErrorKind::argument, "k = " + std::to_string(config.k) +
                                           " outside [1, " + std::to_string(doc_count()) + "]");
    }
    std::vector<double> scores(doc_count(), 0.0);
    for (const auto& tok : tokenize(query)) {
      auto it = vocab_.find(tok);
      if (it == vocab_.end()) continue;
      for (auto [d, count] : postings_[it->second]) {
        scores[d] += term_weight(it->second, count, lengths_[d]);
      }
    }
    std::vector<std::size_t> order(doc_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.k),
                      order.end(), [&](std::size_t x, std::size_t y) {
                        if (scores[x] != scores[y]) return scores[x] > scores[y];
                        return x < y;
                      });
    std::vector<ScoredDoc> out;
    out.reserve(config.k);
    for (std::size_t i = 0; i < config.k; ++i) {
      out.push_back({ids_[order[i]], order[i], scores[order[i]]});
    }
    return out;
  }

  // Corpus statistics for debugging; terms sorted.
  nlohmann::ordered_json stats_json() const {
    std::vector<std::pair<std::string, std::size_t>> terms(vocab_.begin(), vocab_.end());
    std::sort(terms.begin(), terms.end());
    nlohmann::ordered_json term_stats = nlohmann::ordered_json::object();
    for (const auto& [term, t] : terms) {
      term_stats[term] = {{"df", postings_[t].size()}, {"raw_idf", raw_idf_[t]}, {"idf", idf_[t]}};
    }
    return {{"k1", params_.k1},
            {"b", params_.b},
            {"epsilon", params_.epsilon},
            {"doc_count", doc_count()},
            {"avgdl", avgdl_},
            {"idf_floor", idf_floor_},
            {"terms", std::move(term_stats)}};
  }

 private:
  struct Posting {
    std::size_t doc;
    std::uint32_t count;
  };

  double term_weight(std::size_t term, std::uint32_t count, double doc_len) const {
    const double f = static_cast<double>(count);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_len / avgdl_);
    return idf_[term] * f * (params_.k1 + 1.0) / (f + norm);
  }

  Bm25Params params_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> positions_;
  std::vector<double> lengths_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::size_t> vocab_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::unordered_map<std::size_t, std::uint32_t>> term_freqs_;
  std::vector<double> raw_idf_;
  std::vector<double> idf_;
  double idf_floor_ = 0.0;
};

}  // namespace emo
