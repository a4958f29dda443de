#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoharness/corpus.hpp"
#include "emoharness/emotion.hpp"
#include "emoharness/error.hpp"
#include "emoharness/inference.hpp"

namespace emo {

struct LabelVector {
  std::string snippet_id;
  LabelMap values;
  Track track = Track::A;

  bool operator==(const LabelVector&) const = default;

  nlohmann::ordered_json to_json(const EmotionSet& emotions) const {
    nlohmann::ordered_json v = nlohmann::ordered_json::object();
    for (Emotion e : emotions) v[std::string(to_string(e))] = values.at(e);
    return {{"snippet_id", snippet_id}, {"track", to_string(track)}, {"values", std::move(v)}};
  }
};

inline std::vector<LabelVector> gold_vectors(std::span<const Snippet> snippets, Track track) {
  std::vector<LabelVector> out;
  out.reserve(snippets.size());
  for (const auto& s : snippets) out.push_back({s.id, s.labels, track});
  return out;
}

// Regroups per-emotion predictions into one vector per snippet, in order of
// each snippet's first record. Parse failures are already label 0.
inline std::vector<LabelVector> aggregate(std::span<const PredictionRecord> records,
                                          const EmotionSet& emotions) {
  std::vector<LabelVector> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    if (!emotions.contains(r.key.emotion)) {
      throw Error(ErrorKind::validation, "record for '" + r.key.snippet_id +
                                             "' names emotion '" +
                                             std::string(to_string(r.key.emotion)) +
                                             "' outside the active set");
    }
    auto [it, inserted] = index.try_emplace(r.key.snippet_id, out.size());
    if (inserted) out.push_back({r.key.snippet_id, {}, r.track});
    auto& vec = out[it->second];
    if (vec.track != r.track) {
      throw Error(ErrorKind::validation, "snippet '" + r.key.snippet_id + "' mixes tracks");
    }
    if (!vec.values.emplace(r.key.emotion, r.label()).second) {
      throw Error(ErrorKind::completeness, "snippet '" + r.key.snippet_id +
                                               "' has more than one record for '" +
                                               std::string(to_string(r.key.emotion)) + "'");
    }
  }

  std::string gaps;
  for (const auto& v : out) {
    for (Emotion e : emotions) {
      if (!v.values.contains(e)) {
        if (!gaps.empty()) gaps += ", ";
        gaps += v.snippet_id + "/" + std::string(to_string(e));
      }
    }
  }
  if (!gaps.empty()) throw Error(ErrorKind::completeness, "missing predictions: " + gaps);
  return out;
}

// Intensity 1..3 becomes presence 1; 0 stays 0.
inline LabelVector marginalise(const LabelVector& intensity) {
  LabelVector out{intensity.snippet_id, {}, Track::A};
  for (auto [e, v] : intensity.values) out.values[e] = v >= 1 ? 1 : 0;
  return out;
}

inline std::vector<LabelVector> marginalise(std::span<const LabelVector> intensity) {
  std::vector<LabelVector> out;
  out.reserve(intensity.size());
  for (const auto& v : intensity) out.push_back(marginalise(v));
  return out;
}

enum class MetricKind { macro_f1, mean_pearson_r };

inline std::string_view to_string(MetricKind k) {
  return k == MetricKind::macro_f1 ? "macro_f1" : "mean_pearson_r";
}

struct MetricsReport {
  MetricKind kind = MetricKind::macro_f1;
  std::vector<std::pair<Emotion, double>> per_emotion;
  double average = 0.0;
  std::size_t snippets = 0;
  std::size_t instances = 0;
  std::size_t parse_failures = 0;
  std::vector<Emotion> degenerate;

  double at(Emotion e) const {
    for (auto [em, v] : per_emotion) {
      if (em == e) return v;
    }
    throw Error(ErrorKind::lookup, "no score for '" + std::string(to_string(e)) + "'");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (auto [e, v] : per_emotion) scores[std::string(to_string(e))] = v;
    std::vector<std::string> flagged;
    for (Emotion e : degenerate) flagged.emplace_back(to_string(e));
    return {{"metric", to_string(kind)},
            {"per_emotion", std::move(scores)},
            {"average", average},
            {"counts",
             {{"snippets", snippets},
              {"instances", instances},
              {"parse_failures", parse_failures},
              {"degenerate_emotions", flagged}}},
            {"conventions",
             kind == MetricKind::macro_f1
                 ? "F1 = 2TP/(2TP+FP+FN); 0 when the denominator is 0"
                 : "r = 0 when either side has zero variance (emotion flagged as degenerate)"}};
  }

  std::string to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(12) << "emotion" << std::right << std::setw(10)
       << (kind == MetricKind::macro_f1 ? "F1" : "r") << "\n";
    os << std::fixed << std::setprecision(4);
    for (auto [e, v] : per_emotion) {
      const bool flag = std::find(degenerate.begin(), degenerate.end(), e) != degenerate.end();
      os << std::left << std::setw(12) << to_string(e) << std::right << std::setw(10) << v
         << (flag ? "  (zero variance)" : "") << "\n";
    }
    os << std::left << std::setw(12) << "average" << std::right << std::setw(10) << average
       << "\n";
    os << "snippets " << snippets << ", instances " << instances << ", parse failures "
       << parse_failures << "\n";
    return os.str();
  }
};

namespace detail {

// Pairs gold and predicted vectors by snippet id; both sides must carry
// exactly the same ids.
inline std::vector<std::pair<const LabelVector*, const LabelVector*>> align(
    std::span<const LabelVector> gold, std::span<const LabelVector> pred,
    const EmotionSet& emotions, Track track) {
  std::map<std::string, const LabelVector*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.snippet_id, &p).second) {
      throw Error(ErrorKind::alignment, "duplicate predicted snippet '" + p.snippet_id + "'");
    }
  }
  std::set<std::string> gold_ids;
  std::vector<std::pair<const LabelVector*, const LabelVector*>> pairs;
  pairs.reserve(gold.size());
  for (const auto& g : gold) {
    if (!gold_ids.insert(g.snippet_id).second) {
      throw Error(ErrorKind::alignment, "duplicate gold snippet '" + g.snippet_id + "'");
    }
    auto it = by_id.find(g.snippet_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::alignment, "no prediction for gold snippet '" + g.snippet_id + "'");
    }
    pairs.emplace_back(&g, it->second);
  }
  if (pred.size() != gold.size()) {
    for (const auto& p : pred) {
      if (!gold_ids.contains(p.snippet_id)) {
        throw Error(ErrorKind::alignment, "prediction for unknown snippet '" + p.snippet_id + "'");
      }
    }
  }
  for (auto [g, p] : pairs) {
    for (const LabelVector* v : {g, p}) {
      if (v->track != track) {
        throw Error(ErrorKind::argument, "snippet '" + v->snippet_id + "' is a Track " +
                                             std::string(to_string(v->track)) +
                                             " vector; metric needs Track " +
                                             std::string(to_string(track)));
      }
      for (Emotion e : emotions) {
        if (!v->values.contains(e)) {
          throw Error(ErrorKind::alignment, "snippet '" + v->snippet_id + "' lacks '" +
                                                std::string(to_string(e)) + "'");
        }
      }
    }
  }
  return pairs;
}

}  // namespace detail

// Unweighted mean of per-emotion binary F1 (positive class = 1).
inline MetricsReport macro_f1(std::span<const LabelVector> gold, std::span<const LabelVector> pred,
                              const EmotionSet& emotions) {
  const auto pairs = detail::align(gold, pred, emotions, Track::A);
  MetricsReport report;
  report.kind = MetricKind::macro_f1;
  report.snippets = pairs.size();
  report.instances = pairs.size() * emotions.size();
  double sum = 0.0;
  for (Emotion e : emotions) {
    long tp = 0, fp = 0, fn = 0;
    for (auto [g, p] : pairs) {
      const bool gv = g->values.at(e) == 1;
      const bool pv = p->values.at(e) == 1;
      tp += gv && pv;
      fp += !gv && pv;
      fn += gv && !pv;
    }
    const long denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    report.per_emotion.emplace_back(e, f1);
    sum += f1;
  }
  report.average = sum / static_cast<double>(emotions.size());
  return report;
}

// Unweighted mean of per-emotion Pearson r between gold and predicted
// intensities. Zero variance on either side gives r = 0 and flags the emotion.
inline MetricsReport mean_pearson_r(std::span<const LabelVector> gold,
                                    std::span<const LabelVector> pred,
                                    const EmotionSet& emotions) {
  if (gold.size() < 2) {
    throw Error(ErrorKind::argument, "Pearson r needs at least 2 snippets, got " +
                                         std::to_string(gold.size()));
  }
  const auto pairs = detail::align(gold, pred, emotions, Track::B);
  MetricsReport report;
  report.kind = MetricKind::mean_pearson_r;
  report.snippets = pairs.size();
  report.instances = pairs.size() * emotions.size();
  const double n = static_cast<double>(pairs.size());
  double sum = 0.0;
  for (Emotion e : emotions) {
    double mean_g = 0.0, mean_p = 0.0;
    for (auto [g, p] : pairs) {
      mean_g += g->values.at(e);
      mean_p += p->values.at(e);
    }
    mean_g /= n;
    mean_p /= n;
    double cov = 0.0, var_g = 0.0, var_p = 0.0;
    for (auto [g, p] : pairs) {
      const double dg = g->values.at(e) - mean_g;
      const double dp = p->values.at(e) - mean_p;
      cov += dg * dp;
      var_g += dg * dg;
      var_p += dp * dp;
    }
    double r = 0.0;
    if (var_g == 0.0 || var_p == 0.0) {
      report.degenerate.push_back(e);
    } else {
      r = std::clamp(cov / std::sqrt(var_g * var_p), -1.0, 1.0);
    }
    report.per_emotion.emplace_back(e, r);
    sum += r;
  }
  report.average = sum / static_cast<double>(emotions.size());
  return report;
}

}  // namespace emo
