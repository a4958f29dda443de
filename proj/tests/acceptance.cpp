// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emoharness/runner.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace emo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond && failures_++ < 5) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(const std::string& ok_detail) const {
    if (failures_ == 0) return {true, ok_detail};
    return {false, std::to_string(failures_) + " failure(s): " + messages_};
  }

 private:
  std::size_t failures_ = 0;
  std::string messages_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_seconds(double s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << s << " s";
  return os.str();
}

std::vector<LabelVector> random_vectors(std::mt19937_64& rng, std::size_t n, const EmotionSet& set,
                                        Track track) {
  std::uniform_int_distribution<int> label(0, max_label(track));
  std::vector<LabelVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabelVector v{"s" + std::to_string(i), {}, track};
    for (auto e : set) v.values[e] = label(rng);
    out.push_back(std::move(v));
  }
  return out;
}

// --- criteria ---------------------------------------------------------------

Outcome metric_oracle_equivalence() {
  const auto t0 = Clock::now();
  const auto six = EmotionSet::all("deu");
  std::mt19937_64 rng(1001);
  Check c;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    auto ga = random_vectors(rng, 50, six, Track::A);
    auto pa = random_vectors(rng, 50, six, Track::A);
    auto f1 = macro_f1(ga, pa, six);
    for (auto e : six) {
      double d = std::abs(f1.at(e) - oracle::binary_f1(oracle::column(ga, e), oracle::column(pa, e)));
      worst = std::max(worst, d);
      c.expect(d <= 1e-9, "F1 mismatch fixture " + std::to_string(i));
    }
    worst = std::max(worst, std::abs(f1.average - oracle::macro_f1(ga, pa, six)));
    c.expect(std::abs(f1.average - oracle::macro_f1(ga, pa, six)) <= 1e-9, "macro F1 mismatch");

    auto gb = random_vectors(rng, 50, six, Track::B);
    auto pb = random_vectors(rng, 50, six, Track::B);
    auto r = mean_pearson_r(gb, pb, six);
    for (auto e : six) {
      double d = std::abs(r.at(e) - oracle::pearson(oracle::column(gb, e), oracle::column(pb, e)));
      worst = std::max(worst, d);
      c.expect(d <= 1e-9, "r mismatch fixture " + std::to_string(i));
    }
    c.expect(std::abs(r.average - oracle::mean_pearson(gb, pb, six)) <= 1e-9, "mean r mismatch");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + fmt_seconds(secs) + " >= 10 s");
  std::ostringstream os;
  os << "1000 fixtures x 2 metrics, max |diff| " << worst << ", " << fmt_seconds(secs);
  return c.outcome(os.str());
}

Outcome bm25_oracle_equivalence() {
  std::mt19937_64 rng(2002);
  std::vector<std::string> vocab;
  for (int i = 0; i < 60; ++i) vocab.push_back("t" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
  std::uniform_int_distribution<int> n_docs(5, 200), n_tok(0, 30), q_len(1, 6);
  const Bm25Params params;  // k1 = 1.5, b = 0.75
  Check c;
  double worst = 0;
  std::size_t rankings = 0;
  for (int corpus = 0; corpus < 100; ++corpus) {
    std::vector<Document> docs;
    std::vector<std::vector<std::string>> tokens;
    for (int d = n_docs(rng); d > 0; --d) {
      std::vector<std::string> toks;
      std::string text;
      for (int t = n_tok(rng); t > 0; --t) {
        toks.push_back(vocab[word(rng)]);
        text += toks.back() + " ";
      }
      docs.push_back({"d" + std::to_string(docs.size()), text});
      tokens.push_back(std::move(toks));
    }
    auto index = Bm25Index::build(docs, params);
    oracle::Bm25Reference ref(tokens, params);
    for (int q = 0; q < 3; ++q) {
      std::vector<std::string> query;
      std::string qtext;
      for (int t = q_len(rng); t > 0; --t) {
        query.push_back(vocab[word(rng)]);
        qtext += query.back() + " ";
      }
      std::vector<double> ref_scores(docs.size()), lib_scores(docs.size());
      for (std::size_t d = 0; d < docs.size(); ++d) {
        ref_scores[d] = ref.score(query, d);
        lib_scores[d] = index.score(qtext, docs[d].id);
        const double diff = std::abs(lib_scores[d] - ref_scores[d]);
        worst = std::max(worst, diff);
        c.expect(diff <= 1e-9, "score mismatch corpus " + std::to_string(corpus));
      }
      // Exact order: full stable sort of every document's score (ties by
      // corpus position). Mathematically tied documents can differ in the
      // last ulp between summation orders, so the comparison against the
      // closed-form ranking is by score value.
      auto full_sort = [&](const std::vector<double>& scores) {
        std::vector<std::size_t> order(docs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        return order;
      };
      const auto lib_order = full_sort(lib_scores);
      const auto ref_order = full_sort(ref_scores);
      for (std::size_t k : {1u, 3u, 5u}) {
        auto hits = index.top_k(qtext, {k});
        ++rankings;
        c.expect(hits.size() == k, "top_k size");
        for (std::size_t i = 0; i < k && i < hits.size(); ++i) {
          const auto tag = " corpus " + std::to_string(corpus) + " k=" + std::to_string(k);
          c.expect(hits[i].position == lib_order[i], "ranking mismatch" + tag);
          c.expect(hits[i].score == lib_scores[hits[i].position], "top_k score differs from score()" + tag);
          c.expect(std::abs(ref_scores[hits[i].position] - ref_scores[ref_order[i]]) <= 1e-9,
                   "closed-form ranking mismatch" + tag);
        }
      }
    }
  }
  std::ostringstream os;
  os << "100 corpora, " << rankings << " rankings, max |score diff| " << worst;
  return c.outcome(os.str());
}

Outcome marginalisation_law() {
  const auto t0 = Clock::now();
  const auto six = EmotionSet::all("deu");
  Check c;
  std::size_t vectors = 0;
  for (int code = 0; code < 4096; ++code) {
    LabelVector v{"s", {}, Track::B};
    int x = code;
    for (auto e : six) {
      v.values[e] = x % 4;
      x /= 4;
    }
    ++vectors;
    const auto m = marginalise(v);
    for (auto e : six) c.expect(m.values.at(e) == (v.values.at(e) >= 1 ? 1 : 0), "bit rule");
    c.expect(marginalise(m) == m, "idempotence");
    for (auto e : six) {
      if (v.values.at(e) == 3) continue;
      auto raised = v;
      ++raised.values[e];
      const auto mr = marginalise(raised);
      for (auto f : six) c.expect(mr.values.at(f) >= m.values.at(f), "monotonicity");
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 1.0, "runtime " + fmt_seconds(secs) + " >= 1 s");
  return c.outcome(std::to_string(vectors) + " vectors exhaustive, " + fmt_seconds(secs));
}

Outcome explosion_round_trip() {
  std::mt19937_64 rng(4004);
  Check c;
  std::size_t total_instances = 0;
  const EmotionSet sets[] = {EmotionSet::all("deu"), EmotionSet::for_language("eng"),
                             EmotionSet::for_language("afr")};
  for (int batch = 0; batch < 10; ++batch) {
    const auto& set = sets[batch % 3];
    const Track track = batch % 2 ? Track::B : Track::A;
    auto snippets = fixtures::make_snippets(50, set, track, rng(), "b" + std::to_string(batch) + "_");
    auto instances = explode(snippets, set, track);
    total_instances += instances.size();
    c.expect(instances.size() == snippets.size() * set.size(), "instance count");
    std::vector<PredictionRecord> records;
    for (const auto& i : instances) records.push_back({{i.snippet_id, i.emotion}, track, i.gold, "", 1});
    auto vectors = aggregate(records, set);
    c.expect(vectors.size() == snippets.size(), "vector count");
    for (std::size_t i = 0; i < snippets.size() && i < vectors.size(); ++i) {
      c.expect(vectors[i].values == snippets[i].labels, "labels differ for " + snippets[i].id);
    }
  }
  return c.outcome("500 snippets, " + std::to_string(total_instances) + " instances");
}

Outcome prompt_fidelity() {
  struct Case {
    const char* file;
    TemplateId id;
    const char* lang;
    const char* text;
    Emotion emotion;
  };
  const Case cases[] = {
      {"eng_track_a.txt", TemplateId::track_a, "eng", "I won the lottery today!", Emotion::joy},
      {"deu_track_a.txt", TemplateId::track_a, "deu", "Ich bin so wütend auf dich", Emotion::anger},
      {"chn_track_a.txt", TemplateId::track_a, "chn", "今天真开心！", Emotion::joy},
      {"eng_track_b.txt", TemplateId::track_b, "eng", "I won the lottery today!", Emotion::joy},
      {"deu_track_b.txt", TemplateId::track_b, "deu", "Ich bin so wütend auf dich.", Emotion::anger},
      {"chn_track_b.txt", TemplateId::track_b, "chn", "今天真开心！", Emotion::joy},
  };
  Check c;
  for (const auto& k : cases) {
    const auto golden = detail::read_file(std::string(EMO_FIXTURE_DIR) + "/prompts/" + k.file);
    const auto rendered = render_zero_shot(k.id, k.text, require_language_name(k.lang), k.emotion,
                                           EmotionSet::all(k.lang));
    c.expect(rendered == golden, std::string(k.file) + " differs");
  }
  return c.outcome("6 golden files byte-identical");
}

Outcome oversampling_balance() {
  std::mt19937_64 rng(6006);
  Check c;
  std::size_t added = 0;
  std::uniform_int_distribution<int> size(10, 80);
  std::uniform_real_distribution<double> rate(0.05, 0.45);
  for (int ds = 0; ds < 100; ++ds) {
    std::vector<TaskInstance> instances;
    std::map<Emotion, double> p;
    for (auto e : kAllEmotions) p[e] = rate(rng);
    const int n = size(rng);
    for (int s = 0; s < n; ++s) {
      for (auto e : kAllEmotions) {
        std::bernoulli_distribution pos(p[e]);
        instances.push_back({"s" + std::to_string(s), "t", "deu", e, pos(rng) ? 1 : 0, Track::A});
      }
    }
    const std::uint64_t seed = rng();
    auto a = oversample(instances, seed);
    auto b = oversample(instances, seed);
    c.expect(a.instances == b.instances, "seed determinism");
    added += a.instances.size() - instances.size();

    std::map<Emotion, std::pair<long, long>> before, after;
    for (const auto& i : instances) (i.gold ? before[i.emotion].first : before[i.emotion].second)++;
    for (const auto& i : a.instances) (i.gold ? after[i.emotion].first : after[i.emotion].second)++;
    for (auto e : kAllEmotions) {
      if (before[e].first > 0 && before[e].second > 0) {
        c.expect(after[e].first == after[e].second, "unbalanced emotion in dataset " + std::to_string(ds));
      } else {
        c.expect(after[e] == before[e], "single-class group changed");
      }
    }
    auto key = [](const TaskInstance& i) {
      return i.snippet_id + "/" + std::string(to_string(i.emotion)) + "/" + std::to_string(i.gold);
    };
    std::multiset<std::string> in, out;
    for (const auto& i : instances) in.insert(key(i));
    for (const auto& i : a.instances) out.insert(key(i));
    c.expect(std::includes(out.begin(), out.end(), in.begin(), in.end()), "originals lost");
  }
  return c.outcome("100 datasets, " + std::to_string(added) + " duplicates added");
}

// Shared fixture for the end-to-end criteria: 50 English dev snippets with
// intensity gold and presence gold, plus 100 training snippets.
struct EndToEndFixture {
  fixtures::TempDir dir{"emoharness-acceptance"};
  EmotionSet eng = EmotionSet::for_language("eng");
  std::vector<Snippet> dev_b, dev_a;

  EndToEndFixture() {
    dev_b = fixtures::make_snippets(50, eng, Track::B, 777, "dev_");
    dev_a = fixtures::presence_of(dev_b);
    // Presence gold is not exactly the marginalised intensity gold.
    for (std::size_t i = 0; i < dev_a.size(); i += 7) dev_a[i].labels[Emotion::fear] ^= 1;
    fixtures::write_dataset(dir / "dev_a.csv", dev_a, eng);
    fixtures::write_dataset(dir / "dev_b.csv", dev_b, eng);
    fixtures::write_dataset(dir / "train_a.csv", fixtures::make_snippets(100, eng, Track::A, 778, "tr_"), eng);
  }

  ExperimentConfig config(const std::string& out, const std::string& track, const std::string& strategy,
                          nlohmann::json mock, const std::string& dev) {
    nlohmann::json j = {{"track", track},
                        {"language", "eng"},
                        {"strategy", strategy},
                        {"seed", 2025},
                        {"output_dir", out},
                        {"dataset", {{"dev", dev}, {"train", "train_a.csv"}}},
                        {"retrieval", {{"k", 1}}},
                        {"mock", mock}};
    return validate_config(j.dump(), dir.path());
  }

  std::vector<ExperimentConfig> four_strategies(const std::string& suffix) {
    return {config("zs_a" + suffix, "A", "zero_shot", "keyword", "dev_a.csv"),
            config("fs_a" + suffix, "A", "few_shot", "keyword", "dev_a.csv"),
            config("zs_b" + suffix, "B", "zero_shot", "keyword", "dev_b.csv"),
            config("mb_a" + suffix, "A", "marginalise_from_b", "keyword", "dev_a.csv")};
  }
};

Outcome end_to_end_determinism(EndToEndFixture& fx) {
  const auto t0 = Clock::now();
  Check c;
  auto first = fx.four_strategies("_1");
  auto second = fx.four_strategies("_2");
  std::size_t files = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    auto m1 = run(first[i]);
    auto m2 = run(second[i]);
    const auto name = std::string(to_string(first[i].strategy)) + "/" + std::string(to_string(first[i].track));
    c.expect(!m1.artifacts.empty(), name + " produced no artifacts");
    c.expect(m1.artifacts == m2.artifacts, name + " artifact hashes differ");
    c.expect(m1.counts == m2.counts, name + " counts differ");
    c.expect(m1.counts.instances == 50 * fx.eng.size(), name + " prediction count");
    files += m1.artifacts.size();
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime " + fmt_seconds(secs) + " >= 60 s");
  return c.outcome("4 strategies x 2 runs, " + std::to_string(files) + " hashed files identical, " +
                   fmt_seconds(secs));
}

Outcome marginalisation_consistency(EndToEndFixture& fx) {
  Check c;
  auto cfg = fx.config("mb_gold", "A", "marginalise_from_b", {{"id", "gold"}, {"gold", "dev_b.csv"}},
                       "dev_a.csv");
  auto m = run(cfg);
  auto expected = macro_f1(gold_vectors(fx.dev_a, Track::A), marginalise(gold_vectors(fx.dev_b, Track::B)), fx.eng);
  c.expect(m.metrics.has_value(), "no metrics");
  if (m.metrics) {
    c.expect(m.metrics->average == expected.average, "average differs");
    for (auto e : fx.eng) c.expect(m.metrics->at(e) == expected.at(e), "per-emotion F1 differs");
  }
  std::ostringstream os;
  os.precision(17);
  os << "macro F1 " << (m.metrics ? m.metrics->average : -1) << " == oracle " << expected.average;
  return c.outcome(os.str());
}

Outcome suite_runtime(double acceptance_seconds) {
  const auto t0 = Clock::now();
  const std::string cmd = std::string(EMO_UNIT_TESTS_PATH) + " --gtest_brief=1 > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const double unit_secs = seconds_since(t0);
  const double total = unit_secs + acceptance_seconds;
  Check c;
  c.expect(status == 0, "unit suite failed");
  c.expect(total < 120.0, "total " + fmt_seconds(total) + " >= 120 s");
  return c.outcome("unit suite " + fmt_seconds(unit_secs) + " + acceptance " +
                   fmt_seconds(acceptance_seconds) + " = " + fmt_seconds(total) + " (mock endpoints only)");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  int failed = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << " -- " << o.detail << std::endl;
  };

  report("metric oracle equivalence", metric_oracle_equivalence);
  report("bm25 oracle equivalence", bm25_oracle_equivalence);
  report("marginalisation law", marginalisation_law);
  report("explosion/aggregation round trip", explosion_round_trip);
  report("prompt fidelity", prompt_fidelity);
  report("oversampling balance", oversampling_balance);
  {
    EndToEndFixture fx;
    report("end-to-end determinism", [&] { return end_to_end_determinism(fx); });
    report("marginalisation consistency", [&] { return marginalisation_consistency(fx); });
  }
  const double own = seconds_since(t0);
  report("full suite under 2 minutes", [&] { return suite_runtime(own); });

  std::cout << (failed ? "ACCEPTANCE FAILED: " + std::to_string(failed) + " criterion(s)"
                       : std::string("ACCEPTANCE PASSED: all 9 criteria"))
            << std::endl;
  return failed;
}
