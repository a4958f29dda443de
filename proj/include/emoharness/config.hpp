#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emoharness/corpus.hpp"
#include "emoharness/detail/csv.hpp"
#include "emoharness/emotion.hpp"
#include "emoharness/error.hpp"
#include "emoharness/inference.hpp"
#include "emoharness/prompting.hpp"
#include "emoharness/retrieval.hpp"

namespace emo {

enum class Strategy { zero_shot, few_shot, marginalise_from_b, export_sft, export_ebridge };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::zero_shot: return "zero_shot";
    case Strategy::few_shot: return "few_shot";
    case Strategy::marginalise_from_b: return "marginalise_from_b";
    case Strategy::export_sft: return "export_sft";
    case Strategy::export_ebridge: return "export_ebridge";
  }
  return "?";
}

inline std::optional<Strategy> try_parse_strategy(std::string_view s) {
  for (auto v : {Strategy::zero_shot, Strategy::few_shot, Strategy::marginalise_from_b,
                 Strategy::export_sft, Strategy::export_ebridge}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline bool needs_inference(Strategy s) {
  return s == Strategy::zero_shot || s == Strategy::few_shot || s == Strategy::marginalise_from_b;
}

struct DatasetPaths {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> dev;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> english_train;
};

struct MockSpec {
  MockKind kind = MockKind::always_0;
  std::optional<std::filesystem::path> gold;
};

// One (track, language, strategy) experiment.
struct ExperimentConfig {
  Track track = Track::A;
  std::string language;
  std::string language_name;
  Strategy strategy = Strategy::zero_shot;
  DatasetPaths dataset;
  std::string eval_split;  // "dev" or "test"
  ColumnSchema schema;
  EmotionSet emotions = EmotionSet::all("und");
  Bm25Params bm25;
  RetrievalConfig retrieval;
  std::optional<EndpointConfig> endpoint;
  std::optional<MockSpec> mock;
  bool oversample = true;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  const std::filesystem::path& eval_path() const {
    return eval_split == "dev" ? *dataset.dev : *dataset.test;
  }

  // Track of the prompts sent to the model (and of the parsed answers).
  Track prompt_track() const {
    return strategy == Strategy::marginalise_from_b ? Track::B : track;
  }

  // Fully-resolved config: defaults filled in, paths absolute. Feeding it back
  // through validate_config yields an equal config.
  nlohmann::ordered_json snapshot() const {
    auto path_or_null = [](const std::optional<std::filesystem::path>& p) {
      return p ? nlohmann::ordered_json(p->string()) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json emotion_cols = nlohmann::ordered_json::object();
    std::vector<std::string> emotion_names;
    for (Emotion e : emotions) {
      emotion_cols[std::string(to_string(e))] = schema.column_for(e);
      emotion_names.emplace_back(to_string(e));
    }
    nlohmann::ordered_json schema_json = {{"id", schema.id}, {"text", schema.text}};
    schema_json["language"] = schema.language ? nlohmann::ordered_json(*schema.language)
                                              : nlohmann::ordered_json(nullptr);
    schema_json["emotions"] = emotion_cols;

    nlohmann::ordered_json j = {
        {"track", to_string(track)},
        {"language", language},
        {"language_name", language_name},
        {"strategy", to_string(strategy)},
        {"seed", seed},
        {"output_dir", output_dir.string()},
        {"dataset",
         {{"train", path_or_null(dataset.train)},
          {"dev", path_or_null(dataset.dev)},
          {"test", path_or_null(dataset.test)},
          {"english_train", path_or_null(dataset.english_train)}}},
        {"eval_split", eval_split},
        {"schema", schema_json},
        {"emotions", emotion_names},
        {"bm25", {{"k1", bm25.k1}, {"b", bm25.b}, {"epsilon", bm25.epsilon}}},
        {"retrieval", {{"k", retrieval.k}}},
        {"oversample", oversample}};
    if (endpoint) j["endpoint"] = endpoint->to_json();
    if (mock) {
      j["mock"] = {{"id", to_string(mock->kind)}, {"gold", path_or_null(mock->gold)}};
    }
    return j;
  }
};

namespace detail {

// Collects every violation with its field path before failing.
class ConfigReader {
 public:
  explicit ConfigReader(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}

  void fail(const std::string& path, const std::string& message) {
    errors_.push_back(path + ": " + message);
  }

  bool object(const nlohmann::json& j, const std::string& path,
              std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      fail(path.empty() ? "<root>" : path, "expected an object");
      return false;
    }
    for (const auto& [key, _] : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(join(path, key), "unknown key");
      }
    }
    return true;
  }

  std::optional<std::string> string(const nlohmann::json& j, const std::string& path,
                                    std::string_view key, bool required = false) {
    auto full = join(path, key);
    if (!j.contains(key) || j[std::string(key)].is_null()) {
      if (required) fail(full, "required");
      return std::nullopt;
    }
    const auto& v = j[std::string(key)];
    if (!v.is_string()) {
      fail(full, "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<double> number(const nlohmann::json& j, const std::string& path,
                               std::string_view key) {
    if (!j.contains(key) || j[std::string(key)].is_null()) return std::nullopt;
    const auto& v = j[std::string(key)];
    if (!v.is_number()) {
      fail(join(path, key), "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::int64_t> integer(const nlohmann::json& j, const std::string& path,
                                      std::string_view key, bool required = false) {
    auto full = join(path, key);
    if (!j.contains(key) || j[std::string(key)].is_null()) {
      if (required) fail(full, "required");
      return std::nullopt;
    }
    const auto& v = j[std::string(key)];
    if (!v.is_number_integer()) {
      fail(full, "expected an integer");
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  std::optional<bool> boolean(const nlohmann::json& j, const std::string& path,
                              std::string_view key) {
    if (!j.contains(key) || j[std::string(key)].is_null()) return std::nullopt;
    const auto& v = j[std::string(key)];
    if (!v.is_boolean()) {
      fail(join(path, key), "expected a boolean");
      return std::nullopt;
    }
    return v.get<bool>();
  }

  std::optional<std::filesystem::path> path(const nlohmann::json& j, const std::string& at,
                                            std::string_view key) {
    auto s = string(j, at, key);
    if (!s) return std::nullopt;
    std::filesystem::path p(*s);
    if (p.is_relative()) p = base_ / p;
    return std::filesystem::absolute(p).lexically_normal();
  }

  void raise_if_failed() const {
    if (errors_.empty()) return;
    std::string msg = "invalid experiment config:";
    for (const auto& e : errors_) msg += "\n  " + e;
    throw Error(ErrorKind::config, msg);
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

 private:
  std::filesystem::path base_;
  std::vector<std::string> errors_;
};

}  // namespace detail

// Parses and checks a JSON experiment config. Relative paths resolve against
// `base_dir`. Unknown keys are rejected.
inline ExperimentConfig validate_config(std::string_view raw,
                                        const std::filesystem::path& base_dir = ".") {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }

  detail::ConfigReader rd(base_dir);
  if (!rd.object(root, "",
                 {"track", "language", "language_name", "strategy", "seed", "output_dir",
                  "dataset", "eval_split", "schema", "emotions", "bm25", "retrieval", "endpoint",
                  "mock", "oversample"})) {
    rd.raise_if_failed();
  }

  ExperimentConfig cfg;
  if (auto t = rd.string(root, "", "track", true)) {
    if (*t == "A") cfg.track = Track::A;
    else if (*t == "B") cfg.track = Track::B;
    else rd.fail("track", "expected \"A\" or \"B\"");
  }
  if (auto l = rd.string(root, "", "language", true)) {
    if (l->empty()) rd.fail("language", "must not be empty");
    cfg.language = *l;
  }
  if (auto s = rd.string(root, "", "strategy", true)) {
    if (auto st = try_parse_strategy(*s)) cfg.strategy = *st;
    else rd.fail("strategy", "unknown strategy '" + *s + "'");
  }
  if (auto seed = rd.integer(root, "", "seed", true)) {
    if (*seed < 0) rd.fail("seed", "must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(*seed);
  }
  if (auto out = rd.path(root, "", "output_dir")) {
    cfg.output_dir = *out;
  } else if (!root.contains("output_dir") || root["output_dir"].is_null()) {
    rd.fail("output_dir", "required");
  }

  if (root.contains("dataset")) {
    const auto& d = root["dataset"];
    if (rd.object(d, "dataset", {"train", "dev", "test", "english_train"})) {
      cfg.dataset.train = rd.path(d, "dataset", "train");
      cfg.dataset.dev = rd.path(d, "dataset", "dev");
      cfg.dataset.test = rd.path(d, "dataset", "test");
      cfg.dataset.english_train = rd.path(d, "dataset", "english_train");
    }
  }

  // Emotion set: per-language default unless overridden.
  std::optional<EmotionSet> emotions;
  if (root.contains("emotions") && !root["emotions"].is_null()) {
    const auto& list = root["emotions"];
    if (!list.is_array() || list.empty()) {
      rd.fail("emotions", "expected a non-empty array of emotion names");
    } else {
      std::vector<Emotion> es;
      bool ok = true;
      for (std::size_t i = 0; i < list.size(); ++i) {
        auto at = "emotions[" + std::to_string(i) + "]";
        if (!list[i].is_string()) {
          rd.fail(at, "expected a string");
          ok = false;
        } else if (auto e = try_parse_emotion(list[i].get<std::string>())) {
          if (std::find(es.begin(), es.end(), *e) != es.end()) {
            rd.fail(at, "duplicate emotion");
            ok = false;
          }
          es.push_back(*e);
        } else {
          rd.fail(at, "unknown emotion '" + list[i].get<std::string>() + "'");
          ok = false;
        }
      }
      if (ok) emotions.emplace(cfg.language, std::move(es));
    }
  }
  cfg.emotions = emotions ? *emotions : EmotionSet::for_language(cfg.language);

  if (root.contains("schema")) {
    const auto& s = root["schema"];
    if (rd.object(s, "schema", {"id", "text", "language", "emotions"})) {
      if (auto v = rd.string(s, "schema", "id")) cfg.schema.id = *v;
      if (auto v = rd.string(s, "schema", "text")) cfg.schema.text = *v;
      cfg.schema.language = rd.string(s, "schema", "language");
      if (s.contains("emotions") && !s["emotions"].is_null()) {
        const auto& cols = s["emotions"];
        if (cols.is_object()) {
          for (const auto& [name, col] : cols.items()) {
            auto at = "schema.emotions." + name;
            auto e = try_parse_emotion(name);
            if (!e) rd.fail(at, "unknown emotion");
            else if (!col.is_string()) rd.fail(at, "expected a column name");
            else cfg.schema.emotion_columns[*e] = col.get<std::string>();
          }
        } else {
          rd.fail("schema.emotions", "expected an object");
        }
      }
    }
  }

  if (root.contains("bm25")) {
    const auto& b = root["bm25"];
    if (rd.object(b, "bm25", {"k1", "b", "epsilon"})) {
      if (auto v = rd.number(b, "bm25", "k1")) cfg.bm25.k1 = *v;
      if (auto v = rd.number(b, "bm25", "b")) cfg.bm25.b = *v;
      if (auto v = rd.number(b, "bm25", "epsilon")) cfg.bm25.epsilon = *v;
      if (!(cfg.bm25.k1 >= 0)) rd.fail("bm25.k1", "must be >= 0");
      if (!(cfg.bm25.b >= 0 && cfg.bm25.b <= 1)) rd.fail("bm25.b", "must be in [0, 1]");
      if (!(cfg.bm25.epsilon >= 0)) rd.fail("bm25.epsilon", "must be >= 0");
    }
  }
  if (root.contains("retrieval")) {
    const auto& r = root["retrieval"];
    if (rd.object(r, "retrieval", {"k"})) {
      if (auto k = rd.integer(r, "retrieval", "k")) {
        if (*k < 1) rd.fail("retrieval.k", "must be >= 1");
        else cfg.retrieval.k = static_cast<std::size_t>(*k);
      }
    }
  }

  if (root.contains("endpoint") && !root["endpoint"].is_null()) {
    const auto& e = root["endpoint"];
    if (rd.object(e, "endpoint",
                  {"base_url", "model", "temperature", "max_tokens", "timeout_ms", "max_retries",
                   "concurrency", "backoff_base_ms", "api_key_env"})) {
      EndpointConfig ep;
      if (auto v = rd.string(e, "endpoint", "base_url", true)) ep.base_url = *v;
      if (auto v = rd.string(e, "endpoint", "model", true)) ep.model_name = *v;
      if (auto v = rd.number(e, "endpoint", "temperature")) ep.temperature = *v;
      if (auto v = rd.integer(e, "endpoint", "max_tokens")) ep.max_tokens = static_cast<int>(*v);
      if (auto v = rd.integer(e, "endpoint", "timeout_ms")) ep.timeout = std::chrono::milliseconds(*v);
      if (auto v = rd.integer(e, "endpoint", "max_retries")) ep.max_retries = static_cast<int>(*v);
      if (auto v = rd.integer(e, "endpoint", "concurrency")) ep.concurrency_limit = static_cast<int>(*v);
      if (auto v = rd.integer(e, "endpoint", "backoff_base_ms")) ep.backoff_base = std::chrono::milliseconds(*v);
      if (auto v = rd.string(e, "endpoint", "api_key_env")) ep.api_key_env = *v;
      if (!(ep.temperature >= 0)) rd.fail("endpoint.temperature", "must be >= 0");
      if (ep.max_tokens < 1) rd.fail("endpoint.max_tokens", "must be >= 1");
      if (ep.timeout.count() <= 0) rd.fail("endpoint.timeout_ms", "must be > 0");
      if (ep.max_retries < 0) rd.fail("endpoint.max_retries", "must be >= 0");
      if (ep.concurrency_limit < 1) rd.fail("endpoint.concurrency", "must be >= 1");
      if (ep.backoff_base.count() < 0) rd.fail("endpoint.backoff_base_ms", "must be >= 0");
      cfg.endpoint = ep;
    }
  }
  if (root.contains("mock") && !root["mock"].is_null()) {
    const auto& m = root["mock"];
    MockSpec spec;
    std::optional<std::string> id;
    if (m.is_string()) {
      id = m.get<std::string>();
    } else if (rd.object(m, "mock", {"id", "gold"})) {
      id = rd.string(m, "mock", "id", true);
      spec.gold = rd.path(m, "mock", "gold");
    }
    if (id) {
      try {
        spec.kind = parse_mock_kind(*id);
        cfg.mock = spec;
      } catch (const Error&) {
        rd.fail(m.is_string() ? "mock" : "mock.id", "unknown mock model '" + *id + "'");
      }
    }
  }
  if (auto v = rd.boolean(root, "", "oversample")) cfg.oversample = *v;

  if (auto name = rd.string(root, "", "language_name")) {
    cfg.language_name = *name;
  } else if (auto known = language_display_name(cfg.language)) {
    cfg.language_name = *known;
  } else if (!cfg.language.empty()) {
    rd.fail("language_name", "required for language code '" + cfg.language + "'");
  }

  // Cross-field rules.
  const Strategy s = cfg.strategy;
  if (auto split = rd.string(root, "", "eval_split")) {
    if (*split != "dev" && *split != "test") rd.fail("eval_split", "expected \"dev\" or \"test\"");
    cfg.eval_split = *split;
  } else {
    cfg.eval_split = cfg.dataset.dev || !cfg.dataset.test ? "dev" : "test";
  }
  if (needs_inference(s)) {
    const bool have_eval = cfg.eval_split == "dev" ? cfg.dataset.dev.has_value()
                                                   : cfg.dataset.test.has_value();
    if (!have_eval) rd.fail("dataset." + cfg.eval_split, "required by strategy " + std::string(to_string(s)));
    if (cfg.endpoint.has_value() == cfg.mock.has_value()) {
      rd.fail("endpoint", "exactly one of endpoint or mock is required for strategy " +
                              std::string(to_string(s)));
    }
  }
  if ((s == Strategy::few_shot || s == Strategy::export_sft || s == Strategy::export_ebridge) &&
      !cfg.dataset.train) {
    rd.fail("dataset.train", "required by strategy " + std::string(to_string(s)));
  }
  if (s == Strategy::marginalise_from_b) {
    if (cfg.track != Track::A) rd.fail("track", "marginalise_from_b scores Track A gold; set track to \"A\"");
    if (cfg.mock && cfg.mock->kind == MockKind::gold && !cfg.mock->gold) {
      rd.fail("mock.gold", "marginalise_from_b needs a Track B gold file for the gold mock");
    }
  }
  if (s == Strategy::export_ebridge) {
    if (!cfg.dataset.english_train) rd.fail("dataset.english_train", "required by strategy export_ebridge");
    if (cfg.language == "eng") rd.fail("language", "export_ebridge targets a non-English language");
  }

  rd.raise_if_failed();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  return validate_config(detail::read_file(file.string()),
                         std::filesystem::absolute(file).parent_path());
}

}  // namespace emo
