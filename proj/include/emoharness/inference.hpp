#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "emoharness/emotion.hpp"
#include "emoharness/error.hpp"
#include "emoharness/retrieval.hpp"

namespace emo {

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 8;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  int concurrency_limit = 1;
  std::chrono::milliseconds backoff_base{1000};
  // Name of the environment variable holding the bearer token. The token
  // itself never lives in this struct.
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const {
    if (base_url.empty()) throw Error(ErrorKind::config, "endpoint.base_url is empty");
    if (model_name.empty()) throw Error(ErrorKind::config, "endpoint.model is empty");
    if (!(temperature >= 0.0)) throw Error(ErrorKind::config, "endpoint.temperature must be >= 0");
    if (max_tokens < 1) throw Error(ErrorKind::config, "endpoint.max_tokens must be >= 1");
    if (max_retries < 0) throw Error(ErrorKind::config, "endpoint.max_retries must be >= 0");
    if (concurrency_limit < 1) throw Error(ErrorKind::config, "endpoint.concurrency must be >= 1");
    if (timeout.count() <= 0) throw Error(ErrorKind::config, "endpoint.timeout_ms must be > 0");
    if (backoff_base.count() < 0) throw Error(ErrorKind::config, "endpoint.backoff_base_ms must be >= 0");
  }

  nlohmann::ordered_json to_json() const {
    return {{"base_url", base_url},
            {"model", model_name},
            {"temperature", temperature},
            {"max_tokens", max_tokens},
            {"timeout_ms", timeout.count()},
            {"max_retries", max_retries},
            {"concurrency", concurrency_limit},
            {"backoff_base_ms", backoff_base.count()},
            {"api_key_env", api_key_env}};
  }
};

struct InstanceKey {
  std::string snippet_id;
  Emotion emotion;

  auto operator<=>(const InstanceKey&) const = default;
};

struct CompletionRequest {
  InstanceKey key;
  std::string prompt;
};

struct RawCompletion {
  InstanceKey key;
  std::string prompt;
  std::string raw_text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

struct PredictionRecord {
  InstanceKey key;
  Track track = Track::A;
  std::optional<int> parsed;  // empty on parse failure
  std::string raw_text;
  int attempt_count = 1;

  bool parse_failed() const noexcept { return !parsed.has_value(); }
  // Parse failures count as "no emotion".
  int label() const noexcept { return parsed.value_or(0); }

  bool operator==(const PredictionRecord&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = {{"snippet_id", key.snippet_id},
                                {"emotion", to_string(key.emotion)},
                                {"track", to_string(track)}};
    j["parsed"] = parsed ? nlohmann::ordered_json(*parsed) : nlohmann::ordered_json(nullptr);
    j["label"] = label();
    j["parse_failure"] = parse_failed();
    j["raw_text"] = raw_text;
    j["attempts"] = attempt_count;
    return j;
  }

  static PredictionRecord from_json(const nlohmann::json& j) {
    PredictionRecord r;
    r.key.snippet_id = j.at("snippet_id").get<std::string>();
    r.key.emotion = parse_emotion(j.at("emotion").get<std::string>());
    r.track = parse_track(j.at("track").get<std::string>());
    if (!j.at("parsed").is_null()) {
      int v = j.at("parsed").get<int>();
      if (!label_in_range(v, r.track)) {
        throw Error(ErrorKind::validation, "prediction for '" + r.key.snippet_id +
                                               "' has out-of-range label " + std::to_string(v));
      }
      r.parsed = v;
    }
    r.raw_text = j.value("raw_text", "");
    r.attempt_count = j.value("attempts", 1);
    return r;
  }
};

// First ASCII digit in the completion, accepted only if it lies in the
// track's label range.
inline std::optional<int> parse_label(std::string_view raw_text, Track track) {
  for (char c : raw_text) {
    if (c >= '0' && c <= '9') {
      int v = c - '0';
      if (label_in_range(v, track)) return v;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

inline PredictionRecord to_prediction(const RawCompletion& c, Track track) {
  return {c.key, track, parse_label(c.raw_text, track), c.raw_text, c.attempt_count};
}

inline std::string redact(std::string text, std::string_view secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos)) {
    text.replace(pos, secret.size(), "[REDACTED]");
  }
  return text;
}

// Implementations must be safe to call from several threads at once.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual RawCompletion complete(const CompletionRequest& request) = 0;
  virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Mock models

enum class MockKind { echo_first_digit, always_0, keyword, gold };

inline std::string_view to_string(MockKind k) {
  switch (k) {
    case MockKind::echo_first_digit: return "echo-first-digit";
    case MockKind::always_0: return "always-0";
    case MockKind::keyword: return "keyword";
    case MockKind::gold: return "gold";
  }
  return "?";
}

inline MockKind parse_mock_kind(std::string_view s) {
  for (auto k : {MockKind::echo_first_digit, MockKind::always_0, MockKind::keyword, MockKind::gold}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::config, "unknown mock model '" + std::string(s) + "'");
}

namespace detail {

inline const std::vector<std::string>& emotion_keywords(Emotion e) {
  static const std::map<Emotion, std::vector<std::string>> words = {
      {Emotion::anger, {"anger", "angry", "furious", "rage", "mad", "hate", "annoyed"}},
      {Emotion::disgust, {"disgust", "disgusting", "gross", "nasty", "sick", "revolting"}},
      {Emotion::fear, {"fear", "afraid", "scared", "terrified", "nervous", "worried"}},
      {Emotion::joy, {"joy", "happy", "glad", "love", "great", "won", "delighted"}},
      {Emotion::sadness, {"sadness", "sad", "tired", "cry", "miss", "lonely", "lost"}},
      {Emotion::surprise, {"surprise", "surprised", "wow", "unexpected", "shocked", "suddenly"}},
  };
  return words.at(e);
}

// The text slot of the last template occurrence in a prompt; the whole prompt
// when no template markers are found.
inline std::string_view query_slot(std::string_view prompt) {
  auto between = [&](std::string_view open, std::string_view close) -> std::optional<std::string_view> {
    auto start = prompt.rfind(open);
    if (start == std::string_view::npos) return std::nullopt;
    start += open.size();
    auto stop = prompt.rfind(close);
    if (stop == std::string_view::npos || stop < start) return std::nullopt;
    return prompt.substr(start, stop - start);
  };
  if (auto s = between("Tweet: ", " Emotion ")) return *s;
  if (auto s = between("Statement: ", ". Does this statement express")) return *s;
  return prompt;
}

inline bool is_intensity_prompt(std::string_view prompt) {
  return prompt.ends_with("Intensity class:");
}

}  // namespace detail

// Deterministic stand-ins for a model endpoint:
//   echo-first-digit  first ASCII digit of the prompt ("0" if none)
//   always-0          "0"
//   keyword           count of emotion keywords in the query text; 0/1 for
//                     presence prompts, capped at 3 for intensity prompts
//   gold              the gold label looked up by instance key
class MockBackend final : public CompletionBackend {
 public:
  explicit MockBackend(MockKind kind, std::map<InstanceKey, int> gold = {})
      : kind_(kind), gold_(std::move(gold)) {}

  RawCompletion complete(const CompletionRequest& request) override {
    return {request.key, request.prompt, respond(request), std::chrono::milliseconds{0}, 1};
  }

  std::string describe() const override { return "mock:" + std::string(to_string(kind_)); }

 private:
  std::string respond(const CompletionRequest& request) const {
    switch (kind_) {
      case MockKind::echo_first_digit:
        for (char c : request.prompt) {
          if (c >= '0' && c <= '9') return std::string(1, c);
        }
        return "0";
      case MockKind::always_0:
        return "0";
      case MockKind::keyword: {
        const auto& words = detail::emotion_keywords(request.key.emotion);
        int hits = 0;
        for (const auto& tok : tokenize(detail::query_slot(request.prompt))) {
          if (std::find(words.begin(), words.end(), tok) != words.end()) ++hits;
        }
        if (detail::is_intensity_prompt(request.prompt)) return std::to_string(std::min(hits, 3));
        return hits > 0 ? "1" : "0";
      }
      case MockKind::gold: {
        auto it = gold_.find(request.key);
        return it == gold_.end() ? "no gold available" : std::to_string(it->second);
      }
    }
    return "";
  }

  MockKind kind_;
  std::map<InstanceKey, int> gold_;
};

// ---------------------------------------------------------------------------
// Retry loop shared by HTTP backends

struct HttpResult {
  int status = 0;  // 0 = transport failure (no response)
  std::string body;
  std::string error;
};

using HttpPost = std::function<HttpResult(const std::string& body)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline nlohmann::ordered_json chat_request_body(const EndpointConfig& config,
                                                std::string_view prompt) {
  return {{"model", config.model_name},
          {"messages", nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens}};
}

inline std::string extract_first_choice(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorKind::protocol, "response body is not JSON");
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::protocol, "response lacks choices[0].message.content");
  }
}

inline bool is_retryable(const HttpResult& r) {
  return r.status == 0 || r.status == 429 || r.status >= 500;
}

// Delay before retry n (1-based): base * 2^(n-1), scaled by a jitter factor
// drawn from [0.5, 1.5).
inline std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry,
                                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  const double ms = static_cast<double>(base.count()) * std::pow(2.0, retry - 1) * jitter(rng);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

// Posts one chat-completions request, retrying transport failures, 429 and
// 5xx with exponential backoff; at most max_retries + 1 attempts.
inline RawCompletion complete_with_retries(const CompletionRequest& request,
                                           const EndpointConfig& config, const HttpPost& post,
                                           const Sleeper& sleep, std::mt19937_64& rng,
                                           std::mutex* rng_mutex = nullptr,
                                           std::string_view secret = {}) {
  const std::string body = chat_request_body(config, request.prompt).dump();
  const auto start = std::chrono::steady_clock::now();
  HttpResult last;
  for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    last = post(body);
    if (last.status >= 200 && last.status < 300) {
      RawCompletion c{request.key, request.prompt, extract_first_choice(last.body),
                      std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start),
                      attempt};
      return c;
    }
    if (!is_retryable(last)) break;
    if (attempt <= config.max_retries) {
      std::chrono::milliseconds delay;
      if (rng_mutex) {
        std::lock_guard lock(*rng_mutex);
        delay = backoff_delay(config.backoff_base, attempt, rng);
      } else {
        delay = backoff_delay(config.backoff_base, attempt, rng);
      }
      sleep(delay);
    } else {
      std::string detail = last.status == 0 ? last.error : "status " + std::to_string(last.status);
      throw Error(ErrorKind::transport,
                  redact("retries exhausted after " + std::to_string(attempt) +
                             " attempts; last " + detail,
                         secret));
    }
  }
  throw Error(ErrorKind::transport,
              redact("request rejected with status " + std::to_string(last.status) + ": " +
                         last.body.substr(0, 200),
                     secret));
}

// ---------------------------------------------------------------------------

// Issues requests with up to `concurrency` in flight; results come back in
// request order. The first error stops remaining work and is rethrown.
inline std::vector<RawCompletion> run_batch(CompletionBackend& backend,
                                            std::span<const CompletionRequest> requests,
                                            int concurrency) {
  std::vector<std::optional<RawCompletion>> slots(requests.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        slots[i] = backend.complete(requests[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(concurrency, 1)), requests.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::vector<RawCompletion> out;
  out.reserve(requests.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace emo
