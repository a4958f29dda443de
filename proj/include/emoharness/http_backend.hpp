#pragma once

#include <cstdlib>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>

#include "emoharness/error.hpp"
#include "emoharness/inference.hpp"

namespace emo {

struct ParsedUrl {
  std::string scheme_host_port;  // e.g. "http://localhost:8000"
  std::string path_prefix;       // e.g. "/v1", never with a trailing slash
};

inline ParsedUrl parse_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::config, "endpoint.base_url '" + url + "' has no scheme");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::config, "endpoint.base_url scheme must be http or https");
  }
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

// POST {base_url}/chat/completions with a single user message.
class ChatCompletionsBackend final : public CompletionBackend {
 public:
  ChatCompletionsBackend(EndpointConfig config, std::uint64_t seed,
                         Sleeper sleep = [](std::chrono::milliseconds d) {
                           std::this_thread::sleep_for(d);
                         })
      : config_(std::move(config)), url_(parse_base_url(config_.base_url)),
        sleep_(std::move(sleep)), rng_(seed) {
    config_.validate();
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

  RawCompletion complete(const CompletionRequest& request) override {
    auto post = [&](const std::string& body) -> HttpResult {
      httplib::Client client(url_.scheme_host_port);
      const auto secs = config_.timeout.count() / 1000;
      const auto usecs = (config_.timeout.count() % 1000) * 1000;
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      if (!api_key_.empty()) client.set_bearer_token_auth(api_key_);
      auto res = client.Post(url_.path_prefix + "/chat/completions", body, "application/json");
      if (!res) return {0, {}, "transport failure: " + httplib::to_string(res.error())};
      return {res->status, res->body, {}};
    };
    return complete_with_retries(request, config_, post, sleep_, rng_, &rng_mutex_, api_key_);
  }

  std::string describe() const override {
    return "chat-completions:" + config_.base_url + " model=" + config_.model_name;
  }

 private:
  EndpointConfig config_;
  ParsedUrl url_;
  Sleeper sleep_;
  std::string api_key_;
  std::mt19937_64 rng_;
  std::mutex rng_mutex_;
};

}  // namespace emo
