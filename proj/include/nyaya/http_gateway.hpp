#pragma once

// HTTP-backed providers speaking the JSON wire protocol:
//   POST {base}/generate {prompt, temperature, top_p, max_new_tokens, model} -> {text}
//   POST {base}/embed    {texts: [...]}                                      -> {vectors: [[...]]}
// with a bearer token when an api key is configured.

#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "nyaya/error.hpp"
#include "nyaya/gateway.hpp"

namespace nyaya {

struct ProviderConfig {
  std::string base_url;
  std::string api_key;
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_inflight = 4;
  int backoff_ms = 500;
};

inline void validate(const ProviderConfig& cfg) {
  if (cfg.base_url.empty()) throw Error(Errc::FatalConfig, "provider base_url empty");
  if (cfg.timeout_ms <= 0) throw Error(Errc::FatalConfig, "timeout_ms must be positive");
  if (cfg.max_retries < 0) throw Error(Errc::FatalConfig, "max_retries must be >= 0");
  if (cfg.max_inflight < 1) throw Error(Errc::FatalConfig, "max_inflight must be >= 1");
}

/// JSON-over-HTTP POST client with the transient-failure retry policy and
/// the per-provider in-flight limiter. Shareable across threads.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(ProviderConfig cfg) : cfg_(std::move(cfg)), limiter_(cfg_.max_inflight) {
    validate(cfg_);
    auto scheme = cfg_.base_url.find("://");
    std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    auto path_start = cfg_.base_url.find('/', host_start);
    if (path_start == std::string::npos) {
      origin_ = cfg_.base_url;
    } else {
      origin_ = cfg_.base_url.substr(0, path_start);
      prefix_ = cfg_.base_url.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
    policy_.max_retries = cfg_.max_retries;
    policy_.base_delay = std::chrono::milliseconds(cfg_.backoff_ms);
  }

  const ProviderConfig& config() const noexcept { return cfg_; }

  /// One attempt; maps transport and status failures onto Errc.
  nlohmann::json post_once(const std::string& path, const nlohmann::json& body) {
    InflightLimiter::Slot slot(limiter_);
    httplib::Client client(origin_);
    auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    auto res = client.Post(prefix_ + path, headers, body.dump(), "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
        throw Error(Errc::Timeout, origin_ + prefix_ + path + ": " + httplib::to_string(err));
      }
      throw Error(Errc::ProviderUnavailable, origin_ + prefix_ + path + ": " + httplib::to_string(err));
    }
    if (res->status == 429) throw Error(Errc::RateLimited, origin_ + prefix_ + path);
    if (res->status >= 500) {
      throw Error(Errc::ProviderUnavailable, origin_ + prefix_ + path + " returned " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(Errc::HttpStatus, origin_ + prefix_ + path + " returned " + std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::MalformedProviderResponse, path + ": body is not JSON");
    }
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    return with_retries(policy_, [&] { return post_once(path, body); });
  }

 private:
  ProviderConfig cfg_;
  InflightLimiter limiter_;
  RetryPolicy policy_;
  std::string origin_;
  std::string prefix_;
};

class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(ProviderConfig cfg) : client_(std::move(cfg)) {}

  GenerationResponse generate(const GenerationRequest& req) override {
    validate(req);
    auto start = std::chrono::steady_clock::now();
    nlohmann::json body = {{"prompt", req.prompt},
                           {"temperature", req.temperature},
                           {"top_p", req.top_p},
                           {"max_new_tokens", req.max_new_tokens},
                           {"model", req.model_name}};
    auto reply = client_.post("/generate", body);
    auto it = reply.find("text");
    if (!reply.is_object() || it == reply.end() || !it->is_string()) {
      throw Error(Errc::MalformedProviderResponse, "/generate: missing string field 'text'");
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return {std::string(trim_right(it->get<std::string>())), name(), elapsed.count()};
  }

  std::string name() const override { return "http:" + client_.config().base_url; }

 private:
  HttpJsonClient client_;
};

class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(ProviderConfig cfg, std::size_t expected_dimension)
      : client_(std::move(cfg)), dimension_(expected_dimension) {}

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) throw Error(Errc::EmptyBatch, "embed called with no texts");
    auto reply = client_.post("/embed", {{"texts", texts}});
    auto it = reply.find("vectors");
    if (!reply.is_object() || it == reply.end() || !it->is_array()) {
      throw Error(Errc::MalformedProviderResponse, "/embed: missing array field 'vectors'");
    }
    if (it->size() != texts.size()) {
      throw Error(Errc::MalformedProviderResponse, "/embed: expected " + std::to_string(texts.size()) +
                                                       " vectors, got " + std::to_string(it->size()));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& row : *it) {
      if (!row.is_array()) throw Error(Errc::MalformedProviderResponse, "/embed: vector is not an array");
      if (row.size() != dimension_) {
        throw Error(Errc::DimensionMismatch,
                    "expected dimension " + std::to_string(dimension_) + ", got " + std::to_string(row.size()));
      }
      EmbeddingVector v;
      v.values.reserve(dimension_);
      for (const auto& x : row) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) {
          throw Error(Errc::MalformedProviderResponse, "/embed: non-finite or non-numeric component");
        }
        v.values.push_back(x.get<double>());
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "http:" + client_.config().base_url; }

 private:
  HttpJsonClient client_;
  std::size_t dimension_;
};

}  // namespace nyaya
