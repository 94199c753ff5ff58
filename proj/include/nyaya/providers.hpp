#pragma once

// Builds the generation, embedding, judge and scoring providers a Config
// asks for.

#include <memory>
#include <string>

#include "nyaya/config.hpp"
#include "nyaya/evaluation.hpp"
#include "nyaya/http_gateway.hpp"
#include "nyaya/judgment.hpp"
#include "nyaya/mock_llm.hpp"
#include "nyaya/model_score.hpp"

namespace nyaya {

struct Providers {
  std::unique_ptr<Generator> llm;
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<Generator> judge;         ///< null when judge_provider is none
  std::unique_ptr<ModelScorer> scorer;      ///< unconfigured client when scoring_url is empty
};

inline ProviderConfig provider_config(const Config& cfg, const std::string& url) {
  return {url, cfg.api_key, cfg.timeout_ms, cfg.max_retries, cfg.max_inflight, cfg.backoff_ms};
}

inline Providers make_providers(const Config& cfg) {
  Providers p;
  if (cfg.llm_provider == "http") {
    if (cfg.llm_url.empty()) throw Error(Errc::FatalConfig, "llm_provider is http but llm_url is empty");
    p.llm = std::make_unique<HttpGenerator>(provider_config(cfg, cfg.llm_url));
  } else {
    p.llm = standard_mock(cfg.mock_seed);
  }
  if (cfg.embed_provider == "http") {
    if (cfg.embed_url.empty()) throw Error(Errc::FatalConfig, "embed_provider is http but embed_url is empty");
    p.embedder = std::make_unique<HttpEmbedder>(provider_config(cfg, cfg.embed_url), cfg.embed_dim);
  } else {
    p.embedder = std::make_unique<MockEmbedder>(cfg.mock_seed, cfg.embed_dim);
  }
  if (cfg.judge_provider == "http") {
    if (cfg.judge_url.empty()) throw Error(Errc::FatalConfig, "judge_provider is http but judge_url is empty");
    p.judge = std::make_unique<HttpGenerator>(provider_config(cfg, cfg.judge_url));
  } else if (cfg.judge_provider == "mock") {
    p.judge = standard_mock(cfg.mock_seed);
  }
  p.scorer = std::make_unique<ScoringClient>(provider_config(cfg, cfg.scoring_url));
  return p;
}

inline SummarizerOptions summarizer_options(const Config& cfg) {
  return {cfg.summary_model, cfg.temperature,        cfg.top_p, cfg.summary_max_new_tokens,
          cfg.truncate_tokens, cfg.summary_min_tokens, cfg.summary_max_tokens};
}

inline DecodingOptions decoding_options(const Config& cfg) {
  return {cfg.model, cfg.temperature, cfg.top_p, cfg.max_new_tokens};
}

inline PipelineConfig pipeline_config(const Config& cfg, PipelineKind kind) {
  return {kind, static_cast<std::size_t>(cfg.k), cfg.context_budget, cfg.statute_budget, cfg.facts_mode == "summary"};
}

inline std::string config_hash(const Config& cfg) { return hex64(fnv1a64(cfg.canonical())); }

}  // namespace nyaya
