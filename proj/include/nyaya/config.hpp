#pragma once

// Flat key = value configuration. Precedence: flags > environment > file > defaults.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <string>

#include "nyaya/error.hpp"
#include "nyaya/text.hpp"

namespace nyaya {

struct Config {
  std::string data_dir = "nyaya-data";

  // providers
  std::string llm_provider = "mock";  // mock | http
  std::string embed_provider = "mock";
  std::string llm_url;
  std::string embed_url;
  std::string api_key;
  std::string model = "llama-3-8b-instruct";
  std::string summary_model = "mixtral-8x7b-instruct-v0.1";
  std::uint64_t mock_seed = 42;
  std::size_t embed_dim = 384;
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_inflight = 4;
  int backoff_ms = 500;

  // decoding
  double temperature = 0.2;
  double top_p = 0.9;
  int max_new_tokens = 512;
  int summary_max_new_tokens = 1400;

  // summarization
  std::size_t truncate_tokens = 27000;
  std::size_t summary_min_tokens = 700;
  std::size_t summary_max_tokens = 1000;
  std::string facts_mode = "summary";  // summary | raw

  // pipelines
  int k = 3;
  std::size_t context_budget = 8000;
  std::size_t statute_budget = 300;
  std::string shots_path;
  int n_shots = 2;

  // evaluation
  std::string references_path;
  std::string judge_provider = "none";  // none | mock | http
  std::string judge_url;
  std::string judge_model = "gpt-4o-mini";
  std::string scoring_url;

  // service
  std::string annotation_run;
  std::size_t annotation_n = 30;
  int port = 8080;
  std::string cors_origin = "*";

  /// Keys recognised by `set`; anything else is a BadConfig error.
  void set(const std::string& key, const std::string& value) {
    auto as_int = [&]() -> long long {
      try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw Error(Errc::BadConfig, key + " expects an integer, got '" + value + "'");
      }
    };
    auto as_uint = [&]() -> std::size_t {
      long long v = as_int();
      if (v < 0) throw Error(Errc::BadConfig, key + " must be non-negative");
      return static_cast<std::size_t>(v);
    };
    auto as_double = [&]() -> double {
      try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw Error(Errc::BadConfig, key + " expects a number, got '" + value + "'");
      }
    };

    if (key == "data_dir") data_dir = value;
    else if (key == "llm_provider") llm_provider = value;
    else if (key == "embed_provider") embed_provider = value;
    else if (key == "llm_url") llm_url = value;
    else if (key == "embed_url") embed_url = value;
    else if (key == "api_key") api_key = value;
    else if (key == "model") model = value;
    else if (key == "summary_model") summary_model = value;
    else if (key == "mock_seed") mock_seed = as_uint();
    else if (key == "embed_dim") embed_dim = as_uint();
    else if (key == "timeout_ms") timeout_ms = static_cast<int>(as_int());
    else if (key == "max_retries") max_retries = static_cast<int>(as_int());
    else if (key == "max_inflight") max_inflight = static_cast<int>(as_int());
    else if (key == "backoff_ms") backoff_ms = static_cast<int>(as_int());
    else if (key == "temperature") temperature = as_double();
    else if (key == "top_p") top_p = as_double();
    else if (key == "max_new_tokens") max_new_tokens = static_cast<int>(as_int());
    else if (key == "summary_max_new_tokens") summary_max_new_tokens = static_cast<int>(as_int());
    else if (key == "truncate_tokens") truncate_tokens = as_uint();
    else if (key == "summary_min_tokens") summary_min_tokens = as_uint();
    else if (key == "summary_max_tokens") summary_max_tokens = as_uint();
    else if (key == "facts_mode") facts_mode = value;
    else if (key == "k") k = static_cast<int>(as_int());
    else if (key == "context_budget") context_budget = as_uint();
    else if (key == "statute_budget") statute_budget = as_uint();
    else if (key == "shots_path") shots_path = value;
    else if (key == "n_shots") n_shots = static_cast<int>(as_int());
    else if (key == "references_path") references_path = value;
    else if (key == "judge_provider") judge_provider = value;
    else if (key == "judge_url") judge_url = value;
    else if (key == "judge_model") judge_model = value;
    else if (key == "scoring_url") scoring_url = value;
    else if (key == "annotation_run") annotation_run = value;
    else if (key == "annotation_n") annotation_n = as_uint();
    else if (key == "port") port = static_cast<int>(as_int());
    else if (key == "cors_origin") cors_origin = value;
    else throw Error(Errc::BadConfig, "unknown key '" + key + "'");
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::BadConfig, what); };
    if (llm_provider != "mock" && llm_provider != "http") fail("llm_provider must be mock or http");
    if (embed_provider != "mock" && embed_provider != "http") fail("embed_provider must be mock or http");
    if (judge_provider != "none" && judge_provider != "mock" && judge_provider != "http") {
      fail("judge_provider must be none, mock or http");
    }
    if (facts_mode != "summary" && facts_mode != "raw") fail("facts_mode must be summary or raw");
    if (embed_dim == 0) fail("embed_dim must be positive");
    if (timeout_ms <= 0) fail("timeout_ms must be positive");
    if (max_retries < 0) fail("max_retries must be >= 0");
    if (max_inflight < 1) fail("max_inflight must be >= 1");
    if (temperature < 0.0 || temperature > 2.0) fail("temperature must lie in [0, 2]");
    if (top_p <= 0.0 || top_p > 1.0) fail("top_p must lie in (0, 1]");
    if (max_new_tokens <= 0) fail("max_new_tokens must be positive");
    if (k < 1) fail("k must be >= 1");
    if (context_budget == 0 || statute_budget == 0) fail("budgets must be positive");
    if (n_shots < 0) fail("n_shots must be >= 0");
    if (summary_min_tokens > summary_max_tokens) fail("summary_min_tokens exceeds summary_max_tokens");
  }

  /// Stable textual form; used for the run manifest's config hash.
  std::string canonical() const {
    std::string out;
    auto put = [&](const char* key, const std::string& v) { out.append(key).append("=").append(v).append("\n"); };
    put("llm_provider", llm_provider);
    put("embed_provider", embed_provider);
    put("model", model);
    put("mock_seed", std::to_string(mock_seed));
    put("embed_dim", std::to_string(embed_dim));
    put("temperature", std::to_string(temperature));
    put("top_p", std::to_string(top_p));
    put("max_new_tokens", std::to_string(max_new_tokens));
    put("truncate_tokens", std::to_string(truncate_tokens));
    put("facts_mode", facts_mode);
    put("k", std::to_string(k));
    put("context_budget", std::to_string(context_budget));
    put("statute_budget", std::to_string(statute_budget));
    put("shots_path", shots_path);
    put("n_shots", std::to_string(n_shots));
    return out;
  }
};

/// Parses `key = value` lines; `#` starts a comment line.
inline std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& origin = "config") {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::BadConfig, origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    kv[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
  }
  return kv;
}

inline std::map<std::string, std::string> environment_overrides() {
  static const std::pair<const char*, const char*> mapping[] = {
      {"NYAYA_LLM_URL", "llm_url"},
      {"NYAYA_EMBED_URL", "embed_url"},
      {"NYAYA_API_KEY", "api_key"},
      {"NYAYA_PORT", "port"},
      {"NYAYA_DATA_DIR", "data_dir"},
  };
  std::map<std::string, std::string> kv;
  for (const auto& [var, key] : mapping) {
    if (const char* v = std::getenv(var); v != nullptr && *v != '\0') kv[key] = v;
  }
  return kv;
}

/// Builds the effective configuration. A provider URL from any layer
/// switches that provider to http unless the provider key is set explicitly.
inline Config load_config(const std::string& path, const std::map<std::string, std::string>& flag_overrides) {
  std::map<std::string, std::string> merged;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::BadConfig, "cannot open config file " + path);
    merged = parse_config_text(in, path);
  }
  for (auto& [k, v] : environment_overrides()) merged[k] = v;
  for (auto& [k, v] : flag_overrides) merged[k] = v;

  Config cfg;
  for (const auto& [k, v] : merged) cfg.set(k, v);
  if (!merged.count("llm_provider") && !cfg.llm_url.empty()) cfg.llm_provider = "http";
  if (!merged.count("embed_provider") && !cfg.embed_url.empty()) cfg.embed_provider = "http";
  cfg.validate();
  return cfg;
}

}  // namespace nyaya
