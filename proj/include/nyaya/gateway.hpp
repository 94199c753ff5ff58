#pragma once

// Provider-neutral generation/embedding interfaces and the deterministic
// mock providers used for offline runs.

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nyaya/error.hpp"
#include "nyaya/text.hpp"

namespace nyaya {

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.2;
  double top_p = 0.9;
  int max_new_tokens = 512;
  std::string model_name;
};

inline void validate(const GenerationRequest& req) {
  if (req.prompt.empty()) throw Error(Errc::InvalidRequest, "prompt empty");
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) throw Error(Errc::InvalidRequest, "temperature outside [0, 2]");
  if (!(req.top_p > 0.0 && req.top_p <= 1.0)) throw Error(Errc::InvalidRequest, "top_p outside (0, 1]");
  if (req.max_new_tokens <= 0) throw Error(Errc::InvalidRequest, "max_new_tokens must be positive");
}

struct GenerationResponse {
  std::string text;
  std::string provider;
  std::int64_t latency_ms = 0;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenerationResponse generate(const GenerationRequest& req) = 0;
  virtual std::string name() const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One vector per input, in input order.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
};

/// Counting limiter bounding concurrent requests per provider.
class InflightLimiter {
 public:
  explicit InflightLimiter(int max_inflight) : available_(max_inflight < 1 ? 1 : max_inflight) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      ++available_;
    }
    cv_.notify_one();
  }

  class Slot {
   public:
    explicit Slot(InflightLimiter& l) : limiter_(l) { limiter_.acquire(); }
    ~Slot() { limiter_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InflightLimiter& limiter_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

/// Exponential backoff: base * 2^attempt, capped.
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_for(int attempt) const {
    auto d = base_delay;
    for (int i = 0; i < attempt && d < max_delay; ++i) d *= 2;
    return d < max_delay ? d : max_delay;
  }
};

/// Runs `call`, retrying transient failures (timeouts, 429, 5xx) per policy.
/// Non-transient errors propagate immediately.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& call) -> decltype(call()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return call();
    } catch (const Error& e) {
      if (!is_transient(e.code())) throw;
      if (attempt >= policy.max_retries) {
        if (policy.max_retries == 0) throw;
        throw Error(Errc::ExhaustedRetries,
                    std::to_string(policy.max_retries) + " retries exhausted; last error: " + e.what());
      }
      std::this_thread::sleep_for(policy.delay_for(attempt));
    }
  }
}

// ---------------------------------------------------------------------------
// mocks

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Canonical well-formed prediction block.
inline std::string canonical_block(int label, std::string_view explanation) {
  std::string out = "##PREDICTION: ";
  out += std::to_string(label);
  out += "\n##EXPLANATION: ";
  out += explanation;
  return out;
}

/// Table-driven generator. Lookup order: exact prompt table, then rules in
/// registration order (first non-empty answer wins), then a canonical
/// label-0 prediction block keyed on the prompt hash.
class MockGenerator final : public Generator {
 public:
  using Rule = std::function<std::optional<std::string>(const GenerationRequest&)>;

  explicit MockGenerator(std::uint64_t seed = 0, std::map<std::string, std::string> table = {})
      : seed_(seed), table_(std::move(table)) {}

  void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }

  GenerationResponse generate(const GenerationRequest& req) override {
    validate(req);
    if (auto it = table_.find(req.prompt); it != table_.end()) return {it->second, name(), 0};
    for (const auto& rule : rules_) {
      if (auto text = rule(req)) return {*text, name(), 0};
    }
    auto h = fnv1a64(req.prompt, fnv1a64(std::to_string(seed_)));
    return {canonical_block(0, "Mock explanation " + hex64(h) + "."), name(), 0};
  }

  std::string name() const override { return "mock"; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, std::string> table_;
  std::vector<Rule> rules_;
};

/// Unit-norm pseudo-embeddings from a keyed hash of the text.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::uint64_t seed = 0, std::size_t dimension = 384) : seed_(seed), dimension_(dimension) {
    if (dimension_ == 0) throw Error(Errc::InvalidRequest, "embedding dimension must be positive");
  }

  EmbeddingVector embed_one(std::string_view text) const {
    std::uint64_t key = seed_;
    std::uint64_t state = fnv1a64(text) ^ splitmix64(key);
    std::vector<double> v(dimension_);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& x : v) {
        // 53 random bits mapped to [-1, 1)
        x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
        norm2 += x * x;
      }
    } while (norm2 == 0.0);
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    return {std::move(v)};
  }

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) throw Error(Errc::EmptyBatch, "embed called with no texts");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "mock"; }

 private:
  std::uint64_t seed_;
  std::size_t dimension_;
};

}  // namespace nyaya
