#pragma once

// BERTScore/BLANC through an external scoring service:
//   POST {url}/score {kind, candidate, reference} -> {score: real}

#include <cmath>
#include <memory>
#include <optional>

#include "nyaya/evaluation.hpp"
#include "nyaya/http_gateway.hpp"

namespace nyaya {

class ScoringClient final : public ModelScorer {
 public:
  /// An empty base_url leaves the client unconfigured: every score is unavailable.
  explicit ScoringClient(ProviderConfig cfg) {
    if (!cfg.base_url.empty()) client_ = std::make_unique<HttpJsonClient>(std::move(cfg));
  }

  bool configured() const noexcept { return client_ != nullptr; }

  std::optional<double> score(ModelScoreKind kind, std::string_view candidate, std::string_view reference) override {
    if (!client_) return std::nullopt;
    auto reply = client_->post("/score", {{"kind", std::string(to_string(kind))},
                                          {"candidate", std::string(candidate)},
                                          {"reference", std::string(reference)}});
    auto it = reply.is_object() ? reply.find("score") : reply.end();
    if (it == reply.end() || !it->is_number() || !std::isfinite(it->get<double>())) {
      throw Error(Errc::MalformedProviderResponse, "/score: missing numeric field 'score'");
    }
    return it->get<double>();
  }

 private:
  std::unique_ptr<HttpJsonClient> client_;
};

}  // namespace nyaya
