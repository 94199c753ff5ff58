#pragma once

// Seeded offline generator answering summary, G-Eval and prediction prompts.

#include <memory>
#include <string>
#include <string_view>

#include "nyaya/evaluation.hpp"
#include "nyaya/judgment.hpp"
#include "nyaya/summarizer.hpp"

namespace nyaya {

inline constexpr std::size_t kMockSummaryTokens = 800;

/// Mock generator that answers each prompt family in its expected shape:
///  - summary prompts: 800 tokens cycled from the source text
///  - G-Eval prompts: an integer in [1, 10]
///  - prediction prompts: a canonical block whose label and wording derive
///    from a keyed hash of the prompt and the case context
inline std::unique_ptr<MockGenerator> standard_mock(std::uint64_t seed) {
  auto gen = std::make_unique<MockGenerator>(seed);
  const auto key = fnv1a64("nyaya-mock:" + std::to_string(seed));

  gen->add_rule([](const GenerationRequest& req) -> std::optional<std::string> {
    if (!req.prompt.starts_with(kSummaryInstruction)) return std::nullopt;
    auto source = std::string_view(req.prompt).substr(kSummaryInstruction.size() + 2);
    if (auto suffix = source.find("\n\nYour previous answer had"); suffix != std::string_view::npos) {
      source = source.substr(0, suffix);
    }
    auto words = split_whitespace(source);
    if (words.empty()) words.push_back("summary");
    std::string out;
    for (std::size_t i = 0; i < kMockSummaryTokens; ++i) {
      if (i) out += ' ';
      out += words[i % words.size()];
    }
    return out;
  });

  gen->add_rule([key](const GenerationRequest& req) -> std::optional<std::string> {
    if (!req.prompt.starts_with(kGEvalHeader)) return std::nullopt;
    return std::to_string(1 + fnv1a64(req.prompt, key) % 10);
  });

  gen->add_rule([key](const GenerationRequest& req) -> std::optional<std::string> {
    if (!req.prompt.starts_with(kPredictionTask)) return std::nullopt;
    std::string_view context = req.prompt;
    constexpr std::string_view head = "Case proceedings: ";
    if (auto at = context.find(head); at != std::string_view::npos) {
      context = context.substr(at + head.size());
      if (auto nl = context.find('\n'); nl != std::string_view::npos) context = context.substr(nl + 1);
    }
    auto h = fnv1a64(req.prompt, key);
    int label = static_cast<int>((h >> 17) & 1);
    std::string expl = label ? "The appeal is accepted." : "The appeal is rejected.";
    expl += " The decision rests on ";
    expl += truncate_tokens(context, 24);
    return canonical_block(label, expl);
  });
  return gen;
}

}  // namespace nyaya
