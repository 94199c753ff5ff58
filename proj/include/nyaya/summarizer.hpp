#pragma once

// Length-bounded summaries of judgments and statutes through the generation
// gateway, plus the line-delimited summary store.

#include <fstream>
#include <map>
#include <string>
#include <utility>

#include "nyaya/corpus.hpp"
#include "nyaya/gateway.hpp"

namespace nyaya {

inline constexpr std::string_view kSummaryInstruction =
    "The text is regarding a court judgment for a specific case. Summarize it into 1000 tokens but more than 700 "
    "tokens. The summarization should highlight the Facts, Issues, Statutes, Ratio of the decision, Ruling by "
    "Present Court (Decision), and a Conclusion.";

inline constexpr std::size_t kDefaultTruncationTokens = 27000;

struct SummarizerOptions {
  std::string model = "mixtral-8x7b-instruct-v0.1";
  double temperature = 0.2;
  double top_p = 0.9;
  int max_new_tokens = 1400;
  std::size_t truncate_tokens = kDefaultTruncationTokens;
  std::size_t min_tokens = 700;
  std::size_t max_tokens = 1000;
};

/// Instruction, blank line, then the document cut to `truncate_tokens` proxy tokens.
inline std::string build_summary_prompt(std::string_view doc_text, std::size_t truncate_at = kDefaultTruncationTokens) {
  if (trim(doc_text).empty()) throw Error(Errc::MissingText, "document text empty");
  std::string prompt(kSummaryInstruction);
  prompt += "\n\n";
  prompt += truncate_tokens(doc_text, truncate_at);
  return prompt;
}

inline std::string corrective_suffix(std::size_t got, std::size_t min_tokens, std::size_t max_tokens) {
  return "\n\nYour previous answer had " + std::to_string(got) + " tokens; produce between " +
         std::to_string(min_tokens) + " and " + std::to_string(max_tokens) + " tokens.";
}

namespace detail {

inline GenerationRequest summary_request(std::string prompt, const SummarizerOptions& opt) {
  return {std::move(prompt), opt.temperature, opt.top_p, opt.max_new_tokens, opt.model};
}

}  // namespace detail

/// Summarizes the case text or facts of `doc`. An out-of-band length earns
/// exactly one corrective re-request; the second answer is kept either way.
inline Summary summarize(const CaseDocument& doc, SummaryKind kind, Generator& gen, const SummarizerOptions& opt = {}) {
  std::string_view source;
  if (kind == SummaryKind::CaseText) {
    source = doc.case_text;
    if (trim(source).empty()) throw Error(Errc::MissingText, doc.id + ": case_text empty");
  } else if (kind == SummaryKind::Facts) {
    source = doc.facts_text;
    if (trim(source).empty()) throw Error(Errc::MissingFacts, doc.id);
  } else {
    throw Error(Errc::InvalidRequest, "summarize handles CaseText and Facts only");
  }

  auto prompt = build_summary_prompt(source, opt.truncate_tokens);
  auto first = gen.generate(detail::summary_request(prompt, opt));
  auto in_band = [&](std::size_t n) { return n >= opt.min_tokens && n <= opt.max_tokens; };

  auto n = estimate_tokens(first.text);
  if (in_band(n)) return make_summary(doc.id, kind, std::move(first.text), false);

  auto second = gen.generate(detail::summary_request(prompt + corrective_suffix(n, opt.min_tokens, opt.max_tokens), opt));
  bool out_of_band = !in_band(estimate_tokens(second.text));
  return make_summary(doc.id, kind, std::move(second.text), out_of_band);
}

/// Statute or precedent text: passed through unchanged within `budget`,
/// otherwise summarized with a single gateway call.
inline Summary summarize_reference(const std::string& source_id, SummaryKind kind, const std::string& text,
                                   std::size_t budget, Generator& gen, const SummarizerOptions& opt = {}) {
  if (text.empty()) throw Error(Errc::MissingText, source_id);
  if (estimate_tokens(text) <= budget) return make_summary(source_id, kind, text, false);
  auto reply = gen.generate(detail::summary_request(build_summary_prompt(text, opt.truncate_tokens), opt));
  return make_summary(source_id, kind, std::move(reply.text), estimate_tokens(reply.text) > budget);
}

inline Summary summarize_statute(const StatuteRef& s, std::size_t budget, Generator& gen, const SummarizerOptions& opt = {}) {
  return summarize_reference(s.id, SummaryKind::Statute, s.text, budget, gen, opt);
}

/// Summaries keyed by (kind, source id). Later inserts replace earlier ones.
class SummaryStore {
 public:
  void put(Summary s) {
    auto key = std::make_pair(s.kind, s.source_id);
    entries_.insert_or_assign(std::move(key), std::move(s));
  }

  const Summary* find(SummaryKind kind, const std::string& id) const {
    auto it = entries_.find({kind, id});
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool contains(SummaryKind kind, const std::string& id) const { return find(kind, id) != nullptr; }
  std::size_t size() const noexcept { return entries_.size(); }

  void save(std::ostream& out) const {
    for (const auto& [key, s] : entries_) out << to_json(s).dump() << '\n';
  }

  static SummaryStore load(std::istream& in) {
    SummaryStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        store.put(summary_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw Error(Errc::MalformedRecord, "summary line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return store;
  }

 private:
  std::map<std::pair<SummaryKind, std::string>, Summary> entries_;
};

}  // namespace nyaya
