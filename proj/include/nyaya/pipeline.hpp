#pragma once

// Context assembly for the seven pipeline kinds under a proxy-token budget.
//
// Canonical section order: base (case summary or facts), statutes,
// precedents, similar cases.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nyaya/corpus.hpp"
#include "nyaya/retrieval.hpp"
#include "nyaya/summarizer.hpp"

namespace nyaya {

enum class PipelineKind {
  CaseTextOnly,
  CaseTextStatutes,
  CaseTextPrecedents,
  CaseTextSimilar,
  CaseTextStatutesPrecedents,
  FactsOnly,
  FactsStatutesPrecedents,
};

inline constexpr std::array<PipelineKind, 7> kAllPipelines = {
    PipelineKind::CaseTextOnly,        PipelineKind::CaseTextStatutes,
    PipelineKind::CaseTextPrecedents,  PipelineKind::CaseTextSimilar,
    PipelineKind::CaseTextStatutesPrecedents, PipelineKind::FactsOnly,
    PipelineKind::FactsStatutesPrecedents,
};

inline std::string_view to_string(PipelineKind k) noexcept {
  switch (k) {
    case PipelineKind::CaseTextOnly: return "CaseTextOnly";
    case PipelineKind::CaseTextStatutes: return "CaseTextStatutes";
    case PipelineKind::CaseTextPrecedents: return "CaseTextPrecedents";
    case PipelineKind::CaseTextSimilar: return "CaseTextSimilar";
    case PipelineKind::CaseTextStatutesPrecedents: return "CaseTextStatutesPrecedents";
    case PipelineKind::FactsOnly: return "FactsOnly";
    case PipelineKind::FactsStatutesPrecedents: return "FactsStatutesPrecedents";
  }
  return "CaseTextOnly";
}

inline std::optional<PipelineKind> parse_pipeline_kind(std::string_view s) noexcept {
  for (auto k : kAllPipelines) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

enum class SectionLabel { CaseSummary, Facts, Statute, Precedent, SimilarCase };

inline std::string_view to_string(SectionLabel l) noexcept {
  switch (l) {
    case SectionLabel::CaseSummary: return "CaseSummary";
    case SectionLabel::Facts: return "Facts";
    case SectionLabel::Statute: return "Statute";
    case SectionLabel::Precedent: return "Precedent";
    case SectionLabel::SimilarCase: return "SimilarCase";
  }
  return "CaseSummary";
}

inline bool uses_facts(PipelineKind k) noexcept {
  return k == PipelineKind::FactsOnly || k == PipelineKind::FactsStatutesPrecedents;
}

inline bool uses_statutes(PipelineKind k) noexcept {
  return k == PipelineKind::CaseTextStatutes || k == PipelineKind::CaseTextStatutesPrecedents ||
         k == PipelineKind::FactsStatutesPrecedents;
}

inline bool uses_precedents(PipelineKind k) noexcept {
  return k == PipelineKind::CaseTextPrecedents || k == PipelineKind::CaseTextStatutesPrecedents ||
         k == PipelineKind::FactsStatutesPrecedents;
}

inline bool uses_similar(PipelineKind k) noexcept { return k == PipelineKind::CaseTextSimilar; }

/// The section labels a kind is declared to produce.
inline std::set<SectionLabel> declared_labels(PipelineKind k) {
  std::set<SectionLabel> s{uses_facts(k) ? SectionLabel::Facts : SectionLabel::CaseSummary};
  if (uses_statutes(k)) s.insert(SectionLabel::Statute);
  if (uses_precedents(k)) s.insert(SectionLabel::Precedent);
  if (uses_similar(k)) s.insert(SectionLabel::SimilarCase);
  return s;
}

struct PipelineConfig {
  PipelineKind kind = PipelineKind::CaseTextOnly;
  std::size_t k = 3;
  std::size_t context_budget = 8000;
  std::size_t statute_budget = 300;
  /// Facts pipelines read the stored Facts summary, or the raw facts_text when false.
  bool facts_from_summary = true;
};

inline void validate(const PipelineConfig& cfg) {
  if (cfg.k < 1) throw Error(Errc::FatalConfig, "k must be >= 1");
  if (cfg.context_budget == 0 || cfg.statute_budget == 0) throw Error(Errc::FatalConfig, "budgets must be positive");
}

struct Section {
  SectionLabel label = SectionLabel::CaseSummary;
  std::string text;

  bool operator==(const Section&) const = default;
};

struct AssembledContext {
  std::string case_id;
  std::vector<Section> sections;
  std::size_t total_tokens = 0;
  /// Set when the base section itself had to be cut to fit the budget.
  bool base_truncated = false;

  std::set<SectionLabel> labels() const {
    std::set<SectionLabel> s;
    for (const auto& sec : sections) s.insert(sec.label);
    return s;
  }
};

inline constexpr std::string_view kTruncationMarker = "[TRUNCATED]";

struct TruncationResult {
  std::vector<Section> sections;
  bool base_truncated = false;
};

namespace detail {

/// Cuts `text` to `keep` content tokens and appends the marker, so the
/// section counts exactly keep + 1 tokens.
inline std::string cut_with_marker(std::string_view text, std::size_t keep) {
  std::string out(truncate_tokens(text, keep));
  if (!out.empty()) out += ' ';
  out += kTruncationMarker;
  return out;
}

}  // namespace detail

/// Enforces `budget` by shortening or dropping auxiliary sections from the
/// last one backward. The base section (index 0) is never dropped; it is
/// only cut, as a last resort, when it alone overflows. A cut section keeps
/// a token prefix and the marker, and the marker counts toward the budget.
inline TruncationResult truncate_to_budget(std::vector<Section> sections, std::size_t budget) {
  if (sections.empty()) throw Error(Errc::EmptyContext, "no sections to truncate");
  std::vector<std::size_t> tokens;
  std::size_t total = 0;
  for (const auto& s : sections) {
    tokens.push_back(estimate_tokens(s.text));
    total += tokens.back();
  }

  while (total > budget && sections.size() > 1) {
    std::size_t excess = total - budget;
    std::size_t last = tokens.back();
    // room for at least one content token plus the marker
    if (last > excess && last - excess >= 2) {
      std::size_t keep = last - excess - 1;
      sections.back().text = detail::cut_with_marker(sections.back().text, keep);
      total -= last;
      tokens.back() = keep + 1;
      total += tokens.back();
      break;
    }
    total -= last;
    sections.pop_back();
    tokens.pop_back();
  }

  TruncationResult result{std::move(sections), false};
  if (total > budget) {
    if (budget < 2) throw Error(Errc::EmptyContext, "budget cannot hold any base text");
    result.sections.front().text = detail::cut_with_marker(result.sections.front().text, budget - 1);
    result.base_truncated = true;
  }
  return result;
}

using CorpusStore = std::map<std::string, CaseDocument>;

inline CorpusStore make_corpus_store(const std::vector<CaseDocument>& docs) {
  CorpusStore store;
  for (const auto& d : docs) store.emplace(d.id, d);
  return store;
}

namespace detail {

inline std::string reference_text(const std::string& title, const std::string& body) {
  if (title.empty()) return body;
  if (body.empty()) return title;
  return title + "\n" + body;
}

}  // namespace detail

struct AssemblyInputs {
  const SummaryStore& summaries;
  const CorpusStore& corpus;
  const VectorIndex* index = nullptr;
  /// Used to embed the query document when it is not itself in the index.
  Embedder* embedder = nullptr;
};

/// Builds the ordered, budgeted context for `doc` under `cfg.kind`.
inline AssembledContext assemble_context(const CaseDocument& doc, const PipelineConfig& cfg, const AssemblyInputs& in) {
  validate(cfg);
  std::vector<Section> sections;

  if (uses_facts(cfg.kind)) {
    if (cfg.facts_from_summary) {
      const auto* s = in.summaries.find(SummaryKind::Facts, doc.id);
      if (!s) throw Error(Errc::MissingSummary, doc.id + " (Facts)");
      sections.push_back({SectionLabel::Facts, s->text});
    } else {
      if (trim(doc.facts_text).empty()) throw Error(Errc::MissingFacts, doc.id);
      sections.push_back({SectionLabel::Facts, doc.facts_text});
    }
  } else {
    const auto* s = in.summaries.find(SummaryKind::CaseText, doc.id);
    if (!s) throw Error(Errc::MissingSummary, doc.id + " (CaseText)");
    sections.push_back({SectionLabel::CaseSummary, s->text});
  }
  if (trim(sections.front().text).empty()) throw Error(Errc::EmptyContext, doc.id + ": base text empty");

  if (uses_statutes(cfg.kind)) {
    for (const auto& st : doc.statutes) {
      std::string body;
      if (const auto* s = in.summaries.find(SummaryKind::Statute, st.id)) {
        body = s->text;
      } else if (!st.text.empty() && estimate_tokens(st.text) <= cfg.statute_budget) {
        body = st.text;
      } else if (!st.text.empty()) {
        throw Error(Errc::MissingSummary, st.id + " (Statute over budget)");
      }
      if (body.empty() && st.title.empty()) continue;
      sections.push_back({SectionLabel::Statute, detail::reference_text(st.title, body)});
    }
  }

  if (uses_precedents(cfg.kind)) {
    for (const auto& p : doc.precedents) {
      const auto* s = in.summaries.find(SummaryKind::Precedent, p.id);
      std::string body = s ? s->text : p.text;
      if (body.empty() && p.title.empty()) continue;
      sections.push_back({SectionLabel::Precedent, detail::reference_text(p.title, body)});
    }
  }

  if (uses_similar(cfg.kind)) {
    if (in.index == nullptr) throw Error(Errc::MissingIndex, "CaseTextSimilar requires a vector index");
    EmbeddingVector query;
    if (auto stored = in.index->find(doc.id)) {
      query = std::move(*stored);
    } else if (in.embedder != nullptr) {
      query = in.embedder->embed({sections.front().text}).front();
    } else {
      throw Error(Errc::MissingIndex, doc.id + " is not indexed and no embedder is available");
    }
    QueryOptions opt;
    opt.exclude_id = doc.id;
    for (const auto& n : query_top_k(*in.index, query, cfg.k, opt)) {
      const auto* s = in.summaries.find(SummaryKind::CaseText, n.id);
      if (!s) throw Error(Errc::MissingSummary, n.id + " (CaseText, similar case)");
      sections.push_back({SectionLabel::SimilarCase, s->text});
    }
  }

  auto cut = truncate_to_budget(std::move(sections), cfg.context_budget);
  AssembledContext ctx{doc.id, std::move(cut.sections), 0, cut.base_truncated};
  for (const auto& s : ctx.sections) ctx.total_tokens += estimate_tokens(s.text);
  return ctx;
}

/// Audit record: case id, kind, section labels and per-section token counts.
inline json audit_record(const AssembledContext& ctx, PipelineKind kind) {
  json labels = json::array(), counts = json::array();
  for (const auto& s : ctx.sections) {
    labels.push_back(std::string(to_string(s.label)));
    counts.push_back(estimate_tokens(s.text));
  }
  return {{"case_id", ctx.case_id},
          {"kind", std::string(to_string(kind))},
          {"labels", std::move(labels)},
          {"token_counts", std::move(counts)},
          {"total_tokens", ctx.total_tokens},
          {"base_truncated", ctx.base_truncated}};
}

}  // namespace nyaya
