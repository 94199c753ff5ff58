#pragma once

// Judgment data model and line-delimited corpus ingestion.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "nyaya/error.hpp"
#include "nyaya/text.hpp"

namespace nyaya {

using json = nlohmann::json;

enum class Partition { Single, Multi };
enum class Label { Rejected = 0, Accepted = 1 };

inline std::string_view to_string(Partition p) noexcept { return p == Partition::Single ? "Single" : "Multi"; }

inline std::optional<Partition> parse_partition(std::string_view s) noexcept {
  if (s == "Single") return Partition::Single;
  if (s == "Multi") return Partition::Multi;
  return std::nullopt;
}

inline int label_value(Label l) noexcept { return static_cast<int>(l); }

struct StatuteRef {
  std::string id;
  std::string title;
  std::string text;
  bool text_missing = false;

  bool operator==(const StatuteRef&) const = default;
};

struct PrecedentRef {
  std::string id;
  std::string title;
  std::string text;

  bool operator==(const PrecedentRef&) const = default;
};

struct CaseDocument {
  std::string id;
  Partition partition = Partition::Single;
  std::string case_text;
  std::string facts_text;
  std::vector<StatuteRef> statutes;
  std::vector<PrecedentRef> precedents;
  std::optional<Label> gold_label;
  std::optional<std::string> decision_date;

  bool operator==(const CaseDocument&) const = default;
};

enum class SummaryKind { CaseText, Facts, Statute, Precedent };

inline std::string_view to_string(SummaryKind k) noexcept {
  switch (k) {
    case SummaryKind::CaseText: return "CaseText";
    case SummaryKind::Facts: return "Facts";
    case SummaryKind::Statute: return "Statute";
    case SummaryKind::Precedent: return "Precedent";
  }
  return "CaseText";
}

inline std::optional<SummaryKind> parse_summary_kind(std::string_view s) noexcept {
  if (s == "CaseText") return SummaryKind::CaseText;
  if (s == "Facts") return SummaryKind::Facts;
  if (s == "Statute") return SummaryKind::Statute;
  if (s == "Precedent") return SummaryKind::Precedent;
  return std::nullopt;
}

struct Summary {
  std::string source_id;
  SummaryKind kind = SummaryKind::CaseText;
  std::string text;
  std::size_t token_count = 0;
  bool out_of_band = false;

  bool operator==(const Summary&) const = default;
};

inline Summary make_summary(std::string source_id, SummaryKind kind, std::string text, bool out_of_band = false) {
  Summary s{std::move(source_id), kind, std::move(text), 0, out_of_band};
  s.token_count = estimate_tokens(s.text);
  return s;
}

// ---------------------------------------------------------------------------
// validation

namespace detail {

inline bool is_iso_date(std::string_view s) noexcept {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  int month = (s[5] - '0') * 10 + (s[6] - '0');
  int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace detail

using ValidationReport = std::vector<std::string>;

/// Lists every broken CaseDocument invariant; empty means valid.
/// Id uniqueness is a corpus-level property and is checked by parse_corpus.
inline ValidationReport validate_document(const CaseDocument& doc) {
  ValidationReport report;
  if (doc.id.empty()) report.emplace_back("id empty");
  if (doc.case_text.empty()) report.emplace_back("case_text empty");
  for (std::size_t i = 0; i < doc.statutes.size(); ++i) {
    const auto& s = doc.statutes[i];
    if (s.id.empty()) report.push_back("statute " + std::to_string(i) + " id empty");
    if (s.text.empty() && !s.text_missing) {
      report.push_back("statute " + std::to_string(i) + " text empty without text_missing flag");
    }
  }
  for (std::size_t i = 0; i < doc.precedents.size(); ++i) {
    if (doc.precedents[i].id.empty()) report.push_back("precedent " + std::to_string(i) + " id empty");
  }
  if (doc.decision_date && !detail::is_iso_date(*doc.decision_date)) {
    report.push_back("decision_date not ISO-8601: " + *doc.decision_date);
  }
  return report;
}

// ---------------------------------------------------------------------------
// record format

inline json to_json(const CaseDocument& doc) {
  json statutes = json::array();
  for (const auto& s : doc.statutes) {
    json j = {{"id", s.id}, {"title", s.title}, {"text", s.text}};
    if (s.text_missing) j["text_missing"] = true;
    statutes.push_back(std::move(j));
  }
  json precedents = json::array();
  for (const auto& p : doc.precedents) {
    precedents.push_back({{"id", p.id}, {"title", p.title}, {"text", p.text}});
  }
  json j = {{"id", doc.id},
            {"partition", std::string(to_string(doc.partition))},
            {"case_text", doc.case_text},
            {"facts_text", doc.facts_text},
            {"statutes", std::move(statutes)},
            {"precedents", std::move(precedents)}};
  j["gold_label"] = doc.gold_label ? json(label_value(*doc.gold_label)) : json(nullptr);
  j["decision_date"] = doc.decision_date ? json(*doc.decision_date) : json(nullptr);
  return j;
}

namespace detail {

inline std::string require_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' missing or not a string");
  return it->get<std::string>();
}

inline std::string optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' not a string");
  return it->get<std::string>();
}

inline const json& optional_array(const json& j, const char* key) {
  static const json empty = json::array();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return empty;
  if (!it->is_array()) throw std::invalid_argument(std::string("field '") + key + "' not an array");
  return *it;
}

}  // namespace detail

/// Decodes one record; throws std::invalid_argument describing the first problem.
inline CaseDocument document_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  CaseDocument doc;
  doc.id = detail::require_string(j, "id");
  auto partition = parse_partition(detail::require_string(j, "partition"));
  if (!partition) throw std::invalid_argument("partition must be Single or Multi");
  doc.partition = *partition;
  doc.case_text = detail::require_string(j, "case_text");
  doc.facts_text = detail::optional_string(j, "facts_text");
  for (const auto& s : detail::optional_array(j, "statutes")) {
    StatuteRef ref{detail::require_string(s, "id"), detail::optional_string(s, "title"),
                   detail::optional_string(s, "text"), false};
    if (auto it = s.find("text_missing"); it != s.end() && !it->is_null()) {
      if (!it->is_boolean()) throw std::invalid_argument("text_missing not a boolean");
      ref.text_missing = it->get<bool>();
    }
    doc.statutes.push_back(std::move(ref));
  }
  for (const auto& p : detail::optional_array(j, "precedents")) {
    doc.precedents.push_back(
        {detail::require_string(p, "id"), detail::optional_string(p, "title"), detail::optional_string(p, "text")});
  }
  if (auto it = j.find("gold_label"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw std::invalid_argument("gold_label must be 0 or 1");
    auto v = it->get<long long>();
    if (v != 0 && v != 1) throw std::invalid_argument("gold_label must be 0 or 1");
    doc.gold_label = static_cast<Label>(v);
  }
  if (auto it = j.find("decision_date"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("decision_date not a string");
    doc.decision_date = it->get<std::string>();
  }
  return doc;
}

/// Reads line-delimited document records. Blank lines are skipped; line
/// numbers in errors are 1-based.
inline std::vector<CaseDocument> parse_corpus(std::istream& in) {
  std::vector<CaseDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    CaseDocument doc;
    try {
      doc = document_from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (auto report = validate_document(doc); !report.empty()) {
      throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": " + report.front());
    }
    if (!seen.insert(doc.id).second) throw Error(Errc::DuplicateId, doc.id);
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline void serialize_corpus(std::ostream& out, const std::vector<CaseDocument>& docs) {
  for (const auto& d : docs) out << to_json(d).dump() << '\n';
}

// ---------------------------------------------------------------------------
// summaries

inline json to_json(const Summary& s) {
  return {{"source_id", s.source_id},
          {"kind", std::string(to_string(s.kind))},
          {"text", s.text},
          {"token_count", s.token_count},
          {"out_of_band", s.out_of_band}};
}

inline Summary summary_from_json(const json& j) {
  auto kind = parse_summary_kind(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown summary kind");
  Summary s{j.at("source_id").get<std::string>(), *kind, j.at("text").get<std::string>(),
            j.at("token_count").get<std::size_t>(), j.value("out_of_band", false)};
  if (s.token_count != estimate_tokens(s.text)) throw std::invalid_argument("token_count does not match text");
  return s;
}

}  // namespace nyaya
