#pragma once

// Classification metrics, sentence-level lexical metrics (ROUGE-L, BLEU,
// METEOR), G-Eval judge scoring and run aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nyaya/judgment.hpp"

namespace nyaya {

// ---------------------------------------------------------------------------
// classification

struct ClassificationReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  /// confusion[gold][predicted]; failed parses are not in the matrix.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::size_t n_failed_parse = 0;
  std::size_t n_total = 0;
};

/// A failed parse counts toward n_total and its gold class's recall
/// denominator but predicts no class. Per-class precision/recall/F1 with an
/// empty denominator is 0; macro values average over classes {0, 1}.
inline ClassificationReport classification_report(const std::vector<Prediction>& preds,
                                                   const std::map<std::string, Label>& gold) {
  ClassificationReport r;
  std::array<std::size_t, 2> gold_count{};
  for (const auto& p : preds) {
    auto it = gold.find(p.case_id);
    if (it == gold.end()) throw Error(Errc::MissingGold, p.case_id);
    int g = label_value(it->second);
    ++gold_count[g];
    ++r.n_total;
    if (p.label) ++r.confusion[g][label_value(*p.label)];
    else ++r.n_failed_parse;
  }
  if (r.n_total == 0) return r;

  std::size_t correct = r.confusion[0][0] + r.confusion[1][1];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_total);
  for (int c = 0; c < 2; ++c) {
    std::size_t tp = r.confusion[c][c];
    std::size_t predicted = r.confusion[0][c] + r.confusion[1][c];
    double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    double recall = gold_count[c] ? static_cast<double>(tp) / static_cast<double>(gold_count[c]) : 0.0;
    if (gold_count[c] == 0) precision = recall = 0.0;
    double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.macro_precision += precision / 2.0;
    r.macro_recall += recall / 2.0;
    r.macro_f1 += f1 / 2.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// lexical metrics; tokens are lowercase whitespace-separated segments

inline std::vector<std::string> metric_tokens(std::string_view text) { return split_whitespace(to_lower(text)); }

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace detail {

inline std::vector<std::string> reference_tokens(std::string_view reference) {
  auto ref = metric_tokens(reference);
  if (ref.empty()) throw Error(Errc::EmptyReference, "reference has no tokens");
  return ref;
}

struct SpanLess {
  bool operator()(std::span<const std::string> x, std::span<const std::string> y) const {
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
  }
};

}  // namespace detail

/// ROUGE-L F1 over LCS.
inline double rouge_l(std::string_view candidate, std::string_view reference) {
  auto ref = detail::reference_tokens(reference);
  auto cand = metric_tokens(candidate);
  auto lcs = lcs_length(cand, ref);
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(cand.size());
  double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

inline constexpr double kBleuEpsilon = 1e-9;

/// Sentence BLEU: geometric mean of clipped n-gram precisions for
/// n = 1..min(max_n, |candidate|), zero match counts replaced by epsilon,
/// times the brevity penalty exp(1 - r/c) when c < r.
inline double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n = 4) {
  auto ref = detail::reference_tokens(reference);
  auto cand = metric_tokens(candidate);
  if (cand.empty()) return 0.0;
  if (max_n == 0) throw Error(Errc::InvalidRequest, "max_n must be >= 1");

  auto order = std::min(max_n, cand.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    std::map<std::span<const std::string>, std::size_t, detail::SpanLess> ref_counts, cand_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[std::span<const std::string>(ref).subspan(i, n)];
    for (std::size_t i = 0; i + n <= cand.size(); ++i) ++cand_counts[std::span<const std::string>(cand).subspan(i, n)];
    std::size_t matches = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    double total = static_cast<double>(cand.size() - n + 1);
    double numerator = matches ? static_cast<double>(matches) : kBleuEpsilon;
    log_sum += std::log(numerator / total);
  }
  double bp = cand.size() < ref.size()
                  ? std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()))
                  : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(order));
}

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Greedy one-to-one exact alignment: each candidate token, left to right,
/// takes the earliest unused identical reference token. Chunks are maximal
/// runs adjacent in both sequences.
inline MeteorAlignment meteor_align(std::span<const std::string> cand, std::span<const std::string> ref) {
  std::vector<bool> used(ref.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && cand[i] == ref[j]) {
        used[j] = true;
        pairs.emplace_back(i, j);
        break;
      }
    }
  }
  MeteorAlignment a{pairs.size(), 0};
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (k == 0 || pairs[k].first != pairs[k - 1].first + 1 || pairs[k].second != pairs[k - 1].second + 1) ++a.chunks;
  }
  return a;
}

inline double meteor(std::string_view candidate, std::string_view reference, const MeteorParams& prm = {}) {
  auto ref = detail::reference_tokens(reference);
  auto cand = metric_tokens(candidate);
  auto a = meteor_align(cand, ref);
  if (a.matches == 0) return 0.0;
  double m = static_cast<double>(a.matches);
  double p = m / static_cast<double>(cand.size());
  double r = m / static_cast<double>(ref.size());
  double f_mean = p * r / (prm.alpha * p + (1.0 - prm.alpha) * r);
  double penalty = prm.gamma * std::pow(static_cast<double>(a.chunks) / m, prm.beta);
  return f_mean * (1.0 - penalty);
}

struct LexicalScores {
  double rouge_l = 0.0;
  double bleu = 0.0;
  double meteor = 0.0;
};

inline LexicalScores lexical_scores(std::string_view candidate, std::string_view reference) {
  return {rouge_l(candidate, reference), bleu(candidate, reference), meteor(candidate, reference)};
}

// ---------------------------------------------------------------------------
// G-Eval

inline constexpr std::string_view kGEvalHeader =
    "Instructions:\n"
    "You are an expert in legal text evaluation. You will be given:\n"
    "\n"
    "A document description that specifies the intended content of a generated legal explanation.\n"
    "An actual legal explanation that serves as the reference. A generated legal explanation that needs to be "
    "evaluated. Your task is to assess how well the generated explanation aligns with the given description while "
    "using the actual document as a reference for correctness.\n"
    "\n"
    "Evaluation Criteria (Unified Score: 1-10)\n"
    "Your evaluation should be based on the following factors:\n"
    "\n"
    "Factual Accuracy (50%) – Does the generated document correctly represent the key legal facts, reasoning, "
    "and outcomes from the original document, as expected from the description?\n"
    "Completeness & Coverage (30%) – Does it include all crucial legal arguments, case details, and necessary "
    "context that the description implies?\n"
    "Clarity & Coherence (20%) – Is the document well-structured, logically presented, and legally sound?\n"
    "\n"
    "Scoring Scale:\n"
    "1-3 → Highly inaccurate, major omissions or distortions, poorly structured.\n"
    "4-6 → Somewhat accurate but incomplete, missing key legal reasoning or context.\n"
    "7-9 → Mostly accurate, well-structured, with minor omissions or inconsistencies.\n"
    "10 → Fully aligned with the description, factually accurate, complete, and coherent.\n"
    "\n"
    "Input Format:\n"
    "Document Description:\n";

inline constexpr std::string_view kGEvalReferenceHeading = "Original Legal Document (Reference):\n";
inline constexpr std::string_view kGEvalGeneratedHeading = "Generated Legal Document (To Be Evaluated):\n";
inline constexpr std::string_view kGEvalOutputFormat =
    "Output Format:\n"
    "Strictly provide only a single integer score (1-10) as the response, with no explanations, comments, or "
    "additional text.";

inline constexpr std::string_view kDefaultDocDescription =
    "A legal explanation justifying the court's decision on whether the appeal should be accepted or rejected, "
    "grounded in the facts, the applicable statutes and the relevant precedents of the case.";

inline std::string build_geval_prompt(std::string_view doc_description, std::string_view actual, std::string_view generated) {
  if (doc_description.empty() || actual.empty() || generated.empty()) {
    throw Error(Errc::InvalidRequest, "G-Eval prompt slots must be non-empty");
  }
  std::string p(kGEvalHeader);
  p.append(doc_description).append("\n\n");
  p.append(kGEvalReferenceHeading).append(actual).append("\n\n");
  p.append(kGEvalGeneratedHeading).append(generated).append("\n\n");
  p.append(kGEvalOutputFormat);
  return p;
}

/// First standalone integer in [1, 10]: a digit run not glued to letters and
/// not part of a decimal number.
inline std::optional<int> parse_geval_integer(std::string_view text) {
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  for (std::size_t i = 0; i < text.size();) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    bool glued_before = i > 0 && (is_alpha(text[i - 1]) || (text[i - 1] == '.' && i > 1 && is_digit(text[i - 2])) ||
                                  text[i - 1] == '-');
    bool glued_after = j < text.size() && (is_alpha(text[j]) || (text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])));
    if (!glued_before && !glued_after && j - i <= 2) {
      int v = std::stoi(std::string(text.substr(i, j - i)));
      if (v >= 1 && v <= 10) return v;
    }
    i = j;
  }
  return std::nullopt;
}

struct GEvalScore {
  std::string item_id;
  int score = 0;
  std::string judge_model;
};

struct GEvalOptions {
  std::string judge_model = "gpt-4o-mini";
  double temperature = 0.2;
  double top_p = 0.9;
  int max_new_tokens = 16;
  int max_reasks = 2;
  std::string doc_description{kDefaultDocDescription};
};

inline GEvalScore geval_score(const std::string& item_id, std::string_view actual, std::string_view generated,
                              Generator& judge, const GEvalOptions& opt = {}) {
  auto prompt = build_geval_prompt(opt.doc_description, actual, generated);
  std::string last;
  for (int attempt = 0; attempt <= opt.max_reasks; ++attempt) {
    auto p = attempt == 0 ? prompt : prompt + "\n\nRespond with a single integer from 1 to 10 only.";
    last = judge.generate({p, opt.temperature, opt.top_p, opt.max_new_tokens, opt.judge_model}).text;
    if (auto v = parse_geval_integer(last)) return {item_id, *v, opt.judge_model};
  }
  throw Error(Errc::JudgeParseFailure, item_id + ": no integer in [1,10] after " + std::to_string(opt.max_reasks + 1) +
                                           " attempts; last reply: " + last);
}

// ---------------------------------------------------------------------------
// model-based scores behind a scoring service

enum class ModelScoreKind { BERTScore, BLANC };

inline std::string_view to_string(ModelScoreKind k) noexcept { return k == ModelScoreKind::BERTScore ? "BERTScore" : "BLANC"; }

class ModelScorer {
 public:
  virtual ~ModelScorer() = default;
  /// nullopt when the service is not configured.
  virtual std::optional<double> score(ModelScoreKind kind, std::string_view candidate, std::string_view reference) = 0;
};

// ---------------------------------------------------------------------------
// aggregation

struct ItemScores {
  std::string case_id;
  LexicalScores lexical;
  std::optional<int> geval;
  std::optional<double> bertscore;
  std::optional<double> blanc;
};

struct EvaluationReport {
  std::string run_id;
  std::string kind;
  std::string partition;
  ClassificationReport classification;
  std::optional<LexicalScores> lexical_mean;  ///< absent when no item was parseable
  std::optional<double> geval_mean;
  std::optional<double> bertscore_mean;  ///< absent when the scoring service is unavailable
  std::optional<double> blanc_mean;
  std::size_t n_scored = 0;    ///< items with parse status Ok or Recovered
  std::size_t n_excluded = 0;  ///< Failed items left out of explanation metrics
  std::vector<ItemScores> items;
};

struct AggregateOptions {
  Generator* judge = nullptr;
  GEvalOptions geval;
  ModelScorer* scorer = nullptr;
  /// False yields a classification-only report (no reference explanations available).
  bool explanation_metrics = true;
};

/// Classification over every prediction; explanation metrics over Ok and
/// Recovered predictions only. Results do not depend on prediction order.
inline EvaluationReport aggregate(const ExperimentRun& run, const std::map<std::string, Label>& gold,
                                  const std::map<std::string, std::string>& references, const AggregateOptions& opt = {}) {
  if (run.predictions.empty()) throw Error(Errc::EmptyRun, run.run_id);

  std::vector<const Prediction*> sorted;
  for (const auto& p : run.predictions) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->case_id < b->case_id; });

  EvaluationReport rep;
  rep.run_id = run.run_id;
  rep.kind = std::string(to_string(run.config.kind));
  rep.partition = std::string(to_string(run.partition));
  std::vector<Prediction> ordered;
  for (auto* p : sorted) ordered.push_back(*p);
  rep.classification = classification_report(ordered, gold);

  LexicalScores sum;
  double geval_sum = 0.0, bert_sum = 0.0, blanc_sum = 0.0;
  std::size_t n_bert = 0, n_blanc = 0;
  for (auto* p : sorted) {
    if (p->parse_status == ParseStatus::Failed) {
      ++rep.n_excluded;
      continue;
    }
    if (!opt.explanation_metrics) continue;
    auto ref = references.find(p->case_id);
    if (ref == references.end()) throw Error(Errc::MissingReference, p->case_id);

    ItemScores item{p->case_id, lexical_scores(p->explanation, ref->second), std::nullopt, std::nullopt, std::nullopt};
    sum.rouge_l += item.lexical.rouge_l;
    sum.bleu += item.lexical.bleu;
    sum.meteor += item.lexical.meteor;
    if (opt.judge) {
      std::string_view generated = p->explanation.empty() ? std::string_view(p->raw_output) : p->explanation;
      item.geval = geval_score(p->case_id, ref->second, generated, *opt.judge, opt.geval).score;
      geval_sum += *item.geval;
    }
    if (opt.scorer) {
      if ((item.bertscore = opt.scorer->score(ModelScoreKind::BERTScore, p->explanation, ref->second))) {
        bert_sum += *item.bertscore;
        ++n_bert;
      }
      if ((item.blanc = opt.scorer->score(ModelScoreKind::BLANC, p->explanation, ref->second))) {
        blanc_sum += *item.blanc;
        ++n_blanc;
      }
    }
    ++rep.n_scored;
    rep.items.push_back(std::move(item));
  }

  if (rep.n_scored) {
    double n = static_cast<double>(rep.n_scored);
    rep.lexical_mean = LexicalScores{sum.rouge_l / n, sum.bleu / n, sum.meteor / n};
    if (opt.judge) rep.geval_mean = geval_sum / n;
  }
  if (n_bert) rep.bertscore_mean = bert_sum / static_cast<double>(n_bert);
  if (n_blanc) rep.blanc_mean = blanc_sum / static_cast<double>(n_blanc);
  return rep;
}

inline json to_json(const ClassificationReport& c) {
  return {{"accuracy", c.accuracy},
          {"macro_precision", c.macro_precision},
          {"macro_recall", c.macro_recall},
          {"macro_f1", c.macro_f1},
          {"confusion", {{c.confusion[0][0], c.confusion[0][1]}, {c.confusion[1][0], c.confusion[1][1]}}},
          {"n_failed_parse", c.n_failed_parse},
          {"n_total", c.n_total}};
}

namespace detail {

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline json to_json(const EvaluationReport& r) {
  json j = {{"type", "report"},
            {"run_id", r.run_id},
            {"kind", r.kind},
            {"partition", r.partition},
            {"classification", to_json(r.classification)},
            {"n_scored", r.n_scored},
            {"n_excluded", r.n_excluded},
            {"geval", detail::opt_json(r.geval_mean)},
            {"bertscore", detail::opt_json(r.bertscore_mean)},
            {"blanc", detail::opt_json(r.blanc_mean)}};
  if (r.lexical_mean) {
    j["rouge_l"] = r.lexical_mean->rouge_l;
    j["bleu"] = r.lexical_mean->bleu;
    j["meteor"] = r.lexical_mean->meteor;
  } else {
    j["rouge_l"] = j["bleu"] = j["meteor"] = nullptr;
  }
  return j;
}

/// Summary record followed by one record per scored item.
inline void write_report_records(std::ostream& out, const EvaluationReport& r) {
  out << to_json(r).dump() << '\n';
  for (const auto& it : r.items) {
    out << json{{"type", "item"},
                {"case_id", it.case_id},
                {"rouge_l", it.lexical.rouge_l},
                {"bleu", it.lexical.bleu},
                {"meteor", it.lexical.meteor},
                {"geval", detail::opt_json(it.geval)},
                {"bertscore", detail::opt_json(it.bertscore)},
                {"blanc", detail::opt_json(it.blanc)}}
               .dump()
        << '\n';
  }
}

inline void write_report_table(std::ostream& out, const EvaluationReport& r) {
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  auto num = [](const std::optional<double>& v, int digits = 4) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << *v;
    return s.str();
  };
  const auto& c = r.classification;
  out << "run " << r.run_id << "  kind " << r.kind << "  partition " << r.partition << "\n";
  out << std::left << std::setw(18) << "metric" << "value\n";
  out << std::setw(18) << "accuracy" << pct(c.accuracy) << "\n";
  out << std::setw(18) << "macro precision" << pct(c.macro_precision) << "\n";
  out << std::setw(18) << "macro recall" << pct(c.macro_recall) << "\n";
  out << std::setw(18) << "macro F1" << pct(c.macro_f1) << "\n";
  out << std::setw(18) << "failed parses" << c.n_failed_parse << " / " << c.n_total << "\n";
  std::optional<double> rl, bl, me;
  if (r.lexical_mean) {
    rl = r.lexical_mean->rouge_l;
    bl = r.lexical_mean->bleu;
    me = r.lexical_mean->meteor;
  }
  out << std::setw(18) << "ROUGE-L" << num(rl) << "\n";
  out << std::setw(18) << "BLEU" << num(bl) << "\n";
  out << std::setw(18) << "METEOR" << num(me) << "\n";
  out << std::setw(18) << "BERTScore" << num(r.bertscore_mean) << "\n";
  out << std::setw(18) << "BLANC" << num(r.blanc_mean) << "\n";
  out << std::setw(18) << "G-Eval" << num(r.geval_mean, 2) << "\n";
  out << std::setw(18) << "scored items" << r.n_scored << " (excluded " << r.n_excluded << ")\n";
}

/// Line-delimited {id, explanation} records of reference explanations.
inline std::map<std::string, std::string> load_references(std::istream& in) {
  std::map<std::string, std::string> refs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      refs[j.at("id").get<std::string>()] = j.at("explanation").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedRecord, "references line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return refs;
}

inline std::map<std::string, Label> gold_labels(const std::vector<CaseDocument>& docs) {
  std::map<std::string, Label> gold;
  for (const auto& d : docs) {
    if (d.gold_label) gold[d.id] = *d.gold_label;
  }
  return gold;
}

}  // namespace nyaya
