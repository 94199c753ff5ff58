#pragma once

// Few-shot prediction prompts, the ##PREDICTION/##EXPLANATION output
// protocol, and whole-partition experiment runs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "nyaya/pipeline.hpp"

namespace nyaya {

struct FewShotExample {
  std::string case_proceeding;
  Label prediction = Label::Rejected;
  std::string explanation;
  /// Corpus id the example was drawn from, when known; used by the leakage guard.
  std::string source_id;
};

inline std::vector<FewShotExample> load_shots(std::istream& in) {
  std::vector<FewShotExample> shots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      auto p = j.at("prediction").get<int>();
      if (p != 0 && p != 1) throw std::invalid_argument("prediction must be 0 or 1");
      FewShotExample ex{j.at("case_proceeding").get<std::string>(), static_cast<Label>(p),
                        j.at("explanation").get<std::string>(), j.value("source_id", std::string())};
      if (trim(ex.explanation).empty()) throw std::invalid_argument("explanation empty");
      shots.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedRecord, "shots line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return shots;
}

// ---------------------------------------------------------------------------
// prompt

inline constexpr std::string_view kPredictionTask =
    "Task: Your task is to evaluate whether the appeal should be accepted (1) or rejected (0) based on the case "
    "proceedings provided below..";

inline constexpr std::string_view kPredictionRole =
    "Prediction: You are a legal expert tasked with making a judgment about whether an appeal should be accepted or "
    "rejected based on the provided summary of the (case/facts) along with (Precedents/statutes/both) depending on "
    "the pipeline. Your task is to evaluate whether the appeal should be accepted (1) or rejected (0) based on the "
    "case proceedings provided below.";

inline constexpr std::string_view kPredictionLead = "Instructions: ### Now, evaluate the following case:";

inline constexpr std::string_view kPredictionFormat =
    "Provide your judgment by strictly following this format:\n"
    "\n"
    "##PREDICTION: [Insert your prediction here]\n"
    "##EXPLANATION: [Insert your reasoning here that led you to your prediction.]\n"
    "\n"
    "Strictly do not include anything outside this format. Strictly follow the provided format. Do not generate "
    "placeholders like [Insert your prediction here]. Just provide the final judgment and explanation. Do not "
    "hallucinate/repeat the same sentence again and again";

inline std::string_view section_heading(SectionLabel l) noexcept {
  switch (l) {
    case SectionLabel::CaseSummary: return "Case Summary:";
    case SectionLabel::Facts: return "Facts:";
    case SectionLabel::Statute: return "Statute:";
    case SectionLabel::Precedent: return "Precedent:";
    case SectionLabel::SimilarCase: return "Previous Similar Case:";
  }
  return "";
}

inline std::string render_context(const AssembledContext& ctx) {
  std::string out;
  for (std::size_t i = 0; i < ctx.sections.size(); ++i) {
    if (i) out += "\n\n";
    out += section_heading(ctx.sections[i].label);
    out += '\n';
    out += ctx.sections[i].text;
  }
  return out;
}

inline std::string build_prediction_prompt(const AssembledContext& ctx, const std::vector<FewShotExample>& shots) {
  std::string p;
  p += kPredictionTask;
  p += "\n\n";
  p += kPredictionRole;
  p += "\n\n";
  for (const auto& s : shots) {
    p += "case_proceeding: " + s.case_proceeding + "\n";
    p += "Prediction: " + std::to_string(label_value(s.prediction)) + "\n";
    p += "Explanation: " + s.explanation + "\n\n";
  }
  p += kPredictionLead;
  p += "\n\nCase proceedings: ";
  p += render_context(ctx);
  p += "\n\n";
  p += kPredictionFormat;
  return p;
}

// ---------------------------------------------------------------------------
// output protocol

enum class ParseStatus { Ok, Recovered, Failed };

inline std::string_view to_string(ParseStatus s) noexcept {
  switch (s) {
    case ParseStatus::Ok: return "Ok";
    case ParseStatus::Recovered: return "Recovered";
    case ParseStatus::Failed: return "Failed";
  }
  return "Failed";
}

inline std::optional<ParseStatus> parse_parse_status(std::string_view s) noexcept {
  if (s == "Ok") return ParseStatus::Ok;
  if (s == "Recovered") return ParseStatus::Recovered;
  if (s == "Failed") return ParseStatus::Failed;
  return std::nullopt;
}

struct ParsedOutput {
  std::optional<Label> label;
  std::string explanation;
  ParseStatus status = ParseStatus::Failed;

  bool operator==(const ParsedOutput&) const = default;
};

inline constexpr std::string_view kPredictionMarker = "##PREDICTION:";
inline constexpr std::string_view kExplanationMarker = "##EXPLANATION:";

namespace detail {

inline bool is_alnum(char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline std::string_view strip_leading(std::string_view s, std::string_view chars) noexcept {
  while (!s.empty() && chars.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  return s;
}

}  // namespace detail

/// Reads a label from the start of `token`: 0/1, or rejected / accepted /
/// partially accepted (any case), optionally wrapped in brackets or quotes.
inline std::optional<Label> parse_label_token(std::string_view token) {
  auto s = detail::strip_leading(trim(token), "{[(\"'*` \t");
  if (s.empty()) return std::nullopt;
  if (s[0] == '0' || s[0] == '1') {
    if (s.size() > 1 && detail::is_alnum(s[1])) return std::nullopt;
    return s[0] == '0' ? Label::Rejected : Label::Accepted;
  }
  auto word = [&](std::string_view w) {
    return istarts_with(s, w) && (s.size() == w.size() || !detail::is_alnum(s[w.size()]));
  };
  if (word("partially accepted") || word("accepted")) return Label::Accepted;
  if (word("rejected")) return Label::Rejected;
  return std::nullopt;
}

/// Ok: both markers present and the label parses. Recovered: a
/// "Decision:"/"Prediction:" line carries a recognisable label. Failed:
/// neither; the raw text becomes the explanation.
inline ParsedOutput parse_model_output(std::string_view raw) {
  auto p = raw.find(kPredictionMarker);
  auto e = raw.find(kExplanationMarker);
  if (p != std::string_view::npos && e != std::string_view::npos) {
    auto label_start = p + kPredictionMarker.size();
    auto label_end = raw.find('\n', label_start);
    if (e > p && e < label_end) label_end = e;
    auto label = parse_label_token(raw.substr(label_start, label_end == std::string_view::npos ? raw.npos
                                                                                                 : label_end - label_start));
    if (label) {
      auto expl_start = e + kExplanationMarker.size();
      auto expl_end = p > e ? p : raw.size();
      return {label, std::string(trim(raw.substr(expl_start, expl_end - expl_start))), ParseStatus::Ok};
    }
  }

  // recovery: first "Decision:" / "Prediction:" line with a usable label
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= raw.size();) {
    auto nl = raw.find('\n', start);
    if (nl == std::string_view::npos) nl = raw.size();
    lines.push_back(raw.substr(start, nl - start));
    start = nl + 1;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto body = detail::strip_leading(trim(lines[i]), "#*->_ \t");
    std::size_t colon = 0;
    if (istarts_with(body, "decision:")) colon = 9;
    else if (istarts_with(body, "prediction:")) colon = 11;
    else continue;
    auto label = parse_label_token(body.substr(colon));
    if (!label) continue;

    std::string rest;
    for (std::size_t j = 0; j < lines.size(); ++j) {
      if (j == i) continue;
      if (!rest.empty()) rest += '\n';
      rest += lines[j];
    }
    std::string_view expl = trim(rest);
    auto stripped = detail::strip_leading(expl, "#*_ \t");
    if (istarts_with(stripped, "explanation:")) expl = trim(stripped.substr(12));
    return {label, std::string(expl), ParseStatus::Recovered};
  }
  return {std::nullopt, std::string(raw), ParseStatus::Failed};
}

struct Prediction {
  std::string case_id;
  std::optional<Label> label;
  std::string explanation;
  ParseStatus parse_status = ParseStatus::Failed;
  std::string raw_output;

  bool operator==(const Prediction&) const = default;
};

struct DecodingOptions {
  std::string model = "llama-3-8b-instruct";
  double temperature = 0.2;
  double top_p = 0.9;
  int max_new_tokens = 512;
};

/// assemble -> prompt -> generate -> parse. Gateway and assembly errors
/// propagate; an unparseable answer is a Failed prediction, not an error.
inline Prediction predict(const CaseDocument& doc, const PipelineConfig& cfg, const std::vector<FewShotExample>& shots,
                          const AssemblyInputs& inputs, Generator& gen, const DecodingOptions& decoding = {}) {
  auto ctx = assemble_context(doc, cfg, inputs);
  auto reply = gen.generate(
      {build_prediction_prompt(ctx, shots), decoding.temperature, decoding.top_p, decoding.max_new_tokens, decoding.model});
  auto parsed = parse_model_output(reply.text);
  return {doc.id, parsed.label, std::move(parsed.explanation), parsed.status, std::move(reply.text)};
}

// ---------------------------------------------------------------------------
// experiment runs

struct RunFailure {
  std::string case_id;
  std::string reason;

  bool operator==(const RunFailure&) const = default;
};

struct ExperimentRun {
  std::string run_id;
  PipelineConfig config;
  Partition partition = Partition::Single;
  std::vector<Prediction> predictions;
  std::string created_at;
  std::string provider;
  std::string config_hash;
  std::vector<RunFailure> failures;  ///< documents whose prediction errored
  std::vector<RunFailure> excluded;  ///< documents skipped before prediction
};

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string new_run_id() {
  std::random_device rd;
  std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  auto t = static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
  return "run-" + hex64(hi ^ (t * 0x9e3779b97f4a7c15ULL)).substr(0, 12);
}

struct RunOptions {
  DecodingOptions decoding;
  int max_parallel = 4;
  std::string run_id;  ///< generated when empty
  std::string config_hash;
};

/// Predicts every labeled document of `partition`, ordered by id. A failing
/// document is recorded in `failures` and never aborts the run.
inline ExperimentRun run_experiment(const std::vector<CaseDocument>& docs, Partition partition, const PipelineConfig& cfg,
                                    const std::vector<FewShotExample>& shots, const AssemblyInputs& inputs,
                                    Generator& gen, const RunOptions& opt = {}) {
  validate(cfg);
  if (uses_similar(cfg.kind) && inputs.index == nullptr) {
    throw Error(Errc::FatalConfig, "CaseTextSimilar requires a vector index");
  }

  ExperimentRun run;
  run.run_id = opt.run_id.empty() ? new_run_id() : opt.run_id;
  run.config = cfg;
  run.partition = partition;
  run.created_at = utc_timestamp();
  run.provider = gen.name();
  run.config_hash = opt.config_hash;

  std::vector<const CaseDocument*> pending;
  for (const auto& d : docs) {
    if (d.partition != partition || !d.gold_label) continue;
    if (uses_facts(cfg.kind) && trim(d.facts_text).empty()) {
      run.excluded.push_back({d.id, "facts_text missing"});
      continue;
    }
    pending.push_back(&d);
  }
  std::sort(pending.begin(), pending.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::sort(run.excluded.begin(), run.excluded.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });

  std::set<std::string> evaluated;
  for (auto* d : pending) evaluated.insert(d->id);
  for (const auto& s : shots) {
    if (!s.source_id.empty() && evaluated.count(s.source_id)) {
      throw Error(Errc::FatalConfig, "few-shot example drawn from evaluated document " + s.source_id);
    }
  }

  std::vector<std::optional<Prediction>> results(pending.size());
  std::vector<std::string> errors(pending.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      try {
        results[i] = predict(*pending[i], cfg, shots, inputs, gen, opt.decoding);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  auto n_threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(opt.max_parallel, 1)), 1, std::max<std::size_t>(pending.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (results[i]) run.predictions.push_back(std::move(*results[i]));
    else run.failures.push_back({pending[i]->id, errors[i]});
  }
  return run;
}

// ---------------------------------------------------------------------------
// run file: one manifest line, then one line per prediction

inline json to_json(const Prediction& p) {
  return {{"type", "prediction"},
          {"case_id", p.case_id},
          {"label", p.label ? json(label_value(*p.label)) : json(nullptr)},
          {"explanation", p.explanation},
          {"parse_status", std::string(to_string(p.parse_status))},
          {"raw_output", p.raw_output}};
}

inline Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.case_id = j.at("case_id").get<std::string>();
  if (!j.at("label").is_null()) {
    auto v = j.at("label").get<int>();
    if (v != 0 && v != 1) throw std::invalid_argument("label must be 0 or 1");
    p.label = static_cast<Label>(v);
  }
  p.explanation = j.at("explanation").get<std::string>();
  auto status = parse_parse_status(j.at("parse_status").get<std::string>());
  if (!status) throw std::invalid_argument("unknown parse_status");
  p.parse_status = *status;
  p.raw_output = j.at("raw_output").get<std::string>();
  if (p.label.has_value() == (p.parse_status == ParseStatus::Failed)) {
    throw std::invalid_argument("label must be present exactly when parse_status is Ok or Recovered");
  }
  return p;
}

namespace detail {

inline json failures_json(const std::vector<RunFailure>& fs) {
  json a = json::array();
  for (const auto& f : fs) a.push_back({{"case_id", f.case_id}, {"reason", f.reason}});
  return a;
}

inline std::vector<RunFailure> failures_from_json(const json& a) {
  std::vector<RunFailure> out;
  for (const auto& f : a) out.push_back({f.at("case_id").get<std::string>(), f.at("reason").get<std::string>()});
  return out;
}

}  // namespace detail

inline json manifest_json(const ExperimentRun& run) {
  return {{"type", "manifest"},
          {"run_id", run.run_id},
          {"created_at", run.created_at},
          {"kind", std::string(to_string(run.config.kind))},
          {"partition", std::string(to_string(run.partition))},
          {"provider", run.provider},
          {"config_hash", run.config_hash},
          {"k", run.config.k},
          {"context_budget", run.config.context_budget},
          {"statute_budget", run.config.statute_budget},
          {"facts_mode", run.config.facts_from_summary ? "summary" : "raw"},
          {"n_predictions", run.predictions.size()},
          {"failures", detail::failures_json(run.failures)},
          {"excluded", detail::failures_json(run.excluded)}};
}

inline void write_run_file(std::ostream& out, const ExperimentRun& run) {
  out << manifest_json(run).dump() << '\n';
  for (const auto& p : run.predictions) out << to_json(p).dump() << '\n';
}

inline ExperimentRun read_run_file(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  ExperimentRun run;
  bool have_manifest = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      if (!have_manifest) {
        if (j.at("type") != "manifest") throw std::invalid_argument("first record must be the manifest");
        run.run_id = j.at("run_id").get<std::string>();
        run.created_at = j.at("created_at").get<std::string>();
        auto kind = parse_pipeline_kind(j.at("kind").get<std::string>());
        auto part = parse_partition(j.at("partition").get<std::string>());
        if (!kind || !part) throw std::invalid_argument("bad kind or partition");
        run.config.kind = *kind;
        run.partition = *part;
        run.provider = j.at("provider").get<std::string>();
        run.config_hash = j.at("config_hash").get<std::string>();
        run.config.k = j.at("k").get<std::size_t>();
        run.config.context_budget = j.at("context_budget").get<std::size_t>();
        run.config.statute_budget = j.at("statute_budget").get<std::size_t>();
        run.config.facts_from_summary = j.at("facts_mode") == "summary";
        run.failures = detail::failures_from_json(j.at("failures"));
        run.excluded = detail::failures_from_json(j.at("excluded"));
        have_manifest = true;
      } else {
        run.predictions.push_back(prediction_from_json(j));
      }
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedRecord, "run file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_manifest) throw Error(Errc::MalformedRecord, "run file has no manifest");
  return run;
}

}  // namespace nyaya
