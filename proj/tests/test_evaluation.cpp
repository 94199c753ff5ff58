#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace nyaya;
using namespace nyaya::testing;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no nyaya::Error thrown";
  return Errc::BadConfig;
}

std::vector<std::string> random_tokens(std::mt19937& rng, std::size_t max_len) {
  static const char* vocab[] = {"the", "court", "held", "appeal", "notice", "void", "order", "is", "a", "Statute"};
  std::vector<std::string> out(1 + rng() % max_len);
  for (auto& t : out) t = vocab[rng() % 10];
  return out;
}

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) out += (out.empty() ? "" : " ") + t;
  return out;
}

std::vector<std::string> lower(std::vector<std::string> toks) {
  for (auto& t : toks) t = to_lower(t);
  return toks;
}

Prediction pred(std::string id, std::optional<int> label, std::string expl = "because") {
  Prediction p;
  p.case_id = std::move(id);
  if (label) p.label = static_cast<Label>(*label);
  p.parse_status = label ? ParseStatus::Ok : ParseStatus::Failed;
  p.explanation = label ? std::move(expl) : "";
  p.raw_output = "raw";
  return p;
}

std::map<std::string, Label> gold_of(const std::vector<int>& g) {
  std::map<std::string, Label> out;
  for (std::size_t i = 0; i < g.size(); ++i) out["c" + std::to_string(i)] = static_cast<Label>(g[i]);
  return out;
}

class ScriptedJudge : public Generator {
 public:
  explicit ScriptedJudge(std::deque<std::string> answers) : answers_(std::move(answers)) {}
  GenerationResponse generate(const GenerationRequest& req) override {
    prompts.push_back(req.prompt);
    auto a = answers_.front();
    if (answers_.size() > 1) answers_.pop_front();
    return {a, "judge", 0};
  }
  std::string name() const override { return "judge"; }
  std::vector<std::string> prompts;

 private:
  std::deque<std::string> answers_;
};

class FixedScorer : public ModelScorer {
 public:
  std::optional<double> score(ModelScoreKind kind, std::string_view, std::string_view) override {
    return kind == ModelScoreKind::BERTScore ? std::optional<double>(0.53) : std::nullopt;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// classification

TEST(Classification, PerfectPredictions) {
  auto r = classification_report({pred("c0", 0), pred("c1", 1)}, gold_of({0, 1}));
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.macro_f1, 1.0);
}

TEST(Classification, HandComputedConfusion) {
  auto r = classification_report({pred("c0", 0), pred("c1", 1), pred("c2", 1), pred("c3", 1)}, gold_of({0, 0, 1, 1}));
  EXPECT_NEAR(r.accuracy, 0.75, 1e-12);
  EXPECT_NEAR(r.macro_precision, (1.0 + 2.0 / 3.0) / 2.0, 1e-9);
  EXPECT_NEAR(r.macro_recall, 0.75, 1e-9);
  EXPECT_NEAR(r.macro_f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-9);
  EXPECT_EQ(r.confusion[0][1], 1u);
}

TEST(Classification, FailedParseCountsAgainstAccuracy) {
  auto r = classification_report({pred("c0", 0), pred("c1", std::nullopt), pred("c2", 1), pred("c3", 1)}, gold_of({0, 0, 1, 1}));
  EXPECT_NEAR(r.accuracy, 0.75, 1e-12);
  EXPECT_EQ(r.n_failed_parse, 1u);
  EXPECT_EQ(r.n_total, 4u);
  EXPECT_NEAR(r.macro_precision, 1.0, 1e-12);
  EXPECT_NEAR(r.macro_recall, 0.75, 1e-12);
}

TEST(Classification, MissingGoldRaises) {
  EXPECT_EQ(code_of([] { classification_report({pred("zz", 1)}, gold_of({0})); }), Errc::MissingGold);
}

TEST(Classification, MatchesCountingOracleOn1000Labelings) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng() % 20;
    std::vector<int> g(n), p(n);
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = static_cast<int>(rng() % 2);
      p[i] = static_cast<int>(rng() % 5) - 1 < 0 ? -1 : static_cast<int>(rng() % 2);
      preds.push_back(pred("c" + std::to_string(i), p[i] < 0 ? std::nullopt : std::optional<int>(p[i])));
    }
    auto got = classification_report(preds, gold_of(g));
    auto want = oracle::classify(g, p);
    EXPECT_NEAR(got.accuracy, want.accuracy, 1e-12);
    EXPECT_NEAR(got.macro_precision, want.macro_precision, 1e-12);
    EXPECT_NEAR(got.macro_recall, want.macro_recall, 1e-12);
    EXPECT_NEAR(got.macro_f1, want.macro_f1, 1e-12);
    EXPECT_EQ(got.n_failed_parse, want.failed);
    std::size_t cells = got.confusion[0][0] + got.confusion[0][1] + got.confusion[1][0] + got.confusion[1][1];
    EXPECT_EQ(cells + got.n_failed_parse, got.n_total);
    for (double v : {got.accuracy, got.macro_precision, got.macro_recall, got.macro_f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

// ---------------------------------------------------------------------------
// lexical metrics

TEST(Lcs, Examples) {
  auto t = [](std::string_view s) { return metric_tokens(s); };
  EXPECT_EQ(lcs_length(t("a b c d e"), t("a b c d e")), 5u);
  EXPECT_EQ(lcs_length(t("a b"), t("c d")), 0u);
  EXPECT_EQ(lcs_length(t("a b c d"), t("a c b d")), 3u);
}

TEST(RougeL, Examples) {
  EXPECT_DOUBLE_EQ(rouge_l("The appeal fails", "the appeal FAILS"), 1.0);
  EXPECT_EQ(rouge_l("x y", "a b"), 0.0);
  EXPECT_NEAR(rouge_l("the cat sat", "the cat sat down"), 0.8571428571, 1e-9);
  EXPECT_EQ(code_of([] { rouge_l("x", "  "); }), Errc::EmptyReference);
}

TEST(Bleu, Examples) {
  std::string ten = "one two three four five six seven eight nine ten";
  EXPECT_NEAR(bleu(ten, ten), 1.0, 1e-9);
  EXPECT_LE(bleu("alpha beta gamma delta", "one two three four"), 1e-6);
  EXPECT_EQ(code_of([] { bleu("x", ""); }), Errc::EmptyReference);
}

TEST(Meteor, Examples) {
  std::string ten = "one two three four five six seven eight nine ten";
  EXPECT_NEAR(meteor(ten, ten), 0.9995, 1e-12);
  for (std::size_t m = 1; m <= 12; ++m) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < m; ++i) toks.push_back("t" + std::to_string(i));
    EXPECT_NEAR(meteor(join(toks), join(toks)), 1.0 - 0.5 * std::pow(1.0 / static_cast<double>(m), 3.0), 1e-12);
  }
  EXPECT_EQ(meteor("x y", "a b"), 0.0);
  EXPECT_EQ(code_of([] { meteor("x", ""); }), Errc::EmptyReference);
}

TEST(Meteor, ShufflingNeverBeatsInOrder) {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < n; ++i) toks.push_back("w" + std::to_string(i));
    auto ref = join(toks);
    double in_order = meteor(ref, ref);
    auto perm = toks;
    std::sort(perm.begin(), perm.end());
    do {
      EXPECT_LE(meteor(join(perm), ref), in_order + 1e-15) << join(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(LexicalMetrics, MatchOraclesOn100RandomPairs) {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_tokens(rng, 14), b = random_tokens(rng, 14);
    auto ca = join(a), cb = join(b);
    auto la = lower(a), lb = lower(b);
    EXPECT_EQ(lcs_length(la, lb), oracle::lcs_brute(la, lb));
    EXPECT_EQ(lcs_length(la, lb), lcs_length(lb, la));
    EXPECT_LE(lcs_length(la, lb), std::min(la.size(), lb.size()));
    EXPECT_NEAR(rouge_l(ca, cb), oracle::rouge_l_f1(la, lb), 1e-8);
    EXPECT_NEAR(bleu(ca, cb), oracle::bleu(la, lb), 1e-8) << ca << " | " << cb;
    auto s = lexical_scores(ca, cb);
    for (double v : {s.rouge_l, s.bleu, s.meteor}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// G-Eval

TEST(GEval, PromptCarriesTemplateAndSlots) {
  auto p = build_geval_prompt("DESC-SLOT", "ACTUAL-SLOT", "GENERATED-SLOT");
  EXPECT_NE(p.find("Completeness & Coverage (30%)"), std::string::npos);
  EXPECT_NE(p.find("Clarity & Coherence (20%)"), std::string::npos);
  EXPECT_NE(p.find("Strictly provide only a single integer score (1-10)"), std::string::npos);
  EXPECT_NE(p.find("Document Description:\nDESC-SLOT"), std::string::npos);
  EXPECT_NE(p.find("Original Legal Document (Reference):\nACTUAL-SLOT"), std::string::npos);
  EXPECT_NE(p.find("Generated Legal Document (To Be Evaluated):\nGENERATED-SLOT"), std::string::npos);
  EXPECT_EQ(p, build_geval_prompt("DESC-SLOT", "ACTUAL-SLOT", "GENERATED-SLOT"));
  EXPECT_EQ(code_of([] { build_geval_prompt("", "a", "b"); }), Errc::InvalidRequest);

  std::istringstream lines(slurp(fixture("prompts/geval_lines.txt")));
  std::string line;
  std::size_t checked = 0;
  while (std::getline(lines, line)) {
    if (trim(line).empty()) continue;
    EXPECT_NE(("\n" + p + "\n").find("\n" + line + "\n"), std::string::npos) << line;
    ++checked;
  }
  EXPECT_GT(checked, 10u);
}

TEST(GEval, IntegerExtraction) {
  EXPECT_EQ(parse_geval_integer("7"), 7);
  EXPECT_EQ(parse_geval_integer("Score: 9."), 9);
  EXPECT_EQ(parse_geval_integer("10"), 10);
  EXPECT_EQ(parse_geval_integer("eleven"), std::nullopt);
  EXPECT_EQ(parse_geval_integer("11 then 4"), 4);
  EXPECT_EQ(parse_geval_integer("7.5"), std::nullopt);
  EXPECT_EQ(parse_geval_integer("0"), std::nullopt);
  EXPECT_EQ(parse_geval_integer("gpt4 says 6"), 6);
}

TEST(GEval, ScoreAndReasks) {
  ScriptedJudge seven({"7"});
  EXPECT_EQ(geval_score("i", "ref", "gen", seven).score, 7);
  ScriptedJudge colon({"Score: 9."});
  EXPECT_EQ(geval_score("i", "ref", "gen", colon).score, 9);
  ScriptedJudge late({"hmm", "eh", "3"});
  EXPECT_EQ(geval_score("i", "ref", "gen", late).score, 3);
  EXPECT_EQ(late.prompts.size(), 3u);
  ScriptedJudge never({"eleven"});
  EXPECT_EQ(code_of([&] { geval_score("i", "ref", "gen", never); }), Errc::JudgeParseFailure);
  EXPECT_EQ(never.prompts.size(), 3u);
}

// ---------------------------------------------------------------------------
// aggregation

TEST(Aggregate, MeansOverParsedItemsOnly) {
  ExperimentRun run;
  run.run_id = "r1";
  run.predictions = {pred("c0", 0, "a b c d e"), pred("c1", 1, "a b"), pred("c2", std::nullopt)};
  std::map<std::string, std::string> refs = {{"c0", "a b c d e"}, {"c1", "a b c d e f"}, {"c2", "zzz"}};
  auto rep = aggregate(run, gold_of({0, 1, 1}), refs);
  EXPECT_EQ(rep.n_scored, 2u);
  EXPECT_EQ(rep.n_excluded, 1u);
  EXPECT_EQ(rep.classification.n_total, 3u);
  ASSERT_TRUE(rep.lexical_mean.has_value());
  EXPECT_NEAR(rep.lexical_mean->rouge_l, (1.0 + rouge_l("a b", "a b c d e f")) / 2.0, 1e-12);
  EXPECT_FALSE(rep.geval_mean.has_value());
  EXPECT_FALSE(rep.bertscore_mean.has_value());
}

TEST(Aggregate, TwoItemMean) {
  ExperimentRun run;
  // rouge 0.2: cand 1 token matching, ref 9 tokens -> P=1, R=1/9, F1=0.2
  run.predictions = {pred("c0", 0, "a"), pred("c1", 0, "a b")};
  std::map<std::string, std::string> refs = {{"c0", "a x x x x x x x x"}, {"c1", "a b x x x x x x x x"}};
  EXPECT_NEAR(rouge_l("a", refs["c0"]), 0.2, 1e-12);
  auto r2 = rouge_l("a b", refs["c1"]);
  auto rep = aggregate(run, gold_of({0, 0}), refs);
  EXPECT_NEAR(rep.lexical_mean->rouge_l, (0.2 + r2) / 2, 1e-12);
}

TEST(Aggregate, OrderInvariantAndJudgeAndScorer) {
  auto docs = corpus20();
  auto refs = references20();
  ExperimentRun run;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    run.predictions.push_back(pred(docs[i].id, static_cast<int>(i % 3 == 0), "the appeal is accepted because notice failed"));
  }
  auto judge = standard_mock(2);
  FixedScorer scorer;
  AggregateOptions opt;
  opt.judge = judge.get();
  opt.scorer = &scorer;
  auto a = aggregate(run, gold_labels(docs), refs, opt);
  std::reverse(run.predictions.begin(), run.predictions.end());
  auto b = aggregate(run, gold_labels(docs), refs, opt);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  ASSERT_TRUE(a.geval_mean.has_value());
  EXPECT_GE(*a.geval_mean, 1.0);
  EXPECT_LE(*a.geval_mean, 10.0);
  EXPECT_NEAR(*a.bertscore_mean, 0.53, 1e-12);
  EXPECT_FALSE(a.blanc_mean.has_value());
  EXPECT_TRUE(to_json(a)["blanc"].is_null());
}

TEST(Aggregate, ErrorsAndClassificationOnlyMode) {
  ExperimentRun empty;
  EXPECT_EQ(code_of([&] { aggregate(empty, {}, {}); }), Errc::EmptyRun);
  ExperimentRun run;
  run.predictions = {pred("c0", 1)};
  EXPECT_EQ(code_of([&] { aggregate(run, gold_of({1}), {}); }), Errc::MissingReference);
  AggregateOptions opt;
  opt.explanation_metrics = false;
  auto rep = aggregate(run, gold_of({1}), {}, opt);
  EXPECT_DOUBLE_EQ(rep.classification.accuracy, 1.0);
  EXPECT_FALSE(rep.lexical_mean.has_value());
  EXPECT_TRUE(to_json(rep)["rouge_l"].is_null());
}

TEST(Aggregate, ReportWriters) {
  ExperimentRun run;
  run.run_id = "r9";
  run.predictions = {pred("c0", 1, "a b"), pred("c1", 0, "c d")};
  auto rep = aggregate(run, gold_of({1, 1}), {{"c0", "a b"}, {"c1", "c d"}});
  std::ostringstream records, table;
  write_report_records(records, rep);
  write_report_table(table, rep);
  std::istringstream lines(records.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    EXPECT_EQ(j["type"], n == 0 ? "report" : "item");
    ++n;
  }
  EXPECT_EQ(n, 3u);
  EXPECT_NE(table.str().find("accuracy          50.00"), std::string::npos) << table.str();
}
