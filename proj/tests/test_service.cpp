#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "cli_support.hpp"

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

json rating_body(const std::string& item, const std::string& rater, const std::string& criterion, int score) {
  return {{"item_id", item}, {"rater_id", rater}, {"criterion", criterion}, {"score", score}};
}

std::vector<std::tuple<std::string, std::string, std::string, int>> keys_of(const std::vector<RatingRecord>& rs) {
  std::vector<std::tuple<std::string, std::string, std::string, int>> out;
  for (const auto& r : rs) out.emplace_back(r.item_id, r.rater_id, r.criterion, r.score);
  std::sort(out.begin(), out.end());
  return out;
}

/// Data directory with the 20-document corpus prepared and a finished
/// CaseTextOnly run named "batch1" designated as the annotation run.
struct ServiceFixture : ::testing::Test {
  TempDir dir;
  fs::path conf;
  Config cfg;

  void SetUp() override {
    conf = write_config(dir, {{"annotation_run", "batch1"}, {"annotation_n", "5"}});
    prepare_data_dir(conf);
    auto r = run_cli({"run", "--pipeline", "CaseTextOnly", "--partition", "Single", "--run-id", "batch1", "--config",
                      conf.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    cfg = load_config(conf.string(), {});
  }

  std::vector<std::string> item_ids(ExperimentService& svc, const std::string& rater) {
    auto res = svc.annotation_items(rater);
    EXPECT_EQ(res.status, 200);
    std::vector<std::string> ids;
    for (const auto& it : res.body) ids.push_back(it.at("item_id").get<std::string>());
    return ids;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// line-delimited stores

TEST(JsonlStore, BadMiddleLineQuarantinesTail) {
  TempDir dir;
  auto file = dir / "log.jsonl";
  spit(file, "{\"a\":1}\n{\"a\":2}\n{oops\n{\"a\":4}\n");
  auto r = replay_jsonl(file);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[1]["a"], 2);
  ASSERT_TRUE(r.corruption.has_value());
  EXPECT_EQ(r.corruption->line, 3u);
  EXPECT_EQ(slurp(file), "{\"a\":1}\n{\"a\":2}\n");
  EXPECT_EQ(slurp(r.corruption->quarantine_path), "{oops\n{\"a\":4}\n");

  auto again = replay_jsonl(file);
  EXPECT_EQ(again.records.size(), 2u);
  EXPECT_FALSE(again.corruption.has_value());
}

TEST(JsonlStore, UnterminatedTailIsTornWrite) {
  TempDir dir;
  auto file = dir / "log.jsonl";
  spit(file, "{\"a\":1}\n{\"a\":2}");
  auto r = replay_jsonl(file);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_TRUE(r.corruption.has_value());
  EXPECT_EQ(r.corruption->line, 2u);
  EXPECT_EQ(slurp(file), "{\"a\":1}\n");
}

TEST(JsonlStore, MissingAndEmptyFilesReplayClean) {
  TempDir dir;
  EXPECT_TRUE(replay_jsonl(dir / "absent.jsonl").records.empty());
  spit(dir / "empty.jsonl", "");
  auto r = replay_jsonl(dir / "empty.jsonl");
  EXPECT_TRUE(r.records.empty());
  EXPECT_FALSE(r.corruption.has_value());
}

TEST(JsonlStore, StrictReaderNamesFileAndLine) {
  TempDir dir;
  auto file = dir / "s.jsonl";
  spit(file, "{\"a\":1}\nnot json\n");
  try {
    read_jsonl_strict(file);
    FAIL() << "expected CorruptStore";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptStore);
    EXPECT_NE(std::string(e.what()).find(file.string() + ":2"), std::string::npos) << e.what();
  }
  spit(file, "{\"a\":1}\n{\"a\":2}");
  EXPECT_EQ(code_of([&] { read_jsonl_strict(file); }), Errc::CorruptStore);
}

// ---------------------------------------------------------------------------
// ratings

TEST(RatingLog, ResubmissionOverwritesWithAudit) {
  TempDir dir;
  auto file = dir / "ratings.jsonl";
  {
    RatingLog log(file);
    log.append({"I1", "r1", "completeness", 7, {}});
    log.append({"I1", "r1", "completeness", 5, {}});
    auto latest = log.latest();
    ASSERT_EQ(latest.size(), 1u);
    EXPECT_EQ(latest[0].score, 5);
    EXPECT_EQ(log.audit_trail().size(), 2u);
    auto hist = log.history("I1", "r1", "completeness");
    ASSERT_EQ(hist.size(), 2u);
    EXPECT_EQ(hist[0].score, 7);
    EXPECT_EQ(hist[1].score, 5);
  }
  RatingLog reopened(file);
  ASSERT_EQ(reopened.latest().size(), 1u);
  EXPECT_EQ(reopened.latest()[0].score, 5);
  EXPECT_EQ(reopened.audit_trail().size(), 2u);
  EXPECT_FALSE(reopened.corruption().has_value());
}

TEST(RatingLog, ReplayOfAnyWritePrefixMatchesStateAtThatPoint) {
  TempDir dir;
  auto file = dir / "ratings.jsonl";
  std::mt19937_64 rng(13);
  const std::vector<std::string> items = {"A", "B", "C"}, raters = {"r1", "r2"};
  std::vector<std::size_t> offsets{0};
  std::vector<std::vector<RatingRecord>> states{{}};
  {
    RatingLog log(file);
    for (int i = 0; i < 40; ++i) {
      log.append({items[rng() % 3], raters[rng() % 2], rating_criteria()[rng() % 3], static_cast<int>(1 + rng() % 10), {}});
      offsets.push_back(fs::file_size(file));
      states.push_back(log.latest());
    }
  }
  const auto bytes = slurp(file);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    TempDir scratch;
    auto copy = scratch / "ratings.jsonl";
    spit(copy, bytes.substr(0, offsets[k]));
    RatingLog replayed(copy);
    EXPECT_FALSE(replayed.corruption().has_value()) << "prefix " << k;
    EXPECT_EQ(keys_of(replayed.latest()), keys_of(states[k])) << "prefix " << k;
    if (k + 1 < offsets.size()) {
      auto torn = offsets[k] + (offsets[k + 1] - offsets[k]) / 2;
      spit(copy, bytes.substr(0, torn));
      RatingLog after_crash(copy);
      EXPECT_TRUE(after_crash.corruption().has_value()) << "torn write after prefix " << k;
      EXPECT_EQ(keys_of(after_crash.latest()), keys_of(states[k])) << "torn write after prefix " << k;
      EXPECT_EQ(fs::file_size(copy), offsets[k]);
    }
  }
}

// ---------------------------------------------------------------------------
// run registry and snapshots

TEST(RunRegistry, RestartMarksUnfinishedRunsFailed) {
  TempDir dir;
  {
    RunRegistry reg(dir.path());
    reg.set_state({"r-queued", RunState::Queued, "CaseTextOnly", "Single", "", ""});
    reg.set_state({"r-running", RunState::Running, "FactsOnly", "Multi", "", ""});
    reg.set_state({"r-done", RunState::Done, "CaseTextOnly", "Single", "", ""});
    reg.store_report("r-done", json{{"accuracy", 0.5}});
  }
  RunRegistry reg(dir.path());
  for (const char* id : {"r-queued", "r-running"}) {
    auto st = reg.status(id);
    ASSERT_TRUE(st.has_value());
    EXPECT_EQ(st->state, RunState::Failed);
    EXPECT_EQ(st->error, "interrupted by restart");
  }
  EXPECT_EQ(reg.status("r-done")->state, RunState::Done);
  EXPECT_EQ(reg.report("r-done")->at("accuracy"), 0.5);
  EXPECT_EQ(reg.list().size(), 3u);
  EXPECT_EQ(code_of([&] { reg.run_path("../escape"); }), Errc::InvalidRequest);
}

TEST(Snapshot, DetectsTamperingAndTruncation) {
  TempDir dir;
  spit(dir / "ratings.jsonl", "{\"x\":1}\n");
  fs::create_directories(dir / "runs");
  spit(dir / "runs" / "a.jsonl", "{\"y\":2}\n");
  auto manifest = write_snapshot(dir.path());
  EXPECT_EQ(manifest["files"].size(), 2u);
  EXPECT_TRUE(verify_snapshot(dir.path()).empty());

  // append-only growth is not a problem
  spit(dir / "ratings.jsonl", "{\"x\":1}\n{\"x\":2}\n");
  EXPECT_TRUE(verify_snapshot(dir.path()).empty());

  spit(dir / "ratings.jsonl", "{\"x\":9}\n");
  auto problems = verify_snapshot(dir.path());
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("checksum mismatch"), std::string::npos);

  spit(dir / "ratings.jsonl", "{");
  EXPECT_NE(verify_snapshot(dir.path())[0].find("shorter than snapshot"), std::string::npos);
  fs::remove(dir / "runs" / "a.jsonl");
  EXPECT_EQ(verify_snapshot(dir.path()).size(), 2u);
}

// ---------------------------------------------------------------------------
// experiment service: runs

TEST_F(ServiceFixture, SubmittedRunCompletesWithReport) {
  std::string id;
  json report;
  {
    ExperimentService svc(cfg);
    EXPECT_TRUE(svc.startup_issues().empty());
    auto res = svc.submit_run(R"({"kind": "CaseTextOnly", "partition": "Single"})");
    ASSERT_EQ(res.status, 202) << res.body.dump();
    id = res.body.at("run_id").get<std::string>();
    svc.wait_idle();
    auto st = svc.run_status(id);
    ASSERT_EQ(st.status, 200);
    EXPECT_EQ(st.body.at("state"), "done") << st.body.dump();
    ASSERT_TRUE(st.body.contains("report"));
    report = st.body["report"];
    EXPECT_EQ(report.at("classification").at("n_total"), 12);
    auto rep = svc.run_report(id);
    ASSERT_EQ(rep.status, 200);
    EXPECT_EQ(rep.body, report);

    bool listed = false;
    for (const auto& s : svc.list_runs().body) listed |= s.at("run_id") == id;
    EXPECT_TRUE(listed);
  }
  ExperimentService restarted(cfg);
  EXPECT_TRUE(restarted.startup_issues().empty());
  auto st = restarted.run_status(id);
  ASSERT_EQ(st.status, 200);
  EXPECT_EQ(st.body.at("state"), "done");
  EXPECT_EQ(st.body.at("report"), report);
  EXPECT_EQ(restarted.run_report(id).body, report);
}

TEST_F(ServiceFixture, OverridesAreValidated) {
  ExperimentService svc(cfg);
  auto ok = svc.submit_run(R"({"kind": "CaseTextSimilar", "partition": "Multi", "overrides": {"k": 2}})");
  EXPECT_EQ(ok.status, 202) << ok.body.dump();
  EXPECT_EQ(svc.submit_run(R"({"kind": "CaseTextOnly", "overrides": {"k": 0}})").status, 400);
  EXPECT_EQ(svc.submit_run(R"({"kind": "CaseTextOnly", "overrides": {"data_dir": "/tmp"}})").status, 400);
  EXPECT_EQ(svc.submit_run(R"({"kind": "CaseTextOnly", "overrides": [1]})").status, 400);
  svc.wait_idle();
  EXPECT_EQ(svc.run_status(ok.body.at("run_id")).body.at("state"), "done");
}

TEST_F(ServiceFixture, RequestErrors) {
  ExperimentService svc(cfg);
  auto unknown = svc.submit_run(R"({"kind": "NoSuchKind"})");
  EXPECT_EQ(unknown.status, 400);
  EXPECT_EQ(unknown.body.at("error"), "UnknownPipeline");
  EXPECT_EQ(svc.submit_run("{not json").status, 400);
  EXPECT_EQ(svc.submit_run("[1, 2]").status, 400);
  EXPECT_EQ(svc.submit_run(R"({"kind": "CaseTextOnly", "partition": "Both"})").status, 400);
  EXPECT_EQ(svc.run_status("nope").status, 404);
  EXPECT_EQ(svc.run_report("nope").status, 404);
  EXPECT_TRUE(svc.list_runs().body.is_array());
}

TEST(ExperimentService, MissingPrerequisitesGive409) {
  TempDir dir;
  auto conf = write_config(dir);
  for (std::vector<std::string> args : {std::vector<std::string>{"ingest", "--input", fixture("corpus20.jsonl").string()},
                                        std::vector<std::string>{"summarize"}}) {
    args.insert(args.end(), {"--config", conf.string()});
    ASSERT_EQ(run_cli(args).code, 0);
  }
  ExperimentService svc(load_config(conf.string(), {}));
  auto res = svc.submit_run(R"({"kind": "CaseTextSimilar", "partition": "Single"})");
  EXPECT_EQ(res.status, 409);
  EXPECT_EQ(res.body.at("error"), "MissingPrerequisite");
  EXPECT_EQ(svc.submit_run(R"({"kind": "CaseTextOnly", "partition": "Single"})").status, 202);
  svc.wait_idle();
}

TEST(ExperimentService, EmptyDataDirStartsClean) {
  TempDir dir;
  auto conf = write_config(dir);
  ExperimentService svc(load_config(conf.string(), {}));
  EXPECT_TRUE(svc.startup_issues().empty());
  EXPECT_EQ(svc.health().body.at("status"), "ok");
  EXPECT_TRUE(svc.list_runs().body.empty());
  EXPECT_EQ(svc.annotation_items("r1").status, 404);
  EXPECT_EQ(svc.submit_run(R"({"kind": "CaseTextOnly"})").status, 409);
}

// ---------------------------------------------------------------------------
// experiment service: annotation

TEST_F(ServiceFixture, ItemsAreSharedAndBlind) {
  ExperimentService svc(cfg);
  auto res = svc.annotation_items("r1");
  ASSERT_EQ(res.status, 200);
  ASSERT_EQ(res.body.size(), 5u);
  std::vector<std::string> expected = {"SC-2001-001", "SC-2002-002", "SC-2003-003", "SC-2004-004", "SC-2005-005"};
  EXPECT_EQ(item_ids(svc, "r1"), expected);
  EXPECT_EQ(item_ids(svc, "r2"), expected);
  for (const auto& item : res.body) {
    EXPECT_EQ(item.at("pipeline_hidden"), true);
    EXPECT_EQ(item.at("criteria"), json(rating_criteria()));
    EXPECT_FALSE(item.at("case_summary").get<std::string>().empty());
    EXPECT_FALSE(item.at("reference_explanation").get<std::string>().empty());
    EXPECT_FALSE(item.at("generated_explanation").get<std::string>().empty());
    EXPECT_EQ(item.size(), 6u);
  }

  auto run = svc.runs().load_run("batch1");
  std::vector<std::string> forbidden = {"batch1", run.config_hash, cfg.model, cfg.summary_model, "mock", "provider",
                                        "pipeline_kind", "config"};
  for (auto kind : kAllPipelines) forbidden.emplace_back(to_string(kind));
  ASSERT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r1", "completeness", 7).dump()).status, 201);
  ASSERT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r2", "completeness", 6).dump()).status, 201);
  for (const auto& body : {svc.annotation_items("r1").body.dump(), svc.annotation_items("").body.dump(),
                           svc.submit_rating(rating_body("SC-2002-002", "r1", "legal relevance", 4).dump()).body.dump(),
                           svc.annotation_agreement().body.dump()}) {
    for (const auto& word : forbidden) EXPECT_EQ(body.find(word), std::string::npos) << word << " leaked in " << body;
  }
}

TEST_F(ServiceFixture, RatingSubmission) {
  ExperimentService svc(cfg);
  EXPECT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r1", "factual accuracy", 7).dump()).status, 201);
  EXPECT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r1", "Factual Accuracy", 5).dump()).status, 201);
  EXPECT_EQ(svc.ratings().audit_trail().size(), 2u);
  ASSERT_EQ(svc.ratings().latest().size(), 1u);
  EXPECT_EQ(svc.ratings().latest()[0].score, 5);

  EXPECT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r1", "completeness", 11).dump()).status, 400);
  EXPECT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r1", "completeness", 0).dump()).status, 400);
  EXPECT_EQ(svc.submit_rating(rating_body("SC-2001-001", "r1", "style", 5).dump()).status, 400);
  EXPECT_EQ(svc.submit_rating(rating_body("SC-2001-001", " ", "completeness", 5).dump()).status, 400);
  EXPECT_EQ(svc.submit_rating(R"({"item_id": "SC-2001-001", "rater_id": "r1", "criterion": "completeness", "score": 5.5})").status,
            400);
  EXPECT_EQ(svc.submit_rating("{").status, 400);
  EXPECT_EQ(svc.submit_rating(rating_body("SC-2020-020", "r1", "completeness", 5).dump()).status, 404);
  EXPECT_EQ(svc.ratings().audit_trail().size(), 2u);
}

TEST_F(ServiceFixture, FullyRatedItemsAreOmitted) {
  ExperimentService svc(cfg);
  for (const auto& c : rating_criteria()) {
    ASSERT_EQ(svc.submit_rating(rating_body("SC-2003-003", "r1", c, 8).dump()).status, 201);
  }
  ASSERT_EQ(svc.submit_rating(rating_body("SC-2004-004", "r1", "completeness", 8).dump()).status, 201);
  auto ids = item_ids(svc, "r1");
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_EQ(std::count(ids.begin(), ids.end(), "SC-2003-003"), 0);
  EXPECT_EQ(std::count(ids.begin(), ids.end(), "SC-2004-004"), 1);
  EXPECT_EQ(item_ids(svc, "r2").size(), 5u);
}

TEST_F(ServiceFixture, AgreementNeedsTwoRaters) {
  ExperimentService svc(cfg);
  auto ids = item_ids(svc, "r1");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (const auto& c : rating_criteria()) svc.submit_rating(rating_body(ids[i], "r1", c, 2 + static_cast<int>(i)).dump());
  }
  auto one = svc.annotation_agreement();
  EXPECT_EQ(one.status, 409);
  EXPECT_EQ(one.body.at("error"), "InsufficientRaters");

  std::mt19937 rng(3);
  for (const char* rater : {"r2", "r3"}) {
    for (const auto& id : ids) {
      for (const auto& c : rating_criteria()) {
        svc.submit_rating(rating_body(id, rater, c, 1 + static_cast<int>(rng() % 10)).dump());
      }
    }
  }
  auto res = svc.annotation_agreement();
  ASSERT_EQ(res.status, 200) << res.body.dump();
  EXPECT_EQ(res.body.at("n_raters"), 3);
  for (const auto& c : rating_criteria()) {
    const auto& section = res.body.at("criteria").at(c);
    for (const char* stat : {"fleiss_kappa", "mean_cohen_kappa", "krippendorff_alpha", "icc", "mean_pearson"}) {
      EXPECT_TRUE(section.at(stat).is_number()) << c << " " << stat << ": " << section.dump();
    }
  }
  EXPECT_TRUE(res.body.at("pooled").at("icc").is_number());
}

TEST_F(ServiceFixture, RatingsSurviveRestart) {
  {
    ExperimentService svc(cfg);
    svc.submit_rating(rating_body("SC-2001-001", "r1", "completeness", 7).dump());
    svc.submit_rating(rating_body("SC-2001-001", "r1", "completeness", 5).dump());
    svc.submit_rating(rating_body("SC-2002-002", "r2", "legal relevance", 9).dump());
  }
  ExperimentService svc(cfg);
  EXPECT_TRUE(svc.startup_issues().empty());
  EXPECT_EQ(svc.ratings().audit_trail().size(), 3u);
  auto latest = keys_of(svc.ratings().latest());
  decltype(latest) expected = {{"SC-2001-001", "r1", "completeness", 5}, {"SC-2002-002", "r2", "legal relevance", 9}};
  EXPECT_EQ(latest, expected);
}

TEST_F(ServiceFixture, TruncatedRatingsTailSurfacesAtStartup) {
  {
    ExperimentService svc(cfg);
    svc.submit_rating(rating_body("SC-2001-001", "r1", "completeness", 7).dump());
    svc.submit_rating(rating_body("SC-2002-002", "r1", "completeness", 3).dump());
  }
  auto file = DataPaths{cfg.data_dir}.ratings();
  auto bytes = slurp(file);
  spit(file, bytes + R"({"item_id": "SC-2003-003", "rater)");

  ExperimentService svc(cfg);
  ASSERT_EQ(svc.startup_issues().size(), 1u);
  EXPECT_NE(svc.startup_issues()[0].find("CorruptStore"), std::string::npos);
  EXPECT_NE(svc.startup_issues()[0].find("ratings.jsonl:3"), std::string::npos) << svc.startup_issues()[0];
  auto h = svc.health();
  EXPECT_EQ(h.body.at("status"), "degraded");
  EXPECT_EQ(h.body.at("store_issues").size(), 1u);
  EXPECT_EQ(svc.ratings().latest().size(), 2u);
  EXPECT_TRUE(fs::exists(file.string() + ".quarantine"));
  EXPECT_EQ(slurp(file), bytes);

  ExperimentService clean(cfg);
  EXPECT_TRUE(clean.startup_issues().empty());
}

// ---------------------------------------------------------------------------
// HTTP wiring

TEST_F(ServiceFixture, HttpRoutes) {
  ExperimentService svc(cfg);
  httplib::Server server;
  svc.register_routes(server);
  int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body).at("status"), "ok");
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  auto pre = client.Options("/annotation/ratings");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  auto items = client.Get("/annotation/items?rater=r9");
  ASSERT_TRUE(items);
  EXPECT_EQ(items->status, 200);
  EXPECT_EQ(json::parse(items->body).size(), 5u);

  auto posted = client.Post("/annotation/ratings", rating_body("SC-2001-001", "r9", "completeness", 7).dump(),
                            "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 201);
  auto bad = client.Post("/annotation/ratings", rating_body("SC-2001-001", "r9", "completeness", 11).dump(),
                         "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto submitted = client.Post("/runs", R"({"kind": "FactsOnly", "partition": "Multi"})", "application/json");
  ASSERT_TRUE(submitted);
  EXPECT_EQ(submitted->status, 202);
  auto id = json::parse(submitted->body).at("run_id").get<std::string>();
  svc.wait_idle();
  auto status = client.Get("/runs/" + id);
  ASSERT_TRUE(status);
  EXPECT_EQ(json::parse(status->body).at("state"), "done");
  auto report = client.Get("/runs/" + id + "/report");
  ASSERT_TRUE(report);
  EXPECT_EQ(report->status, 200);

  auto missing = client.Get("/runs/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto agreement = client.Get("/annotation/agreement");
  ASSERT_TRUE(agreement);
  EXPECT_EQ(agreement->status, 409);

  server.stop();
  listener.join();
}
