#pragma once

// HTTP service: asynchronous experiment runs with status polling, and the
// blind annotation workflow (item delivery, rating collection, agreement).
//
//   POST /runs                   {partition, kind, overrides?} -> 202 {run_id}
//   GET  /runs                   run states
//   GET  /runs/{id}              state, plus the report once done
//   GET  /runs/{id}/report       evaluation report
//   GET  /annotation/items?rater=
//   POST /annotation/ratings     {item_id, rater_id, criterion, score} -> 201
//   GET  /annotation/agreement   per-criterion and pooled agreement
//   GET  /health                 store problems found at startup

#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <stop_token>
#include <string>
#include <thread>

#include <httplib.h>

#include "nyaya/workspace.hpp"

namespace nyaya {

struct ApiResponse {
  int status = 200;
  json body;
};

struct AnnotationItem {
  std::string item_id;
  std::string case_summary;
  std::string reference_explanation;
  std::string generated_explanation;
};

/// Only these fields cross the annotation boundary; the run's pipeline,
/// configuration and provider have no representation here.
inline json to_json(const AnnotationItem& a) {
  return {{"item_id", a.item_id},
          {"case_summary", a.case_summary},
          {"reference_explanation", a.reference_explanation},
          {"generated_explanation", a.generated_explanation},
          {"criteria", rating_criteria()},
          {"pipeline_hidden", true}};
}

namespace detail {

inline ApiResponse api_error(int status, std::string_view code, const std::string& detail) {
  return {status, {{"error", std::string(code)}, {"detail", detail}}};
}

}  // namespace detail

class ExperimentService {
 public:
  explicit ExperimentService(Config cfg)
      : ws_(Workspace::load(cfg)),
        providers_(make_providers(cfg)),
        runs_(cfg.data_dir),
        ratings_(DataPaths{cfg.data_dir}.ratings()) {
    for (const auto& c : runs_.corruption()) issues_.push_back(std::string(to_string(Errc::CorruptStore)) + ": " + c.message());
    if (const auto& c = ratings_.corruption()) issues_.push_back(std::string(to_string(Errc::CorruptStore)) + ": " + c->message());
    worker_ = std::jthread([this](std::stop_token st) { work(st); });
  }

  ~ExperimentService() {
    worker_.request_stop();
    cv_.notify_all();
  }

  ExperimentService(const ExperimentService&) = delete;
  ExperimentService& operator=(const ExperimentService&) = delete;

  const std::vector<std::string>& startup_issues() const noexcept { return issues_; }
  const RatingLog& ratings() const noexcept { return ratings_; }
  const RunRegistry& runs() const noexcept { return runs_; }

  /// Blocks until the run queue is empty and no run is executing.
  void wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
  }

  // -------------------------------------------------------------------------
  // runs

  ApiResponse submit_run(const std::string& body) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      return detail::api_error(400, "InvalidRequest", "body is not JSON");
    }
    if (!j.is_object()) return detail::api_error(400, "InvalidRequest", "body must be an object");
    auto kind_name = j.value("kind", j.value("pipeline", std::string()));
    auto kind = parse_pipeline_kind(kind_name);
    if (!kind) return detail::api_error(400, "UnknownPipeline", "unknown pipeline kind '" + kind_name + "'");
    auto partition = parse_partition(j.value("partition", std::string("Single")));
    if (!partition) return detail::api_error(400, "InvalidRequest", "partition must be Single or Multi");

    Config cfg = ws_.config;
    if (auto ov = j.find("overrides"); ov != j.end()) {
      if (!ov->is_object()) return detail::api_error(400, "InvalidRequest", "overrides must be an object");
      static const std::set<std::string> allowed = {"k", "context_budget", "statute_budget", "facts_mode",
                                                    "temperature", "top_p", "max_new_tokens", "n_shots"};
      try {
        for (const auto& [key, value] : ov->items()) {
          if (!allowed.count(key)) throw Error(Errc::BadConfig, "override '" + key + "' not allowed");
          cfg.set(key, value.is_string() ? value.get<std::string>() : value.dump());
        }
        cfg.validate();
      } catch (const Error& e) {
        return detail::api_error(400, to_string(e.code()), e.what());
      }
    }

    Workspace ws = ws_;
    ws.config = cfg;
    if (ws.shots.size() > static_cast<std::size_t>(cfg.n_shots)) ws.shots.resize(static_cast<std::size_t>(cfg.n_shots));
    if (auto why = ws.missing_prerequisite(*kind, *partition)) {
      return detail::api_error(409, "MissingPrerequisite", *why);
    }

    auto id = new_run_id();
    runs_.set_state({id, RunState::Queued, std::string(to_string(*kind)), std::string(to_string(*partition)), "", ""});
    {
      std::lock_guard lock(mu_);
      queue_.push_back({id, *kind, *partition, std::move(ws)});
    }
    cv_.notify_one();
    return {202, {{"run_id", id}, {"state", "queued"}}};
  }

  ApiResponse run_status(const std::string& id) const {
    auto st = runs_.status(id);
    if (!st) return detail::api_error(404, "NotFound", "unknown run " + id);
    json j = to_json(*st);
    if (st->state == RunState::Done) {
      if (auto rep = runs_.report(id)) j["report"] = *rep;
    }
    return {200, j};
  }

  ApiResponse run_report(const std::string& id) const {
    if (!runs_.status(id)) return detail::api_error(404, "NotFound", "unknown run " + id);
    auto rep = runs_.report(id);
    if (!rep) return detail::api_error(404, "NotFound", "run " + id + " has no report yet");
    return {200, *rep};
  }

  ApiResponse list_runs() const {
    json a = json::array();
    for (const auto& s : runs_.list()) a.push_back(to_json(s));
    return {200, a};
  }

  // -------------------------------------------------------------------------
  // annotation

  ApiResponse annotation_items(const std::string& rater) {
    auto batch = load_batch();
    if (!batch) return detail::api_error(404, "NoBatch", "no annotation batch configured");
    std::map<std::string, std::set<std::string>> rated;
    for (const auto& r : ratings_.latest()) {
      if (r.rater_id == rater) rated[r.item_id].insert(r.criterion);
    }
    json a = json::array();
    for (const auto& item : *batch) {
      if (!rater.empty() && rated[item.item_id].size() == rating_criteria().size()) continue;
      a.push_back(to_json(item));
    }
    return {200, a};
  }

  ApiResponse submit_rating(const std::string& body) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception&) {
      return detail::api_error(400, "InvalidRequest", "body is not JSON");
    }
    if (!j.is_object()) return detail::api_error(400, "InvalidRequest", "body must be an object");
    auto str = [&](const char* k) {
      auto it = j.find(k);
      return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
    };
    RatingRecord r{str("item_id"), str("rater_id"), to_lower(str("criterion")), 0, {}};
    if (r.item_id.empty() || trim(r.rater_id).empty()) {
      return detail::api_error(400, "InvalidRequest", "item_id and rater_id are required");
    }
    const auto& crit = rating_criteria();
    if (std::find(crit.begin(), crit.end(), r.criterion) == crit.end()) {
      return detail::api_error(400, "InvalidRequest", "unknown criterion '" + r.criterion + "'");
    }
    auto score = j.find("score");
    if (score == j.end() || !score->is_number_integer() || score->get<long long>() < kMinScore ||
        score->get<long long>() > kMaxScore) {
      return detail::api_error(400, "InvalidRequest", "score must be an integer in [1, 10]");
    }
    r.score = score->get<int>();

    auto batch = load_batch();
    if (!batch) return detail::api_error(404, "NoBatch", "no annotation batch configured");
    bool known = std::any_of(batch->begin(), batch->end(), [&](const auto& it) { return it.item_id == r.item_id; });
    if (!known) return detail::api_error(404, "NotFound", "item " + r.item_id + " is not in the batch");
    ratings_.append(r);
    return {201, {{"item_id", r.item_id}, {"rater_id", r.rater_id}, {"criterion", r.criterion}, {"score", r.score}}};
  }

  ApiResponse annotation_agreement() const {
    auto latest = ratings_.latest();
    std::set<std::string> raters;
    for (const auto& r : latest) raters.insert(r.rater_id);
    if (raters.size() < 2) {
      return detail::api_error(409, "InsufficientRaters", std::to_string(raters.size()) + " rater(s) with ratings");
    }
    json per = json::object();
    auto section = [&](const std::optional<std::string>& criterion) {
      try {
        return to_json(agreement_report(build_rating_matrix(latest, criterion)));
      } catch (const Error& e) {
        return json{{"error", std::string(to_string(e.code()))}, {"detail", e.what()}};
      }
    };
    for (const auto& c : rating_criteria()) per[c] = section(c);
    return {200, {{"criteria", per}, {"pooled", section(std::nullopt)}, {"n_raters", raters.size()}}};
  }

  ApiResponse health() const {
    return {200, {{"status", issues_.empty() ? "ok" : "degraded"}, {"store_issues", issues_}}};
  }

  // -------------------------------------------------------------------------
  // HTTP wiring

  void register_routes(httplib::Server& svr) {
    auto send = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    auto origin = ws_.config.cors_origin;
    svr.set_default_headers({{"Access-Control-Allow-Origin", origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    svr.Post("/runs", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, submit_run(req.body)); });
    svr.Get("/runs", [this, send](const httplib::Request&, httplib::Response& res) { send(res, list_runs()); });
    svr.Get(R"(/runs/([A-Za-z0-9_-]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, run_status(req.matches[1]));
    });
    svr.Get(R"(/runs/([A-Za-z0-9_-]+)/report)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, run_report(req.matches[1]));
    });
    svr.Get("/annotation/items", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, annotation_items(req.get_param_value("rater")));
    });
    svr.Post("/annotation/ratings", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, submit_rating(req.body));
    });
    svr.Get("/annotation/agreement", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, annotation_agreement());
    });
    svr.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json{{"error", "Internal"}, {"detail", what}}.dump(), "application/json");
    });
  }

 private:
  struct Job {
    std::string run_id;
    PipelineKind kind;
    Partition partition;
    Workspace ws;
  };

  void work(std::stop_token st) {
    while (!st.stop_requested()) {
      std::optional<Job> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, st, [&] { return !queue_.empty(); });
        if (queue_.empty()) continue;
        job = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
      }
      execute(*job);
      {
        std::lock_guard lock(mu_);
        busy_ = false;
      }
      idle_cv_.notify_all();
    }
  }

  void execute(const Job& job) {
    RunStatus st{job.run_id, RunState::Running, std::string(to_string(job.kind)), std::string(to_string(job.partition)), "", ""};
    runs_.set_state(st);
    try {
      auto run = execute_run(job.ws, providers_, job.kind, job.partition, job.run_id);
      runs_.store_run(run);
      auto report = evaluate_run(run, job.ws, providers_);
      runs_.store_report(job.run_id, to_json(report));
      st.state = RunState::Done;
    } catch (const std::exception& e) {
      st.state = RunState::Failed;
      st.error = e.what();
    }
    st.updated_at.clear();
    runs_.set_state(st);
  }

  /// First annotation_n predictions, by case id, of the designated run.
  std::optional<std::vector<AnnotationItem>> load_batch() {
    const auto& id = ws_.config.annotation_run;
    if (id.empty()) return std::nullopt;
    std::lock_guard lock(batch_mu_);
    if (batch_) return batch_;
    auto st = runs_.status(id);
    if (!st || st->state != RunState::Done) return std::nullopt;
    auto run = runs_.load_run(id);
    std::sort(run.predictions.begin(), run.predictions.end(),
              [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
    std::vector<AnnotationItem> items;
    for (const auto& p : run.predictions) {
      if (items.size() >= ws_.config.annotation_n) break;
      AnnotationItem item{p.case_id, {}, {}, p.explanation};
      if (const auto* s = ws_.summaries.find(SummaryKind::CaseText, p.case_id)) item.case_summary = s->text;
      else if (auto d = ws_.corpus.find(p.case_id); d != ws_.corpus.end()) item.case_summary = d->second.case_text;
      if (auto r = ws_.references.find(p.case_id); r != ws_.references.end()) item.reference_explanation = r->second;
      items.push_back(std::move(item));
    }
    batch_ = std::move(items);
    return batch_;
  }

  Workspace ws_;
  Providers providers_;
  RunRegistry runs_;
  RatingLog ratings_;
  std::vector<std::string> issues_;

  std::mutex mu_;
  std::condition_variable_any cv_;
  std::condition_variable_any idle_cv_;
  std::deque<Job> queue_;
  bool busy_ = false;

  std::mutex batch_mu_;
  std::optional<std::vector<AnnotationItem>> batch_;

  std::jthread worker_;
};

/// Runs the service on `port` until the server is stopped.
inline int serve(const Config& cfg, int port, std::ostream& log) {
  ExperimentService service(cfg);
  for (const auto& issue : service.startup_issues()) log << "store: " << issue << "\n";
  httplib::Server svr;
  service.register_routes(svr);
  log << "listening on port " << port << "\n" << std::flush;
  if (!svr.listen("0.0.0.0", port)) throw Error(Errc::IoFailure, "cannot listen on port " + std::to_string(port));
  return 0;
}

}  // namespace nyaya
