#pragma once

// `nyaya` command-line driver. Exit codes: 0 success, 1 domain error,
// 2 usage error.

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nyaya/service.hpp"

namespace nyaya::cli {

enum class Format { Table, Records };

struct Common {
  std::string config_path;
  std::string data_dir;
  std::string format = "table";
  std::map<std::string, std::string> overrides;

  Format output() const { return format == "records" ? Format::Records : Format::Table; }

  Config load() const {
    auto path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv("NYAYA_CONFIG"); env != nullptr) path = env;
    }
    auto flags = overrides;
    if (!data_dir.empty()) flags["data_dir"] = data_dir;
    return load_config(path, flags);
  }
};

namespace detail {

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Config file (key = value lines); defaults to $NYAYA_CONFIG");
  sub->add_option("--data-dir", c.data_dir, "Data directory (overrides data_dir)");
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"table", "records"}));
}

inline void write_summaries(const Workspace& ws) {
  std::ostringstream s;
  ws.summaries.save(s);
  fs::create_directories(ws.paths.root);
  write_file_atomic(ws.paths.summaries(), s.str());
}

inline std::vector<std::pair<std::string, EmbeddingVector>> read_embeddings(const fs::path& p) {
  std::vector<std::pair<std::string, EmbeddingVector>> out;
  for (const auto& j : read_jsonl_strict(p)) {
    out.emplace_back(j.at("id").get<std::string>(), EmbeddingVector{j.at("vector").get<std::vector<double>>()});
  }
  return out;
}

inline std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// subcommands

inline int cmd_ingest(const Common& c, const std::string& input, std::ostream& out) {
  auto cfg = c.load();
  auto in = open_input(input);
  auto docs = parse_corpus(in);
  std::ostringstream s;
  serialize_corpus(s, docs);
  DataPaths paths{cfg.data_dir};
  fs::create_directories(paths.root);
  write_file_atomic(paths.corpus(), s.str());
  std::size_t single = 0, labeled = 0;
  for (const auto& d : docs) {
    single += d.partition == Partition::Single;
    labeled += d.gold_label.has_value();
  }
  if (c.output() == Format::Records) {
    out << json{{"documents", docs.size()}, {"single", single}, {"multi", docs.size() - single}, {"labeled", labeled}}.dump()
        << "\n";
  } else {
    out << "ingested " << docs.size() << " documents (" << single << " Single, " << docs.size() - single
        << " Multi, " << labeled << " labeled) into " << paths.corpus().string() << "\n";
  }
  return 0;
}

inline int cmd_summarize(const Common& c, bool force, std::ostream& out) {
  auto cfg = c.load();
  auto ws = Workspace::load(cfg);
  if (ws.docs.empty()) throw Error(Errc::MissingText, "corpus is empty; run ingest first");
  auto providers = make_providers(cfg);
  auto opt = summarizer_options(cfg);
  std::size_t made = 0, out_of_band = 0;
  auto want = [&](SummaryKind k, const std::string& id) { return force || !ws.summaries.contains(k, id); };
  auto keep = [&](Summary s) {
    out_of_band += s.out_of_band;
    ++made;
    ws.summaries.put(std::move(s));
  };
  for (const auto& d : ws.docs) {
    if (want(SummaryKind::CaseText, d.id)) keep(summarize(d, SummaryKind::CaseText, *providers.llm, opt));
    if (!trim(d.facts_text).empty() && want(SummaryKind::Facts, d.id)) {
      keep(summarize(d, SummaryKind::Facts, *providers.llm, opt));
    }
    for (const auto& st : d.statutes) {
      if (!st.text.empty() && want(SummaryKind::Statute, st.id)) keep(summarize_statute(st, cfg.statute_budget, *providers.llm, opt));
    }
    for (const auto& p : d.precedents) {
      if (!p.text.empty() && want(SummaryKind::Precedent, p.id)) {
        keep(summarize_reference(p.id, SummaryKind::Precedent, p.text, cfg.summary_max_tokens, *providers.llm, opt));
      }
    }
  }
  detail::write_summaries(ws);
  if (c.output() == Format::Records) {
    out << json{{"created", made}, {"out_of_band", out_of_band}, {"total", ws.summaries.size()}}.dump() << "\n";
  } else {
    out << "created " << made << " summaries (" << out_of_band << " out of band); store holds " << ws.summaries.size()
        << "\n";
  }
  return 0;
}

inline int cmd_embed(const Common& c, std::ostream& out) {
  auto cfg = c.load();
  auto ws = Workspace::load(cfg);
  if (ws.docs.empty()) throw Error(Errc::MissingText, "corpus is empty; run ingest first");
  auto providers = make_providers(cfg);
  std::vector<std::string> ids, texts;
  for (const auto& d : ws.docs) {
    const auto* s = ws.summaries.find(SummaryKind::CaseText, d.id);
    if (!s) throw Error(Errc::MissingSummary, d.id + " (CaseText); run summarize first");
    ids.push_back(d.id);
    texts.push_back(s->text);
  }
  auto vectors = providers.embedder->embed(texts);
  std::ostringstream s;
  for (std::size_t i = 0; i < ids.size(); ++i) s << json{{"id", ids[i]}, {"vector", vectors[i].values}}.dump() << "\n";
  write_file_atomic(ws.paths.embeddings(), s.str());
  if (c.output() == Format::Records) {
    out << json{{"embedded", ids.size()}, {"dimension", providers.embedder->dimension()}}.dump() << "\n";
  } else {
    out << "embedded " << ids.size() << " case summaries (dimension " << providers.embedder->dimension() << ")\n";
  }
  return 0;
}

inline int cmd_index(const Common& c, std::ostream& out) {
  auto cfg = c.load();
  DataPaths paths{cfg.data_dir};
  if (!fs::exists(paths.embeddings())) throw Error(Errc::MissingIndex, "no embeddings; run embed first");
  auto pairs = detail::read_embeddings(paths.embeddings());
  auto index = build_index(pairs, cfg.embed_dim);
  save_index(index, paths.index().string());
  if (c.output() == Format::Records) {
    out << json{{"entries", index.size()}, {"dimension", index.dimension()}}.dump() << "\n";
  } else {
    out << "indexed " << index.size() << " vectors into " << paths.index().string() << "\n";
  }
  return 0;
}

inline int cmd_retrieve(const Common& c, const std::string& id, int k, std::ostream& out) {
  auto cfg = c.load();
  auto ws = Workspace::load(cfg);
  if (!ws.index) throw Error(Errc::MissingIndex, "no index; run index first");
  EmbeddingVector query;
  if (auto stored = ws.index->find(id)) {
    query = std::move(*stored);
  } else {
    const auto* s = ws.summaries.find(SummaryKind::CaseText, id);
    if (!s) throw Error(Errc::MissingSummary, id + " is neither indexed nor summarized");
    auto providers = make_providers(cfg);
    query = providers.embedder->embed({s->text}).front();
  }
  QueryOptions opt;
  opt.exclude_id = id;
  auto hits = query_top_k(*ws.index, query, static_cast<std::size_t>(k), opt);
  if (c.output() == Format::Records) {
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out << json{{"rank", i + 1}, {"id", hits[i].id}, {"similarity", hits[i].similarity}}.dump() << "\n";
    }
  } else {
    out << std::left << std::setw(6) << "rank" << std::setw(24) << "id" << "similarity\n";
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out << std::setw(6) << i + 1 << std::setw(24) << hits[i].id << detail::fixed(hits[i].similarity, 6) << "\n";
    }
  }
  return 0;
}

inline int cmd_run(const Common& c, const std::string& pipeline, const std::string& partition_name,
                   const std::string& run_id, std::ostream& out) {
  auto kind = parse_pipeline_kind(pipeline);
  if (!kind) throw Error(Errc::UnknownPipeline, pipeline);
  auto partition = parse_partition(partition_name);
  if (!partition) throw Error(Errc::InvalidRequest, "partition must be Single or Multi");
  auto cfg = c.load();
  auto ws = Workspace::load(cfg);
  auto providers = make_providers(cfg);
  if (!run_id.empty() && !valid_run_id(run_id)) throw Error(Errc::InvalidRequest, "invalid run id '" + run_id + "'");
  auto run = execute_run(ws, providers, *kind, *partition, run_id);
  RunRegistry registry(cfg.data_dir);
  registry.store_run(run);
  registry.set_state({run.run_id, RunState::Done, pipeline, partition_name, "", ""});
  if (c.output() == Format::Records) {
    out << manifest_json(run).dump() << "\n";
  } else {
    out << "run " << run.run_id << ": " << run.predictions.size() << " predictions, " << run.failures.size()
        << " failures, " << run.excluded.size() << " excluded -> " << registry.run_path(run.run_id).string() << "\n";
    for (const auto& f : run.failures) out << "  failed " << f.case_id << ": " << f.reason << "\n";
  }
  return 0;
}

inline int cmd_evaluate(const Common& c, const std::string& run_ref, std::ostream& out) {
  auto cfg = c.load();
  auto ws = Workspace::load(cfg);
  auto providers = make_providers(cfg);
  RunRegistry registry(cfg.data_dir);
  ExperimentRun run;
  if (fs::exists(run_ref) && fs::is_regular_file(run_ref)) {
    auto in = open_input(run_ref);
    run = read_run_file(in);
  } else {
    run = registry.load_run(run_ref);
  }
  auto report = evaluate_run(run, ws, providers);
  registry.store_report(run.run_id, to_json(report));
  if (c.output() == Format::Records) write_report_records(out, report);
  else write_report_table(out, report);
  return 0;
}

inline int cmd_iaa(const Common& c, const std::string& ratings, const std::string& bins, const std::string& level,
                   std::ostream& out) {
  c.load();
  auto in = open_input(ratings);
  auto records = parse_ratings_csv(in);
  if (records.empty()) throw Error(Errc::InvalidMatrix, "ratings file has no rows");
  AgreementOptions opt;
  opt.categories = bins == "three" ? Categories::ThreeBin : Categories::Nominal;
  opt.level = level == "nominal" ? MeasurementLevel::Nominal
                                 : (level == "ordinal" ? MeasurementLevel::Ordinal : MeasurementLevel::Interval);
  auto reports = agreement_by_criterion(records, opt);
  if (c.output() == Format::Records) {
    for (const auto& [name, r] : reports) {
      auto j = to_json(r);
      j["criterion"] = name;
      out << j.dump() << "\n";
    }
  } else {
    write_agreement_table(out, reports);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// dispatch

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"nyaya: legal judgment prediction with explanations over a case corpus", "nyaya"};
  app.require_subcommand(1);
  Common common;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus file and store it in the data directory");
  std::string input;
  ingest->add_option("--input", input, "Line-delimited corpus file")->required();

  auto* summarize = app.add_subcommand("summarize", "Summarize case texts, facts, statutes and precedents");
  bool force = false;
  summarize->add_flag("--force", force, "Recompute summaries already in the store");

  auto* embed = app.add_subcommand("embed", "Embed case summaries");
  auto* index = app.add_subcommand("index", "Build the vector index from stored embeddings");

  auto* retrieve = app.add_subcommand("retrieve", "Nearest cases to a document");
  std::string doc_id;
  int k = 3;
  retrieve->add_option("--id", doc_id, "Query document id")->required();
  retrieve->add_option("--k", k, "Number of neighbours")->check(CLI::PositiveNumber);

  auto* runc = app.add_subcommand("run", "Predict a partition with one pipeline");
  std::string pipeline, partition = "Single", run_id;
  std::optional<int> run_k;
  runc->add_option("--pipeline", pipeline, "Pipeline kind, e.g. CaseTextOnly")->required();
  runc->add_option("--partition", partition, "Single or Multi");
  runc->add_option("--k", run_k, "Similar cases to retrieve")->check(CLI::PositiveNumber);
  runc->add_option("--run-id", run_id, "Run id to use instead of a generated one");

  auto* evaluate = app.add_subcommand("evaluate", "Score a run against gold labels and references");
  std::string run_ref, references;
  evaluate->add_option("--run", run_ref, "Run id or run file")->required();
  evaluate->add_option("--references", references, "Reference explanations (line-delimited {id, explanation})");

  auto* iaa = app.add_subcommand("iaa", "Inter-annotator agreement from a ratings CSV");
  std::string ratings, bins = "nominal", level = "interval";
  iaa->add_option("--ratings", ratings, "CSV with item_id, rater_id, criterion, score")->required();
  iaa->add_option("--bins", bins, "Kappa categories")->check(CLI::IsMember({"nominal", "three"}));
  iaa->add_option("--level", level, "Alpha measurement level")->check(CLI::IsMember({"nominal", "ordinal", "interval"}));

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<int> port;
  serve_cmd->add_option("--port", port, "Listen port (default $NYAYA_PORT or config port)");

  for (auto* sub : {ingest, summarize, embed, index, retrieve, runc, evaluate, iaa, serve_cmd}) detail::add_common(sub, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << "usage: nyaya <ingest|summarize|embed|index|retrieve|run|evaluate|iaa|serve> [options]; see --help\n";
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(common, input, out);
    if (*summarize) return cmd_summarize(common, force, out);
    if (*embed) return cmd_embed(common, out);
    if (*index) return cmd_index(common, out);
    if (*retrieve) return cmd_retrieve(common, doc_id, k, out);
    if (*runc) {
      if (run_k) common.overrides["k"] = std::to_string(*run_k);
      return cmd_run(common, pipeline, partition, run_id, out);
    }
    if (*evaluate) {
      if (!references.empty()) common.overrides["references_path"] = references;
      return cmd_evaluate(common, run_ref, out);
    }
    if (*iaa) return cmd_iaa(common, ratings, bins, level, out);
    if (*serve_cmd) {
      if (port) common.overrides["port"] = std::to_string(*port);
      auto cfg = common.load();
      return serve(cfg, cfg.port, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nyaya::cli
