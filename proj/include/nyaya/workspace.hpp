#pragma once

// Data-directory layout and the loaded state shared by the CLI and the
// service: corpus, summaries, index, shots and references.
//
//   corpus.jsonl      validated corpus (ingest)
//   summaries.jsonl   summary store (summarize)
//   embeddings.jsonl  case-summary embeddings (embed)
//   index.nyidx       vector index (index)

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "nyaya/providers.hpp"
#include "nyaya/store.hpp"

namespace nyaya {

struct DataPaths {
  fs::path root;

  fs::path corpus() const { return root / "corpus.jsonl"; }
  fs::path summaries() const { return root / "summaries.jsonl"; }
  fs::path embeddings() const { return root / "embeddings.jsonl"; }
  fs::path index() const { return root / "index.nyidx"; }
  fs::path ratings() const { return root / "ratings.jsonl"; }
};

inline std::ifstream open_input(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + p.string());
  return in;
}

struct Workspace {
  Config config;
  DataPaths paths;
  std::vector<CaseDocument> docs;
  CorpusStore corpus;
  SummaryStore summaries;
  std::optional<VectorIndex> index;
  std::vector<FewShotExample> shots;
  std::map<std::string, std::string> references;

  /// Loads whatever the data directory holds; absent files load as empty.
  static Workspace load(const Config& cfg) {
    Workspace ws;
    ws.config = cfg;
    ws.paths.root = cfg.data_dir;
    if (fs::exists(ws.paths.corpus())) {
      auto in = open_input(ws.paths.corpus());
      ws.docs = parse_corpus(in);
      ws.corpus = make_corpus_store(ws.docs);
    }
    if (fs::exists(ws.paths.summaries())) {
      auto in = open_input(ws.paths.summaries());
      ws.summaries = SummaryStore::load(in);
    }
    if (fs::exists(ws.paths.index())) ws.index = load_index(ws.paths.index().string());
    if (!cfg.shots_path.empty()) {
      auto in = open_input(cfg.shots_path);
      ws.shots = load_shots(in);
      if (ws.shots.size() > static_cast<std::size_t>(cfg.n_shots)) ws.shots.resize(static_cast<std::size_t>(cfg.n_shots));
    }
    if (!cfg.references_path.empty()) {
      auto in = open_input(cfg.references_path);
      ws.references = load_references(in);
    }
    return ws;
  }

  AssemblyInputs inputs(Embedder* embedder) const {
    return {summaries, corpus, index ? &*index : nullptr, embedder};
  }

  /// Reason the kind cannot run on this partition, if any.
  std::optional<std::string> missing_prerequisite(PipelineKind kind, Partition partition) const {
    bool any = false;
    for (const auto& d : docs) {
      if (d.partition != partition || !d.gold_label) continue;
      any = true;
      bool facts = uses_facts(kind);
      if (facts && trim(d.facts_text).empty()) continue;
      if (facts && config.facts_mode == "summary" && !summaries.contains(SummaryKind::Facts, d.id)) {
        return "no Facts summary for " + d.id;
      }
      if (!facts && !summaries.contains(SummaryKind::CaseText, d.id)) return "no CaseText summary for " + d.id;
    }
    if (!any) return "no labeled documents in partition " + std::string(to_string(partition));
    if (uses_similar(kind) && !index) return "no vector index";
    return std::nullopt;
  }
};

inline ExperimentRun execute_run(const Workspace& ws, Providers& providers, PipelineKind kind, Partition partition,
                                 const std::string& run_id = {}) {
  RunOptions opt;
  opt.decoding = decoding_options(ws.config);
  opt.max_parallel = ws.config.max_inflight;
  opt.run_id = run_id;
  opt.config_hash = config_hash(ws.config);
  return run_experiment(ws.docs, partition, pipeline_config(ws.config, kind), ws.shots,
                        ws.inputs(providers.embedder.get()), *providers.llm, opt);
}

/// Explanation metrics need reference explanations; without any configured
/// the report carries classification only.
inline EvaluationReport evaluate_run(const ExperimentRun& run, const Workspace& ws, Providers& providers) {
  AggregateOptions opt;
  opt.judge = providers.judge.get();
  opt.geval.judge_model = ws.config.judge_model;
  opt.scorer = providers.scorer.get();
  opt.explanation_metrics = !ws.references.empty();
  return aggregate(run, gold_labels(ws.docs), ws.references, opt);
}

}  // namespace nyaya
