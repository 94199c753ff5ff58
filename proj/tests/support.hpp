#pragma once

// Shared helpers for the test suites and the acceptance runner.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nyaya/nyaya.hpp"

#ifndef NYAYA_FIXTURE_DIR
#error "NYAYA_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace nyaya::testing {

namespace fs = std::filesystem;

inline fs::path fixture(std::string_view name) { return fs::path(NYAYA_FIXTURE_DIR) / name; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("nyaya-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(std::string_view name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<CaseDocument> load_corpus(const fs::path& p) {
  std::ifstream in(p);
  return parse_corpus(in);
}

inline std::vector<CaseDocument> corpus20() { return load_corpus(fixture("corpus20.jsonl")); }

inline std::map<std::string, std::string> references20() {
  std::ifstream in(fixture("references20.jsonl"));
  return load_references(in);
}

inline std::vector<FewShotExample> shots() {
  std::ifstream in(fixture("shots.jsonl"));
  return load_shots(in);
}

/// Case-text, facts, statute and precedent summaries from `gen`.
inline SummaryStore summarize_all(const std::vector<CaseDocument>& docs, Generator& gen, std::size_t statute_budget = 300,
                                  std::size_t precedent_budget = 1000) {
  SummaryStore store;
  for (const auto& d : docs) {
    store.put(summarize(d, SummaryKind::CaseText, gen));
    if (!trim(d.facts_text).empty()) store.put(summarize(d, SummaryKind::Facts, gen));
    for (const auto& s : d.statutes) {
      if (!s.text.empty()) store.put(summarize_statute(s, statute_budget, gen));
    }
    for (const auto& p : d.precedents) {
      if (!p.text.empty()) store.put(summarize_reference(p.id, SummaryKind::Precedent, p.text, precedent_budget, gen));
    }
  }
  return store;
}

inline VectorIndex index_summaries(const std::vector<CaseDocument>& docs, const SummaryStore& summaries, Embedder& embedder) {
  std::vector<std::pair<std::string, EmbeddingVector>> pairs;
  for (const auto& d : docs) {
    pairs.emplace_back(d.id, embedder.embed({summaries.find(SummaryKind::CaseText, d.id)->text}).front());
  }
  return build_index(pairs, embedder.dimension());
}

/// Run file with the run id and creation time blanked.
inline std::string normalized_run_file(ExperimentRun run) {
  run.run_id = "RUN";
  run.created_at = "TIME";
  std::ostringstream s;
  write_run_file(s, run);
  return s.str();
}

}  // namespace nyaya::testing
