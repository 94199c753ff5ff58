#pragma once

// Append-only line-delimited stores under a data directory.
//
//   ratings.jsonl      every submitted rating, latest per key wins
//   runs.jsonl         run state transitions
//   reports.jsonl      evaluation reports, one per finished run
//   runs/<id>.jsonl    immutable run files
//   snapshot.json      byte length and CRC-32 of each file at snapshot time

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "nyaya/agreement.hpp"
#include "nyaya/judgment.hpp"
#include "nyaya/retrieval.hpp"

namespace nyaya {

namespace fs = std::filesystem;

struct StoreCorruption {
  std::string file;
  std::size_t line = 0;
  std::string quarantine_path;

  std::string message() const { return file + ":" + std::to_string(line) + " unreadable; tail moved to " + quarantine_path; }
};

struct JsonlReplay {
  std::vector<json> records;
  std::optional<StoreCorruption> corruption;
};

inline std::string read_file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

namespace detail {

inline void write_all(int fd, std::string_view bytes, const fs::path& p) {
  while (!bytes.empty()) {
    auto n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::IoFailure, p.string() + ": " + std::strerror(errno));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

inline void durable_write(const fs::path& p, std::string_view bytes, int flags) {
  int fd = ::open(p.c_str(), flags | O_WRONLY | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::IoFailure, "cannot open " + p.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, bytes, p);
    if (::fsync(fd) != 0) throw Error(Errc::IoFailure, "fsync " + p.string() + ": " + std::strerror(errno));
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

}  // namespace detail

/// Replaces `p` atomically with `bytes`.
inline void write_file_atomic(const fs::path& p, std::string_view bytes) {
  auto tmp = p;
  tmp += ".tmp";
  detail::durable_write(tmp, bytes, O_CREAT | O_TRUNC);
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw Error(Errc::IoFailure, "rename " + tmp.string() + ": " + ec.message());
}

/// Reads every newline-terminated JSON record of `file`. The first
/// unreadable or unterminated line and everything after it is moved to
/// `<file>.quarantine` and the file is cut back to the readable prefix.
/// A missing file replays as empty.
inline JsonlReplay replay_jsonl(const fs::path& file) {
  JsonlReplay out;
  if (!fs::exists(file)) return out;
  auto bytes = read_file_bytes(file);
  std::size_t pos = 0, line_no = 0;
  while (pos < bytes.size()) {
    ++line_no;
    auto nl = bytes.find('\n', pos);
    bool ok = nl != std::string::npos;
    if (ok) {
      std::string_view line(bytes.data() + pos, nl - pos);
      if (!trim(line).empty()) {
        try {
          out.records.push_back(json::parse(line));
        } catch (const json::exception&) {
          ok = false;
        }
      }
    }
    if (!ok) {
      auto q = file;
      q += ".quarantine";
      detail::durable_write(q, std::string_view(bytes).substr(pos), O_CREAT | O_APPEND);
      std::error_code ec;
      fs::resize_file(file, pos, ec);
      if (ec) throw Error(Errc::IoFailure, "truncate " + file.string() + ": " + ec.message());
      out.corruption = StoreCorruption{file.string(), line_no, q.string()};
      return out;
    }
    pos = nl + 1;
  }
  return out;
}

/// Strict replay: any unreadable line raises CorruptStore(file, line).
inline std::vector<json> read_jsonl_strict(const fs::path& file) {
  std::vector<json> out;
  if (!fs::exists(file)) return out;
  auto bytes = read_file_bytes(file);
  std::size_t pos = 0, line_no = 0;
  while (pos < bytes.size()) {
    ++line_no;
    auto nl = bytes.find('\n', pos);
    auto where = file.string() + ":" + std::to_string(line_no);
    if (nl == std::string::npos) throw Error(Errc::CorruptStore, where + ": unterminated record");
    std::string_view line(bytes.data() + pos, nl - pos);
    if (!trim(line).empty()) {
      try {
        out.push_back(json::parse(line));
      } catch (const json::exception&) {
        throw Error(Errc::CorruptStore, where + ": unreadable record");
      }
    }
    pos = nl + 1;
  }
  return out;
}

/// Serialized, fsync'd appends to one file.
class AppendLog {
 public:
  explicit AppendLog(fs::path file) : file_(std::move(file)) {}

  void append(const json& record) {
    auto line = record.dump() + "\n";
    std::lock_guard lock(mu_);
    detail::durable_write(file_, line, O_CREAT | O_APPEND);
  }

  const fs::path& path() const noexcept { return file_; }

 private:
  fs::path file_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// ratings

inline json to_json(const RatingRecord& r) {
  return {{"item_id", r.item_id}, {"rater_id", r.rater_id}, {"criterion", r.criterion}, {"score", r.score},
          {"submitted_at", r.submitted_at}};
}

inline RatingRecord rating_from_json(const json& j) {
  RatingRecord r{j.at("item_id").get<std::string>(), j.at("rater_id").get<std::string>(),
                 j.at("criterion").get<std::string>(), j.at("score").get<int>(), j.value("submitted_at", std::string())};
  if (r.score < kMinScore || r.score > kMaxScore) throw std::invalid_argument("score outside [1, 10]");
  return r;
}

class RatingLog {
 public:
  using Key = std::tuple<std::string, std::string, std::string>;  // item, rater, criterion

  explicit RatingLog(const fs::path& file) : log_(file) {
    auto replay = replay_jsonl(file);
    corruption_ = replay.corruption;
    for (std::size_t i = 0; i < replay.records.size(); ++i) {
      try {
        apply(rating_from_json(replay.records[i]));
      } catch (const std::exception&) {
        throw Error(Errc::CorruptStore, file.string() + ":" + std::to_string(i + 1) + ": invalid rating");
      }
    }
  }

  void append(RatingRecord r) {
    if (r.submitted_at.empty()) r.submitted_at = utc_timestamp();
    std::lock_guard lock(mu_);
    log_.append(to_json(r));
    apply(std::move(r));
  }

  /// Latest rating per (item, rater, criterion), ordered by key.
  std::vector<RatingRecord> latest() const {
    std::lock_guard lock(mu_);
    std::vector<RatingRecord> out;
    for (const auto& [key, idx] : latest_) out.push_back(audit_[idx]);
    return out;
  }

  /// Every rating ever accepted, in submission order.
  std::vector<RatingRecord> audit_trail() const {
    std::lock_guard lock(mu_);
    return audit_;
  }

  std::vector<RatingRecord> history(const std::string& item, const std::string& rater, const std::string& criterion) const {
    std::lock_guard lock(mu_);
    std::vector<RatingRecord> out;
    for (const auto& r : audit_) {
      if (r.item_id == item && r.rater_id == rater && r.criterion == criterion) out.push_back(r);
    }
    return out;
  }

  const std::optional<StoreCorruption>& corruption() const noexcept { return corruption_; }

 private:
  void apply(RatingRecord r) {
    latest_[{r.item_id, r.rater_id, r.criterion}] = audit_.size();
    audit_.push_back(std::move(r));
  }

  AppendLog log_;
  mutable std::mutex mu_;
  std::vector<RatingRecord> audit_;
  std::map<Key, std::size_t> latest_;
  std::optional<StoreCorruption> corruption_;
};

// ---------------------------------------------------------------------------
// runs

enum class RunState { Queued, Running, Done, Failed };

inline std::string_view to_string(RunState s) noexcept {
  switch (s) {
    case RunState::Queued: return "queued";
    case RunState::Running: return "running";
    case RunState::Done: return "done";
    case RunState::Failed: return "failed";
  }
  return "failed";
}

inline std::optional<RunState> parse_run_state(std::string_view s) noexcept {
  for (auto st : {RunState::Queued, RunState::Running, RunState::Done, RunState::Failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

struct RunStatus {
  std::string run_id;
  RunState state = RunState::Queued;
  std::string kind;
  std::string partition;
  std::string error;
  std::string updated_at;

  bool operator==(const RunStatus&) const = default;
};

inline json to_json(const RunStatus& s) {
  return {{"run_id", s.run_id}, {"state", std::string(to_string(s.state))}, {"kind", s.kind},
          {"partition", s.partition}, {"error", s.error}, {"updated_at", s.updated_at}};
}

inline RunStatus run_status_from_json(const json& j) {
  auto st = parse_run_state(j.at("state").get<std::string>());
  if (!st) throw std::invalid_argument("unknown run state");
  return {j.at("run_id").get<std::string>(), *st, j.at("kind").get<std::string>(),
          j.at("partition").get<std::string>(), j.value("error", std::string()), j.value("updated_at", std::string())};
}

inline bool valid_run_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

/// Run states, run files and reports. On open, runs left queued or running
/// by a previous process are recorded as failed.
class RunRegistry {
 public:
  explicit RunRegistry(const fs::path& data_dir)
      : dir_(data_dir), states_(data_dir / "runs.jsonl"), reports_(data_dir / "reports.jsonl") {
    fs::create_directories(dir_ / "runs");
    auto s = replay_jsonl(states_.path());
    if (s.corruption) corruption_.push_back(*s.corruption);
    for (std::size_t i = 0; i < s.records.size(); ++i) {
      try {
        auto st = run_status_from_json(s.records[i]);
        status_[st.run_id] = st;
      } catch (const std::exception&) {
        throw Error(Errc::CorruptStore, states_.path().string() + ":" + std::to_string(i + 1) + ": invalid run state");
      }
    }
    auto r = replay_jsonl(reports_.path());
    if (r.corruption) corruption_.push_back(*r.corruption);
    for (std::size_t i = 0; i < r.records.size(); ++i) {
      const auto& j = r.records[i];
      if (!j.contains("run_id") || !j.contains("report")) {
        throw Error(Errc::CorruptStore, reports_.path().string() + ":" + std::to_string(i + 1) + ": invalid report");
      }
      reports_by_id_[j["run_id"].get<std::string>()] = j["report"];
    }
    for (auto& [id, st] : status_) {
      if (st.state == RunState::Queued || st.state == RunState::Running) {
        auto failed = st;
        failed.state = RunState::Failed;
        failed.error = "interrupted by restart";
        set_state(failed);
      }
    }
  }

  void set_state(RunStatus s) {
    if (s.updated_at.empty()) s.updated_at = utc_timestamp();
    std::lock_guard lock(mu_);
    states_.append(to_json(s));
    status_[s.run_id] = std::move(s);
  }

  std::optional<RunStatus> status(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = status_.find(id);
    if (it == status_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<RunStatus> list() const {
    std::lock_guard lock(mu_);
    std::vector<RunStatus> out;
    for (const auto& [id, s] : status_) out.push_back(s);
    return out;
  }

  fs::path run_path(const std::string& id) const {
    if (!valid_run_id(id)) throw Error(Errc::InvalidRequest, "invalid run id '" + id + "'");
    return dir_ / "runs" / (id + ".jsonl");
  }

  void store_run(const ExperimentRun& run) {
    std::ostringstream s;
    write_run_file(s, run);
    write_file_atomic(run_path(run.run_id), s.str());
  }

  ExperimentRun load_run(const std::string& id) const {
    auto p = run_path(id);
    if (!fs::exists(p)) throw Error(Errc::IoFailure, "no run file for " + id);
    std::istringstream in(read_file_bytes(p));
    return read_run_file(in);
  }

  void store_report(const std::string& id, const json& report) {
    std::lock_guard lock(mu_);
    reports_.append({{"run_id", id}, {"report", report}});
    reports_by_id_[id] = report;
  }

  std::optional<json> report(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = reports_by_id_.find(id);
    if (it == reports_by_id_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<StoreCorruption>& corruption() const noexcept { return corruption_; }

 private:
  fs::path dir_;
  AppendLog states_;
  AppendLog reports_;
  mutable std::mutex mu_;
  std::map<std::string, RunStatus> status_;
  std::map<std::string, json> reports_by_id_;
  std::vector<StoreCorruption> corruption_;
};

// ---------------------------------------------------------------------------
// snapshot manifest

inline std::vector<fs::path> store_files(const fs::path& data_dir) {
  std::vector<fs::path> out;
  if (!fs::exists(data_dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(data_dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), data_dir);
    auto name = rel.filename().string();
    if (name == "snapshot.json" || name.ends_with(".tmp") || name.ends_with(".quarantine")) continue;
    out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Writes snapshot.json listing the length and CRC-32 of every store file.
inline json write_snapshot(const fs::path& data_dir) {
  json files = json::object();
  for (const auto& rel : store_files(data_dir)) {
    auto bytes = read_file_bytes(data_dir / rel);
    files[rel.generic_string()] = {{"bytes", bytes.size()}, {"crc32", detail::crc32_of(bytes)}};
  }
  json manifest = {{"created_at", utc_timestamp()}, {"files", files}};
  write_file_atomic(data_dir / "snapshot.json", manifest.dump(2) + "\n");
  return manifest;
}

/// Checks each file listed in the snapshot still starts with the recorded
/// bytes (append-only files may have grown). Returns one message per problem.
inline std::vector<std::string> verify_snapshot(const fs::path& data_dir) {
  std::vector<std::string> problems;
  auto path = data_dir / "snapshot.json";
  if (!fs::exists(path)) return problems;
  json manifest;
  try {
    manifest = json::parse(read_file_bytes(path));
  } catch (const json::exception&) {
    return {"snapshot.json unreadable"};
  }
  for (const auto& [name, entry] : manifest.at("files").items()) {
    auto p = data_dir / name;
    if (!fs::exists(p)) {
      problems.push_back(name + ": missing");
      continue;
    }
    auto bytes = read_file_bytes(p);
    auto len = entry.at("bytes").get<std::size_t>();
    if (bytes.size() < len) {
      problems.push_back(name + ": shorter than snapshot");
    } else if (detail::crc32_of(std::string_view(bytes).substr(0, len)) != entry.at("crc32").get<std::uint32_t>()) {
      problems.push_back(name + ": checksum mismatch");
    }
  }
  return problems;
}

}  // namespace nyaya
