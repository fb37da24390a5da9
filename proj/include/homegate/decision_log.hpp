#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "homegate/corpus.hpp"
#include "homegate/pipeline.hpp"

namespace homegate::decision_log {

// One decision per line, in the corpus line format extended with decision
// evidence. Lines carrying type_id and gold label (eval runs) can be
// re-scored by the harness; service lines omit them.
struct Entry {
  std::string id;  // request id or sample id
  std::string household_id;
  std::string text;
  std::int64_t timestamp = 0;
  std::optional<int> type_id;
  std::optional<corpus::Label> gold;
  corpus::Label verdict = corpus::Label::Reject;
  std::string mode;
  std::vector<std::string> retrieved_case_ids;
  std::size_t history_used = 0;
  double backend_latency_ms = 0.0;
  bool degraded = false;
  std::string reason;
  std::string prompt_hash;
};

Entry make_entry(std::string id, std::string household_id, std::string text,
                 std::int64_t timestamp, const pipeline::Decision& decision);

nlohmann::json to_json(const Entry& entry);
std::string to_line(const Entry& entry);
Entry entry_from_line(std::string_view line);  // throws corpus::CorpusError

// Optional metadata header (first line, {"meta": {...}}) recording the run
// configuration so a log round-trips into the same report.
struct LogFile {
  nlohmann::json meta;  // empty object when the log has no header
  std::vector<Entry> entries;
};

LogFile read_log(const std::string& path);  // throws corpus::CorpusError

class Writer {
 public:
  explicit Writer(const std::string& path);
  void write_meta(const nlohmann::json& meta);
  void append(const Entry& entry);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::mutex mutex_;
};

}  // namespace homegate::decision_log
