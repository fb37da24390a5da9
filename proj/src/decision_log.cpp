#include "homegate/decision_log.hpp"

namespace homegate::decision_log {

Entry make_entry(std::string id, std::string household_id, std::string text,
                 std::int64_t timestamp, const pipeline::Decision& decision) {
  Entry entry;
  entry.id = std::move(id);
  entry.household_id = std::move(household_id);
  entry.text = std::move(text);
  entry.timestamp = timestamp;
  entry.verdict = decision.verdict;
  entry.mode = prompting::to_string(decision.mode);
  for (const auto& hit : decision.retrieved) {
    entry.retrieved_case_ids.push_back(hit.bad_case.case_id);
  }
  entry.history_used = decision.history_used;
  entry.backend_latency_ms = decision.backend_latency_ms;
  entry.degraded = decision.degraded;
  entry.reason = decision.reason;
  entry.prompt_hash = decision.prompt_hash;
  return entry;
}

nlohmann::json to_json(const Entry& entry) {
  nlohmann::json j{{"id", entry.id},
                   {"household_id", entry.household_id},
                   {"text", entry.text},
                   {"ts", entry.timestamp},
                   {"verdict", corpus::to_string(entry.verdict)},
                   {"mode", entry.mode},
                   {"retrieved", entry.retrieved_case_ids},
                   {"history_used", entry.history_used},
                   {"backend_latency_ms", entry.backend_latency_ms},
                   {"degraded", entry.degraded},
                   {"reason", entry.reason},
                   {"prompt_hash", entry.prompt_hash}};
  if (entry.type_id) {
    j["type_id"] = *entry.type_id;
  }
  if (entry.gold) {
    j["label"] = corpus::to_string(*entry.gold);
  }
  return j;
}

std::string to_line(const Entry& entry) {
  return to_json(entry).dump();
}

Entry entry_from_line(std::string_view line) {
  const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw corpus::CorpusError("decision log line is not a JSON object");
  }
  Entry entry;
  entry.id = j.value("id", "");
  entry.household_id = j.value("household_id", "");
  entry.text = j.value("text", "");
  entry.timestamp = j.value("ts", std::int64_t{0});
  if (j.contains("type_id") && j["type_id"].is_number_integer()) {
    entry.type_id = j["type_id"].get<int>();
  }
  if (j.contains("label")) {
    const auto gold = corpus::label_from_string(j.value("label", ""));
    if (!gold) {
      throw corpus::CorpusError("decision log line has an unknown gold label");
    }
    entry.gold = gold;
  }
  const auto verdict = corpus::label_from_string(j.value("verdict", ""));
  if (!verdict) {
    throw corpus::CorpusError("decision log line " + entry.id + " has no verdict");
  }
  entry.verdict = *verdict;
  entry.mode = j.value("mode", "");
  if (j.contains("retrieved") && j["retrieved"].is_array()) {
    for (const auto& id : j["retrieved"]) {
      if (id.is_string()) {
        entry.retrieved_case_ids.push_back(id.get<std::string>());
      }
    }
  }
  entry.history_used = j.value("history_used", std::size_t{0});
  entry.backend_latency_ms = j.value("backend_latency_ms", 0.0);
  entry.degraded = j.value("degraded", false);
  entry.reason = j.value("reason", "");
  entry.prompt_hash = j.value("prompt_hash", "");
  return entry;
}

LogFile read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw corpus::CorpusError("cannot read decision log: " + path);
  }
  LogFile log;
  log.meta = nlohmann::json::object();
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (first) {
      first = false;
      const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_object() && j.contains("meta")) {
        log.meta = j["meta"];
        continue;
      }
    }
    log.entries.push_back(entry_from_line(line));
  }
  return log;
}

Writer::Writer(const std::string& path) : path_(path), out_(path, std::ios::app) {
  if (!out_) {
    throw corpus::CorpusError("cannot open decision log for writing: " + path);
  }
}

void Writer::write_meta(const nlohmann::json& meta) {
  std::lock_guard lock(mutex_);
  out_ << nlohmann::json{{"meta", meta}}.dump() << '\n';
  out_.flush();
}

void Writer::append(const Entry& entry) {
  std::lock_guard lock(mutex_);
  out_ << to_line(entry) << '\n';
  out_.flush();
}

}  // namespace homegate::decision_log
