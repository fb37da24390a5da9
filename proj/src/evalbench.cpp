#include "homegate/evalbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>

#include "homegate/kernels.hpp"
#include "homegate/text.hpp"

namespace homegate::evalbench {
namespace {

struct Outcome {
  int type_id = 0;
  corpus::Label gold = corpus::Label::Reject;
  corpus::Label verdict = corpus::Label::Reject;
  std::string reason;
  bool degraded = false;
  double latency_ms = 0.0;
};

std::string format_accuracy(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

double nearest_rank(const std::vector<double>& sorted, double quantile) {
  if (sorted.empty()) {
    return 0.0;
  }
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size(), std::max<std::size_t>(rank, 1)) - 1];
}

EvalReport assemble(const std::vector<Outcome>& outcomes, std::string run_id,
                    std::string fingerprint, std::string model_name, std::string mode) {
  std::map<int, SubsetResult> subsets;
  std::vector<double> latencies;
  latencies.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    SubsetResult& s = subsets[o.type_id];
    s.type_id = o.type_id;
    ++s.n;
    if (o.reason == "parse_error") {
      ++s.parse_failures;
    } else if (o.verdict == o.gold) {
      ++s.correct;
    } else if (o.verdict == corpus::Label::Accept) {
      ++s.false_accept;
    } else {
      ++s.false_reject;
    }
    if (o.reason == "tolerant_fallback") {
      ++s.tolerant_fallbacks;
    }
    if (o.degraded) {
      ++s.degraded;
    }
    latencies.push_back(o.latency_ms);
  }

  EvalReport report;
  report.run_id = std::move(run_id);
  report.config_fingerprint = std::move(fingerprint);
  report.model_name = std::move(model_name);
  report.mode = std::move(mode);
  std::map<int, double> accs;
  std::map<int, std::size_t> counts;
  for (auto& [type_id, subset] : subsets) {
    subset.accuracy =
        subset.n == 0 ? 0.0 : static_cast<double>(subset.correct) / static_cast<double>(subset.n);
    accs[type_id] = subset.accuracy;
    counts[type_id] = subset.n;
    report.per_subset.push_back(subset);
  }
  report.weighted_accuracy = weighted_accuracy(accs, counts);
  report.total = outcomes.size();
  std::sort(latencies.begin(), latencies.end());
  report.latency.p50_ms = nearest_rank(latencies, 0.50);
  report.latency.p95_ms = nearest_rank(latencies, 0.95);
  return report;
}

nlohmann::json subset_to_json(const SubsetResult& s) {
  return nlohmann::json{{"type_id", s.type_id},
                        {"n", s.n},
                        {"correct", s.correct},
                        {"accuracy", s.accuracy},
                        {"false_accept", s.false_accept},
                        {"false_reject", s.false_reject},
                        {"parse_failures", s.parse_failures},
                        {"tolerant_fallbacks", s.tolerant_fallbacks},
                        {"degraded", s.degraded}};
}

SubsetResult subset_from_json(const nlohmann::json& j) {
  SubsetResult s;
  s.type_id = j.at("type_id").get<int>();
  s.n = j.at("n").get<std::size_t>();
  s.correct = j.at("correct").get<std::size_t>();
  s.accuracy = j.at("accuracy").get<double>();
  s.false_accept = j.at("false_accept").get<std::size_t>();
  s.false_reject = j.at("false_reject").get<std::size_t>();
  s.parse_failures = j.at("parse_failures").get<std::size_t>();
  s.tolerant_fallbacks = j.value("tolerant_fallbacks", std::size_t{0});
  s.degraded = j.value("degraded", std::size_t{0});
  return s;
}

}  // namespace

double weighted_accuracy(const std::map<int, double>& per_subset_acc,
                         const std::map<int, std::size_t>& counts) {
  if (per_subset_acc.size() != counts.size()) {
    throw EvalError("accuracy and count maps cover different subsets");
  }
  double weighted_sum = 0.0;
  std::size_t total = 0;
  for (const auto& [type_id, acc] : per_subset_acc) {
    const auto it = counts.find(type_id);
    if (it == counts.end()) {
      throw EvalError("no count for subset " + std::to_string(type_id));
    }
    weighted_sum += acc * static_cast<double>(it->second);
    total += it->second;
  }
  if (total == 0) {
    throw EvalError("weighted accuracy over a zero total");
  }
  return weighted_sum / static_cast<double>(total);
}

EvalReport run_eval(const std::vector<corpus::Sample>& samples, const EvalOptions& options,
                    std::shared_ptr<backend::Backend> backend, decision_log::Writer* log) {
  if (samples.empty()) {
    throw EvalError("empty corpus");
  }
  if (!backend) {
    throw EvalError("eval needs a backend");
  }
  if (options.pipeline.failure_policy == pipeline::FailurePolicy::Propagate) {
    throw EvalError("eval needs failure_policy reject or accept");
  }
  options.pipeline.validate();

  const auto tmpl = std::make_shared<const prompting::PromptTemplate>(
      prompting::PromptTemplate::builtin(options.pipeline.locale));
  const auto rules = std::make_shared<const prompting::RuleSet>(
      prompting::render_rules(corpus::taxonomy(), options.pipeline.locale));

  const nlohmann::json config_json{
      {"backend", backend->describe()},
      {"model", options.model_name},
      {"mode", prompting::to_string(options.pipeline.mode)},
      {"k", options.pipeline.k},
      {"window_max_age_s", options.pipeline.window.max_age_s},
      {"window_max_turns", options.pipeline.window.max_turns},
      {"strict_parse", options.pipeline.strict_parse},
      {"failure_policy", pipeline::to_string(options.pipeline.failure_policy)},
      {"locale", prompting::to_string(options.pipeline.locale)},
      {"sequential", options.sequential},
      {"now", options.now}};
  const std::string fingerprint = text::fnv1a64_hex(config_json.dump(), 0xc0f19);

  std::uint64_t corpus_hash = 0;
  for (const auto& sample : samples) {
    corpus_hash ^= text::fnv1a64(sample.id + "\x1f" + sample.text, 0xc0405);
  }
  const std::string run_id = options.run_id.value_or(
      "run-" + text::fnv1a64_hex(fingerprint + std::to_string(corpus_hash), 0x4d));

  struct PerSample {
    Outcome outcome;
    pipeline::Decision decision;
    std::string household;
    bool hard_error = false;
    std::string error;
  };
  std::vector<PerSample> results(samples.size());

  const auto seed_history = [&](memory::DialogueMemory& mem, const std::string& household,
                                const corpus::Sample& sample) {
    const std::int64_t n = static_cast<std::int64_t>(sample.history.size());
    for (std::int64_t i = 0; i < n; ++i) {
      corpus::DialogueTurn turn = sample.history[static_cast<std::size_t>(i)];
      if (!turn.timestamp) {
        turn.timestamp = options.now - (n - i);
      }
      mem.append_turn(household, std::move(turn));
    }
  };

  const auto evaluate_one = [&](std::size_t i, pipeline::Pipeline& pl,
                                const std::string& household, bool seeded) {
    const corpus::Sample& sample = samples[i];
    PerSample& r = results[i];
    r.household = household;
    if (!seeded) {
      seed_history(pl.memory(), household, sample);
    }
    r.decision = pl.decide(household, sample.text, options.now);
    r.outcome.type_id = sample.type_id;
    r.outcome.gold = sample.label;
    r.outcome.verdict = r.decision.verdict;
    r.outcome.reason = r.decision.reason;
    r.outcome.degraded = r.decision.degraded;
    r.outcome.latency_ms = r.decision.backend_latency_ms;
  };

  if (options.sequential) {
    // One household stream, closed loop: memory accumulates across samples.
    auto mem = std::make_shared<memory::DialogueMemory>();
    auto kbase = std::make_shared<kb::KnowledgeBase>(std::make_shared<kb::HashedNgramEmbedder>());
    pipeline::Pipeline pl(options.pipeline, backend, mem, kbase, tmpl, rules);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::string household = samples[i].household_id.value_or("stream");
      try {
        evaluate_one(i, pl, household, /*seeded=*/true);
      } catch (const std::exception& e) {
        results[i].hard_error = true;
        results[i].error = e.what();
      }
    }
  } else {
    const auto run_one = [&](std::size_t i) {
      try {
        auto mem = std::make_shared<memory::DialogueMemory>();
        auto kbase =
            std::make_shared<kb::KnowledgeBase>(std::make_shared<kb::HashedNgramEmbedder>());
        pipeline::Pipeline pl(options.pipeline, backend, mem, kbase, tmpl, rules);
        evaluate_one(i, pl, "eval:" + samples[i].id, /*seeded=*/false);
      } catch (const std::exception& e) {
        results[i].hard_error = true;
        results[i].error = e.what();
      }
    };
    if (options.max_in_flight > 1) {
      kernels::for_each_index_parallel(samples.size(), options.max_in_flight, run_one);
    } else {
      kernels::for_each_index_serial(samples.size(), run_one);
    }
  }

  std::size_t backend_failures = 0;
  for (const auto& r : results) {
    if (r.hard_error || r.outcome.reason == "backend_error") {
      ++backend_failures;
    }
  }
  if (backend_failures == results.size()) {
    throw EvalError("backend unreachable for every sample; partial results are unusable");
  }
  for (const auto& r : results) {
    if (r.hard_error) {
      throw EvalError("evaluation failed for a sample: " + r.error);
    }
  }

  std::vector<Outcome> outcomes;
  outcomes.reserve(results.size());
  for (const auto& r : results) {
    outcomes.push_back(r.outcome);
  }
  EvalReport report = assemble(outcomes, run_id, fingerprint, options.model_name,
                               prompting::to_string(options.pipeline.mode));

  if (log != nullptr) {
    nlohmann::json meta = config_json;
    meta["run_id"] = report.run_id;
    meta["config_fingerprint"] = report.config_fingerprint;
    meta["total"] = report.total;
    log->write_meta(meta);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      decision_log::Entry entry = decision_log::make_entry(
          samples[i].id, results[i].household, samples[i].text, options.now, results[i].decision);
      entry.type_id = samples[i].type_id;
      entry.gold = samples[i].label;
      log->append(entry);
    }
  }
  return report;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: {
      nlohmann::json j{{"run_id", report.run_id},
                       {"config_fingerprint", report.config_fingerprint},
                       {"model_name", report.model_name},
                       {"mode", report.mode},
                       {"weighted_accuracy", report.weighted_accuracy},
                       {"total", report.total},
                       {"latency", {{"p50_ms", report.latency.p50_ms},
                                    {"p95_ms", report.latency.p95_ms}}}};
      nlohmann::json subsets = nlohmann::json::array();
      for (const auto& s : report.per_subset) {
        subsets.push_back(subset_to_json(s));
      }
      j["per_subset"] = std::move(subsets);
      return j.dump(2) + "\n";
    }
    case ReportFormat::Csv: {
      std::string out = "type_id,n,correct,accuracy,false_accept,false_reject,parse_failures\n";
      for (const auto& s : report.per_subset) {
        out += std::to_string(s.type_id) + "," + std::to_string(s.n) + "," +
               std::to_string(s.correct) + "," + format_accuracy(s.accuracy) + "," +
               std::to_string(s.false_accept) + "," + std::to_string(s.false_reject) + "," +
               std::to_string(s.parse_failures) + "\n";
      }
      return out;
    }
    case ReportFormat::Markdown:
      return render_markdown_comparison({report});
  }
  throw EvalError("unknown report format");
}

EvalReport report_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw EvalError("report is not a JSON object");
  }
  EvalReport report;
  try {
    report.run_id = j.at("run_id").get<std::string>();
    report.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    report.model_name = j.at("model_name").get<std::string>();
    report.mode = j.at("mode").get<std::string>();
    report.weighted_accuracy = j.at("weighted_accuracy").get<double>();
    report.total = j.at("total").get<std::size_t>();
    report.latency.p50_ms = j.at("latency").at("p50_ms").get<double>();
    report.latency.p95_ms = j.at("latency").at("p95_ms").get<double>();
    for (const auto& s : j.at("per_subset")) {
      report.per_subset.push_back(subset_from_json(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string{"malformed report JSON: "} + e.what());
  }
  return report;
}

std::string render_markdown_comparison(const std::vector<EvalReport>& reports) {
  if (reports.empty()) {
    throw EvalError("no reports to render");
  }
  std::map<int, std::vector<const SubsetResult*>> rows;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    for (const auto& s : reports[r].per_subset) {
      auto& row = rows[s.type_id];
      row.resize(reports.size(), nullptr);
      row[r] = &s;
    }
  }
  for (auto& [type_id, row] : rows) {
    row.resize(reports.size(), nullptr);
  }

  std::string out = "| Subset | n |";
  for (const auto& report : reports) {
    out += " " + report.model_name + " |";
  }
  out += "\n|---:|---:|";
  for (std::size_t r = 0; r < reports.size(); ++r) {
    out += "---:|";
  }
  out += "\n";
  for (const auto& [type_id, row] : rows) {
    std::size_t n = 0;
    for (const auto* cell : row) {
      if (cell != nullptr) {
        n = cell->n;
        break;
      }
    }
    out += "| " + std::to_string(type_id) + " | " + std::to_string(n) + " |";
    for (const auto* cell : row) {
      out += cell != nullptr ? " " + format_accuracy(cell->accuracy) + " |" : " - |";
    }
    out += "\n";
  }
  out += "| **Weighted** | " + std::to_string(reports.front().total) + " |";
  for (const auto& report : reports) {
    out += " **" + format_accuracy(report.weighted_accuracy) + "** |";
  }
  out += "\n";
  return out;
}

ReportDelta compare_reports(const EvalReport& a, const EvalReport& b) {
  std::map<int, double> acc_a;
  std::map<int, double> acc_b;
  for (const auto& s : a.per_subset) {
    acc_a[s.type_id] = s.accuracy;
  }
  for (const auto& s : b.per_subset) {
    acc_b[s.type_id] = s.accuracy;
  }
  if (acc_a.size() != acc_b.size()) {
    throw EvalError("reports cover different subsets");
  }
  ReportDelta delta;
  for (const auto& [type_id, acc] : acc_a) {
    const auto it = acc_b.find(type_id);
    if (it == acc_b.end()) {
      throw EvalError("reports cover different subsets");
    }
    delta.per_subset[type_id] = it->second - acc;
  }
  delta.weighted = b.weighted_accuracy - a.weighted_accuracy;
  return delta;
}

EvalReport replay_log(const decision_log::LogFile& log) {
  std::vector<Outcome> outcomes;
  for (const auto& entry : log.entries) {
    if (!entry.type_id || !entry.gold) {
      continue;
    }
    Outcome o;
    o.type_id = *entry.type_id;
    o.gold = *entry.gold;
    o.verdict = entry.verdict;
    o.reason = entry.reason;
    o.degraded = entry.degraded;
    o.latency_ms = entry.backend_latency_ms;
    outcomes.push_back(std::move(o));
  }
  if (outcomes.empty()) {
    throw EvalError("decision log has no scorable lines (type_id + gold label)");
  }
  return assemble(outcomes, log.meta.value("run_id", std::string{"replay"}),
                  log.meta.value("config_fingerprint", std::string{}),
                  log.meta.value("model", std::string{"replay"}),
                  log.meta.value("mode", std::string{}));
}

}  // namespace homegate::evalbench
