#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "homegate/backend.hpp"
#include "homegate/corpus.hpp"
#include "homegate/decision_log.hpp"
#include "homegate/pipeline.hpp"

namespace homegate::evalbench {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SubsetResult {
  int type_id = 0;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::size_t false_accept = 0;
  std::size_t false_reject = 0;
  std::size_t parse_failures = 0;      // unparseable verdicts; scored as incorrect
  std::size_t tolerant_fallbacks = 0;  // strict parse failed, tolerant succeeded
  std::size_t degraded = 0;            // failure-policy verdicts
};

struct LatencyStats {
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

struct EvalReport {
  std::string run_id;
  std::string config_fingerprint;
  std::string model_name;
  std::string mode;
  std::vector<SubsetResult> per_subset;  // ordered by type_id
  double weighted_accuracy = 0.0;
  LatencyStats latency;
  std::size_t total = 0;
};

struct EvalOptions {
  pipeline::PipelineConfig pipeline;
  std::string model_name = "backend";
  bool sequential = false;    // replay the corpus as one household stream
  std::int64_t now = 1700000000;  // fixed reference clock; keeps runs reproducible
  int max_in_flight = 4;
  std::optional<std::string> run_id;  // derived from config+corpus when absent
};

// Σ nᵢ·accᵢ / Σ nᵢ. Throws on mismatched key sets or a zero total.
double weighted_accuracy(const std::map<int, double>& per_subset_acc,
                         const std::map<int, std::size_t>& counts);

// Evaluates every sample through pipeline::decide against the given
// backend. Per-sample isolation: each sample gets its own seeded household
// memory, so corpus order never affects the report. Aborts when the
// backend is wholly unreachable.
EvalReport run_eval(const std::vector<corpus::Sample>& corpus, const EvalOptions& options,
                    std::shared_ptr<backend::Backend> backend,
                    decision_log::Writer* log = nullptr);

enum class ReportFormat { Json, Csv, Markdown };

std::string render_report(const EvalReport& report, ReportFormat format);
EvalReport report_from_json(const std::string& json_text);  // inverse of the Json render

// Subset rows x model columns, the layout used for cross-model comparison.
std::string render_markdown_comparison(const std::vector<EvalReport>& reports);

struct ReportDelta {
  std::map<int, double> per_subset;  // b - a
  double weighted = 0.0;
};

ReportDelta compare_reports(const EvalReport& a, const EvalReport& b);

// Re-scores a recorded decision log (lines carrying type_id + gold label).
EvalReport replay_log(const decision_log::LogFile& log);

}  // namespace homegate::evalbench
