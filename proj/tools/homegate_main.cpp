#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "homegate/config.hpp"
#include "homegate/corpus.hpp"
#include "homegate/decision_log.hpp"
#include "homegate/evalbench.hpp"
#include "homegate/service.hpp"

namespace {

using namespace homegate;

void print_machine_error(const std::string& message) {
  std::cerr << nlohmann::json{{"error", message}}.dump() << "\n";
}

int cmd_stats(const std::string& corpus_path, const std::string& format) {
  const corpus::LoadResult loaded = corpus::load_corpus(corpus_path);
  const corpus::CorpusStats stats = corpus::corpus_stats(loaded.samples);
  if (format == "json") {
    nlohmann::json per_type = nlohmann::json::object();
    for (const auto& [type_id, count] : stats.per_type_count) {
      per_type[std::to_string(type_id)] = count;
    }
    std::cout << nlohmann::json{{"total", stats.total},
                                {"per_type", per_type},
                                {"errors", loaded.errors.size()}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "type_id  count\n";
    for (const auto& [type_id, count] : stats.per_type_count) {
      std::cout << type_id << "\t" << count << "\n";
    }
    std::cout << "total\t" << stats.total << "\n";
    if (!loaded.errors.empty()) {
      std::cout << "errors\t" << loaded.errors.size() << "\n";
    }
  }
  return loaded.errors.empty() ? 0 : 1;
}

int cmd_validate(const std::string& corpus_path, bool raw) {
  const corpus::LoadResult loaded =
      corpus::load_corpus(corpus_path, raw ? corpus::LoadMode::RawLog : corpus::LoadMode::Benchmark);
  for (const auto& e : loaded.errors) {
    std::cerr << nlohmann::json{{"line", e.line_no}, {"id", e.id}, {"error", e.message}}.dump()
              << "\n";
  }
  for (const auto& w : loaded.warnings) {
    std::cerr << nlohmann::json{{"line", w.line_no}, {"id", w.id}, {"warning", w.message}}.dump()
              << "\n";
  }
  std::cout << nlohmann::json{{"samples", loaded.samples.size()},
                              {"errors", loaded.errors.size()},
                              {"warnings", loaded.warnings.size()}}
                   .dump()
            << "\n";
  return loaded.errors.empty() ? 0 : 1;
}

int cmd_eval(const std::string& manifest_path) {
  const config::EvalManifest manifest = config::load_manifest(manifest_path);
  const corpus::LoadResult loaded = corpus::load_corpus(manifest.corpus_path);
  if (!loaded.errors.empty()) {
    print_machine_error("corpus has " + std::to_string(loaded.errors.size()) +
                        " invalid records; run validate for details");
    return 1;
  }

  std::unique_ptr<decision_log::Writer> log;
  if (const auto it = manifest.outputs.find("decision_log"); it != manifest.outputs.end()) {
    std::filesystem::remove(it->second);
    log = std::make_unique<decision_log::Writer>(it->second);
  }

  const evalbench::EvalReport report =
      evalbench::run_eval(loaded.samples, manifest.options, config::make_backend(manifest),
                          log.get());

  const auto write_output = [&](const std::string& key, evalbench::ReportFormat format) {
    const auto it = manifest.outputs.find(key);
    if (it == manifest.outputs.end()) {
      return;
    }
    std::ofstream out(it->second, std::ios::trunc | std::ios::binary);
    if (!out) {
      throw config::ConfigError("cannot write report to " + it->second);
    }
    out << evalbench::render_report(report, format);
  };
  write_output("json", evalbench::ReportFormat::Json);
  write_output("csv", evalbench::ReportFormat::Csv);
  write_output("markdown", evalbench::ReportFormat::Markdown);

  std::cout << evalbench::render_report(report, evalbench::ReportFormat::Markdown);
  return 0;
}

int cmd_replay(const std::string& log_path, const std::string& out_json) {
  const decision_log::LogFile log = decision_log::read_log(log_path);
  const evalbench::EvalReport report = evalbench::replay_log(log);
  const std::string rendered = evalbench::render_report(report, evalbench::ReportFormat::Json);
  if (!out_json.empty()) {
    std::ofstream out(out_json, std::ios::trunc | std::ios::binary);
    if (!out) {
      throw config::ConfigError("cannot write report to " + out_json);
    }
    out << rendered;
  }
  std::cout << rendered;
  return 0;
}

int cmd_kb(const std::string& data_dir, const std::string& household) {
  const auto kb_dir = (std::filesystem::path(data_dir) / "kb").string();
  kb::KnowledgeBase knowledge(std::make_shared<kb::HashedNgramEmbedder>(), kb_dir);
  const kb::KbStats stats = knowledge.stats(household);
  std::cout << nlohmann::json{{"household_id", household},
                              {"accept", stats.accept},
                              {"reject", stats.reject},
                              {"total", stats.total}}
                   .dump(2)
            << "\n";
  return 0;
}

struct ServeOverrides {
  std::string listen_host;
  int listen_port = -1;
  std::string data_dir;
  std::string backend_url;
  std::string model;
  std::string mode;
  std::string failure_policy;
};

int cmd_serve(const std::string& config_path, const ServeOverrides& overrides) {
  config::ServiceConfig cfg;
  if (!config_path.empty()) {
    cfg = config::load_service_config(config_path);
  } else {
    config::apply_env_overrides(cfg);
  }
  if (!overrides.listen_host.empty()) {
    cfg.listen_host = overrides.listen_host;
  }
  if (overrides.listen_port >= 0) {
    cfg.listen_port = overrides.listen_port;
  }
  if (!overrides.data_dir.empty()) {
    cfg.data_dir = overrides.data_dir;
  }
  if (!overrides.backend_url.empty()) {
    cfg.backend.base_url = overrides.backend_url;
  }
  if (!overrides.model.empty()) {
    cfg.backend.model_name = overrides.model;
  }
  if (!overrides.mode.empty()) {
    const auto mode = prompting::prompt_mode_from_string(overrides.mode);
    if (!mode) {
      throw config::ConfigError("--mode must be generic, with_history, or with_history_and_cases");
    }
    cfg.pipeline.mode = *mode;
  }
  if (!overrides.failure_policy.empty()) {
    const auto policy = pipeline::failure_policy_from_string(overrides.failure_policy);
    if (!policy) {
      throw config::ConfigError("--failure-policy must be reject, accept, or off");
    }
    cfg.pipeline.failure_policy = *policy;
  }
  cfg.validate();

  service::Service svc(std::move(cfg));
  std::cerr << "listening on " << svc.config().listen_host << ":" << svc.config().listen_port
            << "\n";
  svc.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"household-personalized query-rejection gateway"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "run the HTTP gateway");
  std::string config_path;
  ServeOverrides overrides;
  serve->add_option("--config", config_path, "TOML config file");
  serve->add_option("--listen-host", overrides.listen_host, "bind address");
  serve->add_option("--listen-port", overrides.listen_port, "bind port (0 = ephemeral)");
  serve->add_option("--data-dir", overrides.data_dir, "state directory");
  serve->add_option("--backend-url", overrides.backend_url, "chat-completions base url");
  serve->add_option("--model", overrides.model, "backend model name");
  serve->add_option("--mode", overrides.mode,
                    "generic | with_history | with_history_and_cases");
  serve->add_option("--failure-policy", overrides.failure_policy, "reject | accept | off");

  auto* eval = app.add_subcommand("eval", "run the benchmark harness from a manifest");
  std::string manifest_path;
  eval->add_option("--manifest", manifest_path, "JSON run manifest")->required();

  auto* stats = app.add_subcommand("stats", "print corpus statistics");
  std::string stats_corpus;
  std::string stats_format = "text";
  stats->add_option("--corpus", stats_corpus, "corpus file (JSONL)")->required();
  stats->add_option("--format", stats_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));

  auto* validate = app.add_subcommand("validate", "check a corpus file");
  std::string validate_corpus;
  bool validate_raw = false;
  validate->add_option("--corpus", validate_corpus, "corpus file (JSONL)")->required();
  validate->add_flag("--raw", validate_raw, "raw-log mode: label mismatches are warnings");

  auto* kb_cmd = app.add_subcommand("kb", "inspect a household knowledge base");
  std::string kb_data_dir;
  std::string kb_household;
  kb_cmd->add_option("--data-dir", kb_data_dir, "service data directory")->required();
  kb_cmd->add_option("--household", kb_household, "household id")->required();

  auto* replay = app.add_subcommand("replay", "re-score a recorded decision log");
  std::string replay_log_path;
  std::string replay_out;
  replay->add_option("--log", replay_log_path, "decision log (JSONL)")->required();
  replay->add_option("--out", replay_out, "write the report JSON here");

  try {
    app.parse(argc, argv);
    if (serve->parsed()) {
      return cmd_serve(config_path, overrides);
    }
    if (eval->parsed()) {
      return cmd_eval(manifest_path);
    }
    if (stats->parsed()) {
      return cmd_stats(stats_corpus, stats_format);
    }
    if (validate->parsed()) {
      return cmd_validate(validate_corpus, validate_raw);
    }
    if (kb_cmd->parsed()) {
      return cmd_kb(kb_data_dir, kb_household);
    }
    if (replay->parsed()) {
      return cmd_replay(replay_log_path, replay_out);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    print_machine_error(e.what());
    return 1;
  }
  return 0;
}
