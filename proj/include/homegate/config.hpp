#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "homegate/backend.hpp"
#include "homegate/evalbench.hpp"
#include "homegate/pipeline.hpp"

namespace homegate::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TomlValue = std::variant<std::string, std::int64_t, double, bool>;

// Flat view of a TOML document: "table.key" -> value. Supported subset:
// comments, [tables], basic strings with escapes, integers, floats, bools.
using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(std::string_view text);  // throws ConfigError with line numbers

std::optional<std::string> toml_string(const TomlTable& t, const std::string& key);
std::optional<std::int64_t> toml_int(const TomlTable& t, const std::string& key);
std::optional<double> toml_double(const TomlTable& t, const std::string& key);
std::optional<bool> toml_bool(const TomlTable& t, const std::string& key);

struct MockBackendConfig {
  backend::MockRules rules;
};

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string data_dir = "./data";
  // "http" reaches a chat-completions endpoint; "mock" runs the
  // deterministic rule-table double (demos, smoke runs).
  std::string backend_kind = "http";
  backend::BackendConfig backend;
  MockBackendConfig mock;
  pipeline::PipelineConfig pipeline;
  std::optional<std::string> template_path;  // builtin template when absent
  std::string auth_token_env = "HOMEGATE_TOKEN";

  void validate() const;  // throws ConfigError; fail fast at startup
};

// Reads a TOML config and applies HOMEGATE_* environment overrides.
ServiceConfig load_service_config(const std::string& path);
ServiceConfig service_config_from_toml(const TomlTable& table);
void apply_env_overrides(ServiceConfig& cfg);

// Mock rule DSL used by config and manifests: "pat=>yes;pat2=>no" with a
// mandatory trailing "default=>yes|no" entry.
backend::MockRules parse_mock_rules(std::string_view dsl);
std::shared_ptr<backend::Backend> make_backend(const ServiceConfig& cfg);

struct EvalManifest {
  std::string corpus_path;
  evalbench::EvalOptions options;
  std::string backend_kind = "mock";
  backend::BackendConfig backend;
  MockBackendConfig mock;
  std::map<std::string, std::string> outputs;  // format ("json","csv","markdown","decision_log") -> path
};

EvalManifest load_manifest(const std::string& path);  // JSON; throws ConfigError
std::shared_ptr<backend::Backend> make_backend(const EvalManifest& manifest);

}  // namespace homegate::config
