#include "homegate/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "homegate/text.hpp"

namespace homegate::config {
namespace {

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_basic_string(std::string_view s, std::size_t line_no) {
  // s includes the surrounding quotes.
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const char c = s[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    ++i;
    if (i + 1 > s.size() - 1) {
      throw ConfigError("line " + std::to_string(line_no) + ": dangling escape in string");
    }
    switch (s[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      default:
        throw ConfigError("line " + std::to_string(line_no) + ": unsupported escape \\" +
                          std::string(1, s[i]));
    }
  }
  return out;
}

TomlValue parse_scalar(std::string_view raw, std::size_t line_no) {
  const std::string_view v = homegate::text::trim(raw);
  if (v.empty()) {
    throw ConfigError("line " + std::to_string(line_no) + ": missing value");
  }
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    }
    return parse_basic_string(v, line_no);
  }
  if (v == "true") {
    return true;
  }
  if (v == "false") {
    return false;
  }
  const std::string scalar{v};
  std::int64_t i = 0;
  const auto [ptr, ec] = std::from_chars(scalar.data(), scalar.data() + scalar.size(), i);
  if (ec == std::errc() && ptr == scalar.data() + scalar.size()) {
    return i;
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(scalar, &used);
    if (used == scalar.size()) {
      return d;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("line " + std::to_string(line_no) + ": unrecognized value \"" + scalar + "\"");
}

// Strips a trailing comment that is not inside a string literal.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::optional<TomlValue> find(const TomlTable& t, const std::string& key) {
  const auto it = t.find(key);
  if (it == t.end()) {
    return std::nullopt;
  }
  return it->second;
}

void set_string_if(const TomlTable& t, const std::string& key, std::string& out) {
  if (const auto v = toml_string(t, key)) {
    out = *v;
  }
}

void set_int_if(const TomlTable& t, const std::string& key, int& out) {
  if (const auto v = toml_int(t, key)) {
    out = static_cast<int>(*v);
  }
}

}  // namespace

TomlTable parse_toml(std::string_view content) {
  TomlTable table;
  std::string prefix;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    const std::size_t nl = content.find('\n', start);
    std::string_view line =
        nl == std::string_view::npos ? content.substr(start) : content.substr(start, nl - start);
    ++line_no;
    line = homegate::text::trim(strip_comment(line));
    if (!line.empty()) {
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          throw ConfigError("line " + std::to_string(line_no) + ": malformed table header");
        }
        prefix = std::string{homegate::text::trim(line.substr(1, line.size() - 2))};
        if (prefix.empty()) {
          throw ConfigError("line " + std::to_string(line_no) + ": empty table name");
        }
      } else {
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
          throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string_view key_part = homegate::text::trim(line.substr(0, eq));
        if (key_part.empty()) {
          throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        }
        for (char c : key_part) {
          if (!is_bare_key_char(c) && c != '.') {
            throw ConfigError("line " + std::to_string(line_no) + ": unsupported key \"" +
                              std::string{key_part} + "\"");
          }
        }
        const std::string full_key =
            prefix.empty() ? std::string{key_part} : prefix + "." + std::string{key_part};
        table[full_key] = parse_scalar(line.substr(eq + 1), line_no);
      }
    }
    if (nl == std::string_view::npos) {
      break;
    }
    start = nl + 1;
  }
  return table;
}

std::optional<std::string> toml_string(const TomlTable& t, const std::string& key) {
  const auto v = find(t, key);
  if (!v) {
    return std::nullopt;
  }
  if (const auto* s = std::get_if<std::string>(&*v)) {
    return *s;
  }
  throw ConfigError("config key " + key + " must be a string");
}

std::optional<std::int64_t> toml_int(const TomlTable& t, const std::string& key) {
  const auto v = find(t, key);
  if (!v) {
    return std::nullopt;
  }
  if (const auto* i = std::get_if<std::int64_t>(&*v)) {
    return *i;
  }
  throw ConfigError("config key " + key + " must be an integer");
}

std::optional<double> toml_double(const TomlTable& t, const std::string& key) {
  const auto v = find(t, key);
  if (!v) {
    return std::nullopt;
  }
  if (const auto* d = std::get_if<double>(&*v)) {
    return *d;
  }
  if (const auto* i = std::get_if<std::int64_t>(&*v)) {
    return static_cast<double>(*i);
  }
  throw ConfigError("config key " + key + " must be a number");
}

std::optional<bool> toml_bool(const TomlTable& t, const std::string& key) {
  const auto v = find(t, key);
  if (!v) {
    return std::nullopt;
  }
  if (const auto* b = std::get_if<bool>(&*v)) {
    return *b;
  }
  throw ConfigError("config key " + key + " must be a boolean");
}

backend::MockRules parse_mock_rules(std::string_view dsl) {
  backend::MockRules rules;
  bool saw_default = false;
  std::size_t start = 0;
  while (start <= dsl.size()) {
    const std::size_t sep = dsl.find(';', start);
    const std::string_view item = homegate::text::trim(
        sep == std::string_view::npos ? dsl.substr(start) : dsl.substr(start, sep - start));
    if (!item.empty()) {
      const std::size_t arrow = item.find("=>");
      if (arrow == std::string_view::npos) {
        throw ConfigError("mock rule \"" + std::string{item} + "\" needs pattern=>verdict");
      }
      const std::string pattern{homegate::text::trim(item.substr(0, arrow))};
      const std::string verdict_text =
          homegate::text::lower_ascii(homegate::text::trim(item.substr(arrow + 2)));
      corpus::Label verdict;
      if (verdict_text == "yes" || verdict_text == "accept") {
        verdict = corpus::Label::Accept;
      } else if (verdict_text == "no" || verdict_text == "reject") {
        verdict = corpus::Label::Reject;
      } else {
        throw ConfigError("mock rule verdict must be yes/no, got \"" + verdict_text + "\"");
      }
      if (pattern == "default") {
        rules.default_verdict = verdict;
        saw_default = true;
      } else if (pattern.empty()) {
        throw ConfigError("mock rule with an empty pattern");
      } else {
        rules.rules.push_back({pattern, verdict});
      }
    }
    if (sep == std::string_view::npos) {
      break;
    }
    start = sep + 1;
  }
  if (!saw_default) {
    throw ConfigError("mock rules need a final default=>yes|no entry");
  }
  return rules;
}

void ServiceConfig::validate() const {
  // Port 0 asks the OS for an ephemeral port.
  if (listen_port < 0 || listen_port > 65535) {
    throw ConfigError("listen_port out of range");
  }
  if (data_dir.empty()) {
    throw ConfigError("data_dir is required");
  }
  if (backend_kind != "http" && backend_kind != "mock") {
    throw ConfigError("backend kind must be http or mock, got \"" + backend_kind + "\"");
  }
  if (backend_kind == "http") {
    backend.validate();
  }
  pipeline.validate();
  if (template_path) {
    prompting::PromptTemplate::load_file(*template_path);  // placeholder check
  }
  std::error_code ec;
  std::filesystem::create_directories(data_dir, ec);
  if (ec) {
    throw ConfigError("data_dir " + data_dir + " is not writable: " + ec.message());
  }
  const auto probe_path = std::filesystem::path(data_dir) / ".write_probe";
  std::ofstream probe(probe_path);
  if (!probe) {
    throw ConfigError("data_dir " + data_dir + " is not writable");
  }
  probe.close();
  std::filesystem::remove(probe_path, ec);
}

ServiceConfig service_config_from_toml(const TomlTable& t) {
  ServiceConfig cfg;
  set_string_if(t, "service.listen_host", cfg.listen_host);
  set_int_if(t, "service.listen_port", cfg.listen_port);
  set_string_if(t, "service.data_dir", cfg.data_dir);
  if (const auto v = toml_string(t, "service.template_path")) {
    cfg.template_path = *v;
  }
  if (const auto v = toml_string(t, "service.locale")) {
    const auto locale = prompting::locale_from_string(*v);
    if (!locale) {
      throw ConfigError("service.locale must be zh or en");
    }
    cfg.pipeline.locale = *locale;
  }
  set_string_if(t, "service.auth_token_env", cfg.auth_token_env);

  set_string_if(t, "backend.kind", cfg.backend_kind);
  set_string_if(t, "backend.base_url", cfg.backend.base_url);
  set_string_if(t, "backend.model", cfg.backend.model_name);
  set_int_if(t, "backend.timeout_ms", cfg.backend.timeout_ms);
  set_int_if(t, "backend.max_retries", cfg.backend.max_retries);
  set_int_if(t, "backend.retry_base_delay_ms", cfg.backend.retry_base_delay_ms);
  set_int_if(t, "backend.max_in_flight", cfg.backend.max_in_flight);
  if (const auto v = toml_double(t, "backend.temperature")) {
    cfg.backend.temperature = *v;
  }
  if (const auto v = toml_int(t, "backend.seed")) {
    cfg.backend.seed = *v;
  }
  set_string_if(t, "backend.api_key_env", cfg.backend.api_key_env);
  if (const auto v = toml_string(t, "backend.mock_rules")) {
    cfg.mock.rules = parse_mock_rules(*v);
  }

  if (const auto v = toml_string(t, "pipeline.mode")) {
    const auto mode = prompting::prompt_mode_from_string(*v);
    if (!mode) {
      throw ConfigError("pipeline.mode must be generic, with_history, or with_history_and_cases");
    }
    cfg.pipeline.mode = *mode;
  }
  if (const auto v = toml_int(t, "pipeline.k")) {
    cfg.pipeline.k = static_cast<std::size_t>(*v);
  }
  if (const auto v = toml_int(t, "pipeline.window_max_age_s")) {
    cfg.pipeline.window.max_age_s = *v;
  }
  if (const auto v = toml_int(t, "pipeline.window_max_turns")) {
    cfg.pipeline.window.max_turns = static_cast<std::size_t>(*v);
  }
  if (const auto v = toml_bool(t, "pipeline.strict_parse")) {
    cfg.pipeline.strict_parse = *v;
  }
  if (const auto v = toml_bool(t, "pipeline.include_assistant_turns")) {
    cfg.pipeline.include_assistant_turns = *v;
  }
  if (const auto v = toml_string(t, "pipeline.failure_policy")) {
    const auto policy = pipeline::failure_policy_from_string(*v);
    if (!policy) {
      throw ConfigError("pipeline.failure_policy must be reject, accept, or off");
    }
    cfg.pipeline.failure_policy = *policy;
  }
  return cfg;
}

void apply_env_overrides(ServiceConfig& cfg) {
  const auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == 0) {
      return std::nullopt;
    }
    return std::string{v};
  };
  if (const auto v = env("HOMEGATE_LISTEN_HOST")) {
    cfg.listen_host = *v;
  }
  if (const auto v = env("HOMEGATE_LISTEN_PORT")) {
    cfg.listen_port = std::atoi(v->c_str());
  }
  if (const auto v = env("HOMEGATE_DATA_DIR")) {
    cfg.data_dir = *v;
  }
  if (const auto v = env("HOMEGATE_BACKEND_URL")) {
    cfg.backend.base_url = *v;
  }
  if (const auto v = env("HOMEGATE_MODEL")) {
    cfg.backend.model_name = *v;
  }
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  ServiceConfig cfg = service_config_from_toml(parse_toml(buf.str()));
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

std::shared_ptr<backend::Backend> make_backend(const ServiceConfig& cfg) {
  if (cfg.backend_kind == "mock") {
    return std::make_shared<backend::MockBackend>(cfg.mock.rules);
  }
  return std::make_shared<backend::HttpBackend>(cfg.backend);
}

EvalManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read manifest file: " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest is not valid JSON: " + std::string{e.what()});
  }
  if (!j.is_object()) {
    throw ConfigError("manifest must be a JSON object");
  }

  EvalManifest m;
  if (!j.contains("corpus") || !j["corpus"].is_string()) {
    throw ConfigError("manifest needs a corpus path");
  }
  m.corpus_path = j["corpus"].get<std::string>();

  if (j.contains("mode")) {
    const auto mode = prompting::prompt_mode_from_string(j["mode"].get<std::string>());
    if (!mode) {
      throw ConfigError("manifest mode must be generic, with_history, or with_history_and_cases");
    }
    m.options.pipeline.mode = *mode;
  }
  if (j.contains("k")) {
    m.options.pipeline.k = j["k"].get<std::size_t>();
  }
  if (j.contains("window")) {
    const auto& w = j["window"];
    if (w.contains("max_age_s")) {
      m.options.pipeline.window.max_age_s = w["max_age_s"].get<std::int64_t>();
    }
    if (w.contains("max_turns")) {
      m.options.pipeline.window.max_turns = w["max_turns"].get<std::size_t>();
    }
  }
  if (j.contains("strict_parse")) {
    m.options.pipeline.strict_parse = j["strict_parse"].get<bool>();
  }
  if (j.contains("failure_policy")) {
    const auto policy = pipeline::failure_policy_from_string(j["failure_policy"].get<std::string>());
    if (!policy) {
      throw ConfigError("manifest failure_policy must be reject, accept, or off");
    }
    m.options.pipeline.failure_policy = *policy;
  }
  if (j.contains("locale")) {
    const auto locale = prompting::locale_from_string(j["locale"].get<std::string>());
    if (!locale) {
      throw ConfigError("manifest locale must be zh or en");
    }
    m.options.pipeline.locale = *locale;
  }
  if (j.contains("sequential")) {
    m.options.sequential = j["sequential"].get<bool>();
  }
  if (j.contains("now")) {
    m.options.now = j["now"].get<std::int64_t>();
  }
  if (j.contains("max_in_flight")) {
    m.options.max_in_flight = j["max_in_flight"].get<int>();
  }
  if (j.contains("run_id")) {
    m.options.run_id = j["run_id"].get<std::string>();
  }
  if (j.contains("model_label")) {
    m.options.model_name = j["model_label"].get<std::string>();
  }

  if (!j.contains("backend") || !j["backend"].is_object()) {
    throw ConfigError("manifest needs a backend object");
  }
  const auto& b = j["backend"];
  m.backend_kind = b.value("kind", "mock");
  if (m.backend_kind == "mock") {
    backend::MockRules rules;
    bool saw_default = false;
    if (b.contains("rules")) {
      for (const auto& r : b["rules"]) {
        const std::string pattern = r.value("contains", "");
        const auto verdict = corpus::label_from_string(r.value("verdict", ""));
        if (pattern.empty() || !verdict) {
          throw ConfigError("mock backend rules need contains + verdict (accept|reject)");
        }
        rules.rules.push_back({pattern, *verdict});
      }
    }
    if (b.contains("default")) {
      const auto verdict = corpus::label_from_string(b["default"].get<std::string>());
      if (!verdict) {
        throw ConfigError("mock backend default must be accept or reject");
      }
      rules.default_verdict = *verdict;
      saw_default = true;
    }
    if (!saw_default) {
      throw ConfigError("mock backend needs a default verdict");
    }
    m.mock.rules = std::move(rules);
    if (m.options.model_name == "backend") {
      m.options.model_name = "mock";
    }
  } else if (m.backend_kind == "http") {
    if (!b.contains("base_url")) {
      throw ConfigError("http backend needs base_url");
    }
    m.backend.base_url = b["base_url"].get<std::string>();
    m.backend.model_name = b.value("model", m.backend.model_name);
    m.backend.timeout_ms = b.value("timeout_ms", m.backend.timeout_ms);
    m.backend.max_retries = b.value("max_retries", m.backend.max_retries);
    m.backend.retry_base_delay_ms = b.value("retry_base_delay_ms", m.backend.retry_base_delay_ms);
    m.backend.max_in_flight = b.value("max_in_flight", m.backend.max_in_flight);
    m.backend.temperature = b.value("temperature", m.backend.temperature);
    if (b.contains("seed")) {
      m.backend.seed = b["seed"].get<std::int64_t>();
    }
    m.backend.validate();
    if (m.options.model_name == "backend") {
      m.options.model_name = m.backend.model_name;
    }
  } else {
    throw ConfigError("backend kind must be mock or http");
  }

  if (j.contains("output") && j["output"].is_object()) {
    for (const auto& [key, value] : j["output"].items()) {
      if (key != "json" && key != "csv" && key != "markdown" && key != "decision_log") {
        throw ConfigError("unknown output format \"" + key + "\"");
      }
      m.outputs[key] = value.get<std::string>();
    }
  }
  return m;
}

std::shared_ptr<backend::Backend> make_backend(const EvalManifest& manifest) {
  if (manifest.backend_kind == "mock") {
    return std::make_shared<backend::MockBackend>(manifest.mock.rules);
  }
  return std::make_shared<backend::HttpBackend>(manifest.backend);
}

}  // namespace homegate::config
