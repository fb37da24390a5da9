#include "homegate/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace homegate::backend {
namespace {

struct ParsedUrl {
  std::string host_part;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
  const std::size_t scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(BackendErrorKind::Config, "base_url must include a scheme: " + base_url);
  }
  const std::size_t path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  return {base_url.substr(0, path_start), prefix};
}

double jitter_factor() {
  thread_local std::mt19937 rng{std::random_device{}()};
  return std::uniform_real_distribution<double>(0.5, 1.0)(rng);
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

std::string to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::Config:
      return "config";
    case BackendErrorKind::Transport:
      return "transport";
    case BackendErrorKind::Timeout:
      return "timeout";
    case BackendErrorKind::Auth:
      return "auth";
    case BackendErrorKind::HttpStatus:
      return "http_status";
    case BackendErrorKind::MalformedResponse:
      return "malformed_response";
  }
  return "unknown";
}

void BackendConfig::validate() const {
  if (base_url.empty()) {
    throw BackendError(BackendErrorKind::Config, "base_url is required");
  }
  if (timeout_ms <= 0) {
    throw BackendError(BackendErrorKind::Config, "timeout must be positive");
  }
  if (max_retries < 0 || max_retries > 5) {
    throw BackendError(BackendErrorKind::Config, "max_retries must be in [0,5]");
  }
  if (retry_base_delay_ms < 0) {
    throw BackendError(BackendErrorKind::Config, "retry_base_delay must be non-negative");
  }
  if (temperature < 0.0) {
    throw BackendError(BackendErrorKind::Config, "temperature must be non-negative");
  }
  if (max_in_flight < 1 || max_in_flight > 1024) {
    throw BackendError(BackendErrorKind::Config, "max_in_flight must be in [1,1024]");
  }
  parse_base_url(base_url);
}

HttpBackend::HttpBackend(BackendConfig config)
    : config_(std::move(config)), slots_(std::max(1, std::min(config_.max_in_flight, 1024))) {
  config_.validate();
  const ParsedUrl url = parse_base_url(config_.base_url);
  host_part_ = url.host_part;
  path_prefix_ = url.path_prefix;
}

BackendResponse HttpBackend::classify(const prompting::PromptText& prompt) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  nlohmann::json body{{"model", config_.model_name},
                      {"messages", nlohmann::json::array({nlohmann::json{
                                       {"role", "user"}, {"content", prompt.text}}})},
                      {"temperature", config_.temperature}};
  if (config_.seed) {
    body["seed"] = *config_.seed;
  }
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != 0) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_error;
  BackendErrorKind last_kind = BackendErrorKind::Transport;
  int last_status = 0;

  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay =
          static_cast<double>(config_.retry_base_delay_ms) * (1 << (attempt - 1)) * jitter_factor();
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }

    httplib::Client client(host_part_);
    client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));

    const auto started = std::chrono::steady_clock::now();
    httplib::Result result =
        client.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();

    if (!result) {
      last_kind = result.error() == httplib::Error::ConnectionTimeout ||
                          result.error() == httplib::Error::Read
                      ? BackendErrorKind::Timeout
                      : BackendErrorKind::Transport;
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }

    const int status = result->status;
    if (status == 401 || status == 403) {
      throw BackendError(BackendErrorKind::Auth, "authentication rejected (HTTP " +
                                                     std::to_string(status) + ")",
                         status, attempt + 1);
    }
    if (retryable_status(status)) {
      last_kind = BackendErrorKind::HttpStatus;
      last_status = status;
      last_error = "endpoint returned HTTP " + std::to_string(status);
      continue;
    }
    if (status != 200) {
      throw BackendError(BackendErrorKind::HttpStatus,
                         "endpoint returned HTTP " + std::to_string(status), status, attempt + 1);
    }

    const nlohmann::json reply = nlohmann::json::parse(result->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
        reply["choices"].empty() || !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content") ||
        !reply["choices"][0]["message"]["content"].is_string()) {
      throw BackendError(BackendErrorKind::MalformedResponse,
                         "endpoint response is missing choices[0].message.content", status,
                         attempt + 1);
    }

    BackendResponse out;
    out.raw_text = reply["choices"][0]["message"]["content"].get<std::string>();
    out.latency_ms = elapsed_ms;
    out.attempts = attempt + 1;
    return out;
  }

  throw BackendError(last_kind, last_error + " after " +
                                    std::to_string(config_.max_retries + 1) + " attempts",
                     last_status, config_.max_retries + 1);
}

bool HttpBackend::probe() {
  httplib::Client client(host_part_);
  client.set_connection_timeout(std::chrono::milliseconds(std::min(config_.timeout_ms, 2000)));
  client.set_read_timeout(std::chrono::milliseconds(std::min(config_.timeout_ms, 2000)));
  const httplib::Result result = client.Get(path_prefix_.empty() ? "/" : path_prefix_);
  return static_cast<bool>(result);  // any HTTP response means reachable
}

std::string HttpBackend::describe() const {
  return "http:" + config_.base_url + ":" + config_.model_name;
}

BackendResponse mock_classify(const MockRules& rules, const prompting::PromptText& prompt) {
  corpus::Label verdict = rules.default_verdict;
  for (const auto& rule : rules.rules) {
    if (!rule.contains.empty() && prompt.query.find(rule.contains) != std::string::npos) {
      verdict = rule.verdict;
      break;
    }
  }
  BackendResponse out;
  out.raw_text = prompting::render_verdict(verdict);
  out.latency_ms = 0.0;
  out.attempts = 1;
  return out;
}

std::string MockBackend::describe() const {
  std::string out = "mock:";
  for (const auto& rule : rules_.rules) {
    out += rule.contains + "=>" + corpus::to_string(rule.verdict) + ";";
  }
  out += "default=>" + corpus::to_string(rules_.default_verdict);
  return out;
}

}  // namespace homegate::backend
