#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

#include "homegate/corpus.hpp"
#include "homegate/prompting.hpp"

namespace homegate::backend {

struct BackendConfig {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string model_name = "rejection-adapter";
  int timeout_ms = 10000;
  int max_retries = 2;  // retries after the first attempt, capped at 5
  int retry_base_delay_ms = 200;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;  // sent verbatim when set, for repeatability
  int max_in_flight = 4;
  std::string api_key_env = "HOMEGATE_API_KEY";  // value read from env, never logged

  void validate() const;  // throws BackendError{Config}
};

struct BackendResponse {
  std::string raw_text;
  double latency_ms = 0.0;  // duration of the attempt that produced the reply
  int attempts = 1;
};

enum class BackendErrorKind { Config, Transport, Timeout, Auth, HttpStatus, MalformedResponse };

std::string to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& message, int status = 0, int attempts = 1)
      : std::runtime_error(message), kind(kind), status(status), attempts(attempts) {}

  BackendErrorKind kind;
  int status;  // HTTP status when kind is Auth/HttpStatus, else 0
  int attempts;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendResponse classify(const prompting::PromptText& prompt) = 0;
  // Lightweight reachability check; never counts as a classification.
  virtual bool probe() = 0;
  // Stable description used in config fingerprints; carries no secrets.
  virtual std::string describe() const = 0;
};

// Chat-completions client: single user message, temperature 0 by default,
// no streaming. Retries transport errors and 5xx/429 with jittered
// exponential backoff (retry_base_delay * 2^attempt); other 4xx fail
// immediately. Concurrent in-flight requests are capped at max_in_flight.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  BackendResponse classify(const prompting::PromptText& prompt) override;
  bool probe() override;
  std::string describe() const override;

 private:
  BackendConfig config_;
  std::string host_part_;  // scheme://host[:port]
  std::string path_prefix_;
  std::counting_semaphore<1024> slots_;
};

struct MockRule {
  std::string contains;  // substring matched against the prompt's query
  corpus::Label verdict;
};

struct MockRules {
  std::vector<MockRule> rules;  // ordered; first match wins
  corpus::Label default_verdict = corpus::Label::Reject;
};

// Pure function: first pattern matching the prompt's query section decides,
// the mandatory default otherwise. Emits a well-formed {"result":...} body
// with zero latency.
BackendResponse mock_classify(const MockRules& rules, const prompting::PromptText& prompt);

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockRules rules) : rules_(std::move(rules)) {}
  BackendResponse classify(const prompting::PromptText& prompt) override {
    return mock_classify(rules_, prompt);
  }
  bool probe() override { return true; }
  std::string describe() const override;

 private:
  MockRules rules_;
};

}  // namespace homegate::backend
