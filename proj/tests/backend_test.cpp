#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "homegate/backend.hpp"

using namespace homegate;

namespace {

prompting::PromptText prompt_of(const std::string& query) {
  prompting::PromptText p;
  p.text = "prompt body for " + query;
  p.query = query;
  p.mode = prompting::PromptMode::Generic;
  return p;
}

std::string chat_reply(const std::string& content) {
  return nlohmann::json{
      {"choices", nlohmann::json::array({nlohmann::json{
                      {"message", {{"role", "assistant"}, {"content", content}}}}})}}
      .dump();
}

// In-process chat-completions fixture with a scriptable handler.
class FixtureServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FixtureServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   ++hits_;
                   handler_(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FixtureServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_; }

 private:
  httplib::Server server_;
  Handler handler_;
  std::atomic<int> hits_{0};
  int port_ = 0;
  std::thread thread_;
};

backend::BackendConfig config_for(const FixtureServer& server) {
  backend::BackendConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_name = "fixture";
  cfg.timeout_ms = 2000;
  cfg.max_retries = 3;
  cfg.retry_base_delay_ms = 1;
  return cfg;
}

}  // namespace

TEST_CASE("mock_classify follows the ordered rule table") {
  backend::MockRules rules;
  rules.rules.push_back({"关掉", corpus::Label::Accept});
  rules.default_verdict = corpus::Label::Reject;

  const auto accept = backend::mock_classify(rules, prompt_of("关掉空调"));
  CHECK(accept.raw_text == R"({"result":"YES"})");
  CHECK(accept.latency_ms == 0.0);
  CHECK(accept.attempts == 1);

  const auto reject = backend::mock_classify(rules, prompt_of("好天气"));
  CHECK(reject.raw_text == R"({"result":"NO"})");

  // Pure function of (rules, prompt).
  CHECK(backend::mock_classify(rules, prompt_of("关掉空调")).raw_text == accept.raw_text);

  backend::MockRules empty{{}, corpus::Label::Accept};
  CHECK(backend::mock_classify(empty, prompt_of("anything")).raw_text == R"({"result":"YES"})");
}

TEST_CASE("config validation bounds") {
  backend::BackendConfig cfg;
  cfg.base_url = "http://localhost:1";
  CHECK_NOTHROW(cfg.validate());
  cfg.timeout_ms = 0;
  CHECK_THROWS_AS(cfg.validate(), backend::BackendError);
  cfg.timeout_ms = 1000;
  cfg.max_retries = 6;
  CHECK_THROWS_AS(cfg.validate(), backend::BackendError);
  cfg.max_retries = 2;
  cfg.temperature = -0.5;
  CHECK_THROWS_AS(cfg.validate(), backend::BackendError);
  cfg.temperature = 0.0;
  cfg.base_url = "localhost-no-scheme";
  CHECK_THROWS_AS(cfg.validate(), backend::BackendError);
}

TEST_CASE("healthy endpoint round trip passes bytes through untouched") {
  FixtureServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "fixture");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["seed"] == 7);
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "prompt body for 关掉空调");
    res.set_content(chat_reply("  {\"result\":\"YES\"}\n"), "application/json");
  });
  auto cfg = config_for(server);
  cfg.seed = 7;
  backend::HttpBackend be(cfg);
  const auto response = be.classify(prompt_of("关掉空调"));
  CHECK(response.raw_text == "  {\"result\":\"YES\"}\n");  // no trimming
  CHECK(response.attempts == 1);
  CHECK(response.latency_ms >= 0.0);
  CHECK(server.hits() == 1);
  CHECK(be.probe());
}

TEST_CASE("5xx twice then success consumes three attempts") {
  std::atomic<int> calls{0};
  FixtureServer server([&calls](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 500;
      return;
    }
    res.set_content(chat_reply(R"({"result":"NO"})"), "application/json");
  });
  backend::HttpBackend be(config_for(server));
  const auto response = be.classify(prompt_of("x"));
  CHECK(response.attempts == 3);
  CHECK(response.raw_text == R"({"result":"NO"})");
  CHECK(server.hits() == 3);
}

TEST_CASE("429 is retried") {
  std::atomic<int> calls{0};
  FixtureServer server([&calls](const httplib::Request&, httplib::Response& res) {
    if (++calls == 1) {
      res.status = 429;
      return;
    }
    res.set_content(chat_reply(R"({"result":"NO"})"), "application/json");
  });
  backend::HttpBackend be(config_for(server));
  CHECK(be.classify(prompt_of("x")).attempts == 2);
}

TEST_CASE("401 is an immediate typed auth error") {
  FixtureServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
  });
  backend::HttpBackend be(config_for(server));
  try {
    be.classify(prompt_of("x"));
    FAIL("expected BackendError");
  } catch (const backend::BackendError& e) {
    CHECK(e.kind == backend::BackendErrorKind::Auth);
    CHECK(e.status == 401);
    CHECK(e.attempts == 1);
  }
  CHECK(server.hits() == 1);  // no retries on auth failures
}

TEST_CASE("non-retryable 4xx fails fast") {
  FixtureServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 404;
  });
  backend::HttpBackend be(config_for(server));
  CHECK_THROWS_AS(be.classify(prompt_of("x")), backend::BackendError);
  CHECK(server.hits() == 1);
}

TEST_CASE("malformed endpoint responses are typed errors") {
  FixtureServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"unexpected":"shape"})", "application/json");
  });
  backend::HttpBackend be(config_for(server));
  try {
    be.classify(prompt_of("x"));
    FAIL("expected BackendError");
  } catch (const backend::BackendError& e) {
    CHECK(e.kind == backend::BackendErrorKind::MalformedResponse);
  }
}

TEST_CASE("api key from the environment is sent and never echoed") {
  std::string seen_auth;
  FixtureServer server([&seen_auth](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    res.set_content(chat_reply(R"({"result":"YES"})"), "application/json");
  });
  setenv("HOMEGATE_API_KEY", "secret-key", 1);
  backend::HttpBackend be(config_for(server));
  be.classify(prompt_of("x"));
  unsetenv("HOMEGATE_API_KEY");
  CHECK(seen_auth == "Bearer secret-key");
  CHECK(be.describe().find("secret-key") == std::string::npos);
}

TEST_CASE("a stalling endpoint is bounded by timeout, retries, and backoff") {
  FixtureServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(chat_reply(R"({"result":"YES"})"), "application/json");
  });
  backend::BackendConfig cfg = config_for(server);
  cfg.timeout_ms = 150;
  cfg.max_retries = 1;
  cfg.retry_base_delay_ms = 20;

  backend::HttpBackend be(cfg);
  const auto started = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(be.classify(prompt_of("x")), backend::BackendError);
  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  // timeout * (retries + 1) + total backoff, with scheduling slack.
  const double bound_ms = 150.0 * 2 + 20.0 + 700.0;
  CHECK(elapsed_ms < bound_ms);
}

TEST_CASE("transport failure to a dead port exhausts retries with typed error") {
  backend::BackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:9/v1";
  cfg.timeout_ms = 200;
  cfg.max_retries = 2;
  cfg.retry_base_delay_ms = 1;
  backend::HttpBackend be(cfg);
  try {
    be.classify(prompt_of("x"));
    FAIL("expected BackendError");
  } catch (const backend::BackendError& e) {
    CHECK((e.kind == backend::BackendErrorKind::Transport ||
           e.kind == backend::BackendErrorKind::Timeout));
    CHECK(e.attempts == 3);
  }
  CHECK_FALSE(be.probe());
}
