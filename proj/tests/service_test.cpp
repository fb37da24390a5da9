#include <doctest.h>

#include <httplib.h>

#include "homegate/decision_log.hpp"
#include "homegate/service.hpp"
#include "support/test_util.hpp"

using namespace homegate;

namespace {

config::ServiceConfig mock_service_config(const std::string& data_dir) {
  config::ServiceConfig cfg;
  cfg.listen_host = "127.0.0.1";
  cfg.listen_port = 0;
  cfg.data_dir = data_dir;
  cfg.backend_kind = "mock";
  cfg.mock.rules = config::parse_mock_rules("关掉=>yes;打开=>yes;default=>no");
  cfg.pipeline.mode = prompting::PromptMode::WithHistoryAndCases;
  return cfg;
}

nlohmann::json post_json(httplib::Client& client, const std::string& path,
                         const nlohmann::json& body, int expected_status) {
  const auto res = client.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expected_status);
  return nlohmann::json::parse(res->body);
}

}  // namespace

TEST_CASE("service request lifecycle") {
  testutil::TempDir dir;
  service::Service svc(mock_service_config(dir.path()));
  const int port = svc.start_async();
  httplib::Client client("127.0.0.1", port);

  SUBCASE("decide accepts a supported command") {
    const auto body = post_json(
        client, "/v1/decide",
        {{"household_id", "h1"}, {"text", "关掉空调"}, {"timestamp", 1000}}, 200);
    CHECK(body["verdict"] == "accept");
    CHECK(body["degraded"] == false);
    CHECK(body["mode"] == "with_history_and_cases");
    CHECK(body["request_id"].is_string());

    // The decision log line shares the response's request id.
    const auto log = decision_log::read_log(dir.path() + "/decisions.jsonl");
    REQUIRE(log.entries.size() == 1);
    CHECK(log.entries[0].id == body["request_id"].get<std::string>());
    CHECK(log.entries[0].text == "关掉空调");
    CHECK(log.entries[0].verdict == corpus::Label::Accept);
  }

  SUBCASE("field-level validation errors") {
    const auto missing_text =
        post_json(client, "/v1/decide", {{"household_id", "h1"}}, 400);
    CHECK(missing_text["error"]["field"] == "text");
    const auto missing_household = post_json(client, "/v1/decide", {{"text", "hi"}}, 400);
    CHECK(missing_household["error"]["field"] == "household_id");

    const auto res = client.Post("/v1/decide", "not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("feedback stores corrections and dedups") {
    const auto stored = post_json(client, "/v1/feedback",
                                  {{"household_id", "h1"},
                                   {"utterance", "咱们聊聊"},
                                   {"predicted", "reject"},
                                   {"corrected", "accept"},
                                   {"timestamp", 1000}},
                                  200);
    CHECK(stored["stored"] == true);
    const auto duplicate = post_json(client, "/v1/feedback",
                                     {{"household_id", "h1"},
                                      {"utterance", "咱们聊聊"},
                                      {"predicted", "reject"},
                                      {"corrected", "accept"},
                                      {"timestamp", 1001}},
                                     200);
    CHECK(duplicate["stored"] == false);
    const auto no_op = post_json(client, "/v1/feedback",
                                 {{"household_id", "h1"},
                                  {"utterance", "关掉空调"},
                                  {"predicted", "accept"},
                                  {"corrected", "accept"}},
                                 200);
    CHECK(no_op["stored"] == false);

    const auto kb_res = client.Get("/v1/households/h1/kb");
    REQUIRE(kb_res);
    const auto kb_body = nlohmann::json::parse(kb_res->body);
    CHECK(kb_body["accept"] == 1);
    CHECK(kb_body["total"] == 1);
  }

  SUBCASE("history reflects decides and honors limit and strict") {
    post_json(client, "/v1/decide",
              {{"household_id", "h2"}, {"text", "打开灯"}, {"timestamp", 1000}}, 200);
    post_json(client, "/v1/decide",
              {{"household_id", "h2"}, {"text", "关掉灯"}, {"timestamp", 1001}}, 200);

    const auto res = client.Get("/v1/households/h2/history");
    REQUIRE(res);
    auto body = nlohmann::json::parse(res->body);
    REQUIRE(body["turns"].size() == 2);
    CHECK(body["turns"][0]["text"] == "打开灯");

    const auto limited = client.Get("/v1/households/h2/history?limit=1");
    body = nlohmann::json::parse(limited->body);
    REQUIRE(body["turns"].size() == 1);
    CHECK(body["turns"][0]["text"] == "关掉灯");

    const auto lenient = client.Get("/v1/households/nobody/history");
    REQUIRE(lenient);
    CHECK(lenient->status == 200);
    CHECK(nlohmann::json::parse(lenient->body)["turns"].empty());

    const auto strict = client.Get("/v1/households/nobody/history?strict=1");
    REQUIRE(strict);
    CHECK(strict->status == 404);
    const auto strict_kb = client.Get("/v1/households/nobody/kb?strict=1");
    REQUIRE(strict_kb);
    CHECK(strict_kb->status == 404);
  }

  SUBCASE("health reports the backend as reachable") {
    const auto res = client.Get("/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["backend_reachable"] == true);
    CHECK(body["version"] == service::kVersion);
  }

  svc.stop();
}

TEST_CASE("degraded and unavailable backend behavior") {
  testutil::TempDir dir;
  // Point at a dead port; retries kept minimal so the tests stay fast.
  auto cfg = mock_service_config(dir.path());
  cfg.backend_kind = "http";
  cfg.backend.base_url = "http://127.0.0.1:9";
  cfg.backend.timeout_ms = 200;
  cfg.backend.max_retries = 0;
  cfg.backend.retry_base_delay_ms = 1;

  SUBCASE("fail-reject answers 200 with a degraded verdict") {
    cfg.pipeline.failure_policy = pipeline::FailurePolicy::FailReject;
    service::Service svc(cfg);
    const int port = svc.start_async();
    httplib::Client client("127.0.0.1", port);
    const auto body = post_json(
        client, "/v1/decide",
        {{"household_id", "h1"}, {"text", "关掉空调"}, {"timestamp", 1000}}, 200);
    CHECK(body["verdict"] == "reject");
    CHECK(body["degraded"] == true);
    svc.stop();
  }
  SUBCASE("policy off surfaces 503") {
    cfg.pipeline.failure_policy = pipeline::FailurePolicy::Propagate;
    service::Service svc(cfg);
    const int port = svc.start_async();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(std::chrono::seconds(10));
    const auto res = client.Post(
        "/v1/decide",
        nlohmann::json{{"household_id", "h1"}, {"text", "关掉空调"}, {"timestamp", 1000}}.dump(),
        "application/json");
    REQUIRE(res);
    CHECK(res->status == 503);
    svc.stop();
  }
}

TEST_CASE("bearer-token auth when the env var is set") {
  testutil::TempDir dir;
  setenv("HOMEGATE_TOKEN", "sesame", 1);
  service::Service svc(mock_service_config(dir.path()));
  const int port = svc.start_async();
  httplib::Client client("127.0.0.1", port);

  const auto denied = client.Post(
      "/v1/decide",
      nlohmann::json{{"household_id", "h1"}, {"text", "关掉空调"}}.dump(), "application/json");
  REQUIRE(denied);
  CHECK(denied->status == 401);

  httplib::Headers headers{{"Authorization", "Bearer sesame"}};
  const auto allowed =
      client.Post("/v1/decide", headers,
                  nlohmann::json{{"household_id", "h1"}, {"text", "关掉空调"}}.dump(),
                  "application/json");
  REQUIRE(allowed);
  CHECK(allowed->status == 200);

  svc.stop();
  unsetenv("HOMEGATE_TOKEN");
}
