#include <doctest.h>

#include <cstdlib>

#include "homegate/config.hpp"
#include "support/test_util.hpp"

using namespace homegate;

TEST_CASE("toml subset parsing") {
  const auto table = config::parse_toml(
      "# gateway config\n"
      "title = \"home gateway\"\n"
      "\n"
      "[service]\n"
      "listen_port = 8080        # inline comment\n"
      "data_dir = \"/tmp/x\"\n"
      "\n"
      "[backend]\n"
      "temperature = 0.5\n"
      "retries_enabled = true\n"
      "escaped = \"a\\\"b\\nc\"\n");
  CHECK(config::toml_string(table, "title") == "home gateway");
  CHECK(config::toml_int(table, "service.listen_port") == 8080);
  CHECK(config::toml_string(table, "service.data_dir") == "/tmp/x");
  CHECK(config::toml_double(table, "backend.temperature") == doctest::Approx(0.5));
  CHECK(config::toml_bool(table, "backend.retries_enabled") == true);
  CHECK(config::toml_string(table, "backend.escaped") == "a\"b\nc");
  CHECK(!config::toml_string(table, "nope").has_value());
}

TEST_CASE("toml errors carry line numbers") {
  CHECK_THROWS_WITH_AS(config::parse_toml("key\n"), doctest::Contains("line 1"),
                       config::ConfigError);
  CHECK_THROWS_WITH_AS(config::parse_toml("\nkey = \"unterminated\n"),
                       doctest::Contains("line 2"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_toml("x = 1.2.3\n"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_toml("[table\n"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_toml("bad key = 1\n"), config::ConfigError);
  CHECK_THROWS_WITH_AS(config::parse_toml("[service]\nport = maybe\n"),
                       doctest::Contains("unrecognized value"), config::ConfigError);
}

TEST_CASE("type mismatches are reported by key") {
  const auto table = config::parse_toml("x = \"text\"\ny = 5\n");
  CHECK_THROWS_AS(config::toml_int(table, "x"), config::ConfigError);
  CHECK_THROWS_AS(config::toml_bool(table, "y"), config::ConfigError);
  CHECK(config::toml_double(table, "y") == doctest::Approx(5.0));  // int widens
}

TEST_CASE("service config binds from toml with validation") {
  testutil::TempDir dir;
  const std::string toml =
      "[service]\n"
      "listen_host = \"127.0.0.1\"\n"
      "listen_port = 0\n"
      "data_dir = \"" + dir.path() + "/data\"\n"
      "locale = \"zh\"\n"
      "\n"
      "[backend]\n"
      "kind = \"mock\"\n"
      "mock_rules = \"关掉=>yes;打开=>yes;default=>no\"\n"
      "\n"
      "[pipeline]\n"
      "mode = \"with_history_and_cases\"\n"
      "k = 3\n"
      "window_max_age_s = 86400\n"
      "window_max_turns = 10\n"
      "strict_parse = false\n"
      "failure_policy = \"reject\"\n";
  auto cfg = config::service_config_from_toml(config::parse_toml(toml));
  CHECK(cfg.backend_kind == "mock");
  CHECK(cfg.mock.rules.rules.size() == 2);
  CHECK(cfg.mock.rules.default_verdict == corpus::Label::Reject);
  CHECK(cfg.pipeline.mode == prompting::PromptMode::WithHistoryAndCases);
  CHECK(cfg.pipeline.k == 3);
  cfg.listen_port = 8080;
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("bad values are rejected") {
    auto bad = cfg;
    bad.listen_port = -1;
    CHECK_THROWS_AS(bad.validate(), config::ConfigError);
    bad = cfg;
    bad.backend_kind = "carrier-pigeon";
    CHECK_THROWS_AS(bad.validate(), config::ConfigError);
    bad = cfg;
    bad.template_path = dir.file("missing-template.txt");
    CHECK_THROWS_AS(bad.validate(), prompting::PromptError);
    bad = cfg;
    bad.pipeline.k = 0;
    CHECK_THROWS_AS(bad.validate(), pipeline::PipelineError);
  }
}

TEST_CASE("env overrides take precedence") {
  config::ServiceConfig cfg;
  setenv("HOMEGATE_LISTEN_PORT", "9191", 1);
  setenv("HOMEGATE_BACKEND_URL", "http://10.0.0.1:9/v1", 1);
  config::apply_env_overrides(cfg);
  unsetenv("HOMEGATE_LISTEN_PORT");
  unsetenv("HOMEGATE_BACKEND_URL");
  CHECK(cfg.listen_port == 9191);
  CHECK(cfg.backend.base_url == "http://10.0.0.1:9/v1");
}

TEST_CASE("mock rule DSL") {
  const auto rules = config::parse_mock_rules("关掉=>yes; 打开=>accept ;default=>no");
  REQUIRE(rules.rules.size() == 2);
  CHECK(rules.rules[0].contains == "关掉");
  CHECK(rules.rules[0].verdict == corpus::Label::Accept);
  CHECK(rules.rules[1].contains == "打开");
  CHECK(rules.default_verdict == corpus::Label::Reject);

  CHECK_THROWS_WITH_AS(config::parse_mock_rules("关掉=>yes"), doctest::Contains("default"),
                       config::ConfigError);
  CHECK_THROWS_AS(config::parse_mock_rules("=>yes;default=>no"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_mock_rules("x=>maybe;default=>no"), config::ConfigError);
}

TEST_CASE("eval manifest loading") {
  testutil::TempDir dir;
  const std::string manifest_path = dir.file("manifest.json");
  testutil::write_file(manifest_path, R"({
    "corpus": "bench.jsonl",
    "mode": "generic",
    "k": 3,
    "window": {"max_age_s": 3600, "max_turns": 5},
    "strict_parse": true,
    "now": 123,
    "sequential": false,
    "max_in_flight": 2,
    "model_label": "mock-fixture",
    "backend": {"kind": "mock",
                "rules": [{"contains": "关掉", "verdict": "accept"}],
                "default": "reject"},
    "output": {"json": "report.json", "markdown": "report.md"}
  })");
  const auto manifest = config::load_manifest(manifest_path);
  CHECK(manifest.corpus_path == "bench.jsonl");
  CHECK(manifest.options.pipeline.mode == prompting::PromptMode::Generic);
  CHECK(manifest.options.pipeline.window.max_turns == 5);
  CHECK(manifest.options.pipeline.strict_parse);
  CHECK(manifest.options.now == 123);
  CHECK(manifest.options.model_name == "mock-fixture");
  CHECK(manifest.backend_kind == "mock");
  CHECK(manifest.mock.rules.rules.size() == 1);
  CHECK(manifest.outputs.at("json") == "report.json");

  SUBCASE("missing corpus") {
    testutil::write_file(manifest_path, R"({"backend": {"kind":"mock","default":"reject"}})");
    CHECK_THROWS_AS(config::load_manifest(manifest_path), config::ConfigError);
  }
  SUBCASE("mock without default") {
    testutil::write_file(manifest_path,
                         R"({"corpus":"x","backend":{"kind":"mock","rules":[]}})");
    CHECK_THROWS_AS(config::load_manifest(manifest_path), config::ConfigError);
  }
  SUBCASE("unknown output format") {
    testutil::write_file(
        manifest_path,
        R"({"corpus":"x","backend":{"kind":"mock","default":"reject"},"output":{"pdf":"x"}})");
    CHECK_THROWS_AS(config::load_manifest(manifest_path), config::ConfigError);
  }
  SUBCASE("http backend requires base_url") {
    testutil::write_file(manifest_path, R"({"corpus":"x","backend":{"kind":"http"}})");
    CHECK_THROWS_AS(config::load_manifest(manifest_path), config::ConfigError);
  }
}
