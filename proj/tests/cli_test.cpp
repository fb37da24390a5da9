#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include <json.hpp>

#include "support/test_util.hpp"

namespace {

std::string cli_path() {
  if (const char* cli = std::getenv("HOMEGATE_CLI"); cli != nullptr && *cli != 0) {
    return cli;
  }
#ifdef HOMEGATE_DEFAULT_CLI
  return HOMEGATE_DEFAULT_CLI;
#else
  return "";
#endif
}

int run_cli(const std::string& args, const std::string& out_file) {
  const std::string cmd = cli_path() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli stats json output on the bundled mini corpus") {
  homegate::testutil::TempDir dir;
  const std::string out = dir.file("stats.json");
  REQUIRE(run_cli("stats --corpus " + homegate::testutil::src_dir() +
                      "/data/mini_corpus.jsonl --format json",
                  out) == 0);
  const auto j = nlohmann::json::parse(homegate::testutil::read_file(out));
  CHECK(j["total"] == 120);
  CHECK(j["errors"] == 0);
  CHECK(j["per_type"]["9"] == 30);
}

TEST_CASE("cli validate exits 1 and lists the offending line") {
  homegate::testutil::TempDir dir;
  homegate::testutil::write_file(
      dir.file("bad.jsonl"),
      R"({"id":"a","type_id":9,"text":"关掉空调","label":"accept"})"
      "\n"
      R"({"id":"b","type_id":9,"text":"打开灯","label":"reject"})"
      "\n");
  const std::string out = dir.file("validate.txt");
  CHECK(run_cli("validate --corpus " + dir.file("bad.jsonl"), out) == 1);
  const std::string text = homegate::testutil::read_file(out);
  CHECK(text.find("\"line\":2") != std::string::npos);
  CHECK(text.find("disagrees") != std::string::npos);

  // Raw-log mode downgrades the mismatch to a warning.
  CHECK(run_cli("validate --raw --corpus " + dir.file("bad.jsonl"), out) == 0);
  CHECK(homegate::testutil::read_file(out).find("\"warning\"") != std::string::npos);
}

TEST_CASE("cli failures emit a machine-readable error") {
  homegate::testutil::TempDir dir;
  const std::string out = dir.file("err.txt");
  CHECK(run_cli("stats --corpus " + dir.file("nope.jsonl"), out) == 1);
  CHECK(homegate::testutil::read_file(out).find("{\"error\":") != std::string::npos);

  CHECK(run_cli("replay --log " + dir.file("nope.jsonl"), out) == 1);
  CHECK(homegate::testutil::read_file(out).find("{\"error\":") != std::string::npos);

  CHECK(run_cli("eval --manifest " + dir.file("nope.json"), out) == 1);
  CHECK(run_cli("definitely-not-a-subcommand", out) != 0);
}
