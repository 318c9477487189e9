#include <doctest.h>

#include <sys/wait.h>

#include <thread>

#include <httplib.h>

#include "dikw/service/api.hpp"
#include "support.hpp"

using namespace dikw;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stdout captured to a file; stderr is discarded.
Result cli(const testing::TempDir& state, const std::string& args) {
  const auto out = state / "stdout.txt";
  const std::string cmd = std::string("\"") + DIKW_CLI_PATH + "\" --state-dir \"" + state.path().string() + "\" " +
                          args + " > \"" + out.string() + "\" 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = dataset::read_text_file(out);
  return r;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// One pipeline run shared by the tests that need a resolved portfolio.
struct PipelineRun {
  testing::TempDir state;
  std::string run_id;
  Result result;
  PipelineRun() {
    result = cli(state, "--json run --config " + q(testing::fixture("run_pipeline.json")) + " --auto-approve");
    if (result.code == 0) run_id = json::parse(result.out).at("run_id").get<std::string>();
  }
};

PipelineRun& pipeline() {
  static PipelineRun run;
  return run;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("ingest prints the fingerprint") {
    testing::TempDir state;
    auto r = cli(state, "--json ingest --csv " + q(testing::fixture("golden10.csv")) + " --schema " +
                            q(testing::fixture("golden10.schema.json")));
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j.at("digest") == testing::oracle_values().at("fingerprint_golden10").at("digest"));
  }

  TEST_CASE("auto-approved golden run exits zero") {
    testing::TempDir state;
    auto r = cli(state, "--json run --config " + q(testing::fixture("run_golden10.json")) + " --auto-approve");
    CHECK(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j.at("quiescent") == true);
    CHECK(j.at("counts").at("resolved") == 12);
  }

  TEST_CASE("gated run stops for review") {
    testing::TempDir state;
    auto r = cli(state, "run --config " + q(testing::fixture("run_golden10.json")));
    CHECK(r.code == 0);
  }

  TEST_CASE("pipeline run writes a portfolio that matches the golden file") {
    auto& p = pipeline();
    REQUIRE(p.result.code == 0);
    auto r = cli(p.state, "export portfolio --run " + p.run_id + " --format md");
    REQUIRE(r.code == 0);
    CHECK(r.out == dataset::read_text_file(testing::source_root() / "tests" / "golden" / "portfolio_pipeline.md"));

    auto js = cli(p.state, "export portfolio --run " + p.run_id + " --format json");
    REQUIRE(js.code == 0);
    CHECK(json::parse(js.out).at("candidates").size() == 20);
  }

  TEST_CASE("API and CLI serve the same portfolio") {
    auto& p = pipeline();
    REQUIRE(p.result.code == 0);
    auto md = cli(p.state, "export portfolio --run " + p.run_id + " --format md");
    REQUIRE(md.code == 0);

    orch::Engine::Options o;
    o.state_dir = p.state.path();
    orch::Engine engine(o);
    service::ApiServer server(engine, {});
    const int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.listen_after_bind(); });
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120);
    auto r = c.Get("/runs/" + p.run_id + "/portfolio?format=md");
    server.stop();
    t.join();
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body == md.out);
  }

  TEST_CASE("reviewing a resolved topic exits with the invalid-state code") {
    auto& p = pipeline();
    REQUIRE(p.result.code == 0);
    auto ls = cli(p.state, "--json topics ls --run " + p.run_id + " --layer knowledge");
    REQUIRE(ls.code == 0);
    auto topics = json::parse(ls.out);
    REQUIRE_FALSE(topics.empty());
    const auto tid = topics[0].at("id").get<std::string>();
    auto r = cli(p.state, "--json review " + tid + " --run " + p.run_id + " --approve --actor alex");
    CHECK(r.code == 5);
    CHECK(json::parse(r.out).at("error").at("code") == "InvalidState");
  }

  TEST_CASE("errors map to exit codes") {
    testing::TempDir state;
    auto missing = cli(state, "--json run --config /nonexistent/run.json");
    CHECK(missing.code == 3);
    CHECK(json::parse(missing.out).at("error").at("code") == "ValidationFailed");

    auto unknown = cli(state, "--json export portfolio --run nope-1");
    CHECK(unknown.code == 4);
    CHECK(json::parse(unknown.out).at("error").at("code") == "NotFound");

    CHECK(cli(state, "run").code == 2);
    CHECK(cli(state, "frobnicate").code == 2);
    CHECK(cli(state, "review knowledge/" + std::string(64, 'a')).code == 2);
  }
}
