#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "entdecon/error.hpp"
#include "entdecon/report.hpp"

using namespace entdecon;
using json = nlohmann::json;

namespace {

std::string data(const char* name) { return std::string(ENTDECON_TEST_DATA) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "entdecon_report_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("config JSON round trip") {
  RunConfig c;
  c.command = Command::Project;
  c.sample = "s.csv";
  c.mixture_class = "grid:-1:1:5";
  c.cost = json{{"kind", "gaussian"}, {"sigma2", 2.0}};
  c.tolerance = 1e-9;
  c.seed = 42;
  const auto back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.tolerance == c.tolerance);
  CHECK_FALSE(back.max_iterations.has_value());
}

TEST_CASE("config rejects unknown fields and bad types") {
  CHECK_THROWS_AS(run_config_from_json(json{{"command", "sinkhorn"}, {"sigma", 1.0}}), Error);
  CHECK_THROWS_AS(run_config_from_json(json{{"command", "sinkhorn"}, {"seed", -1}}), Error);
  CHECK_THROWS_AS(run_config_from_json(json{{"command", "transport"}}), Error);
  CHECK_THROWS_AS(run_config_from_json(json{{"mu", "x.json"}}), Error);
}

TEST_CASE("sinkhorn on two Diracs reports half the squared distance") {
  RunConfig c;
  c.command = Command::Sinkhorn;
  c.mu = data("delta_one.json");
  c.nu = data("delta_three.json");
  c.cost = "gaussian";
  const auto r = run(c);
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.report["payload"]["objective"].get<double>() == doctest::Approx(2.0));
  CHECK(r.report["schema_version"] == kReportSchemaVersion);
  CHECK(r.report["version"] == kVersion);
  CHECK(r.report["config"]["command"] == "sinkhorn");
  CHECK(r.report.contains("wall_time_seconds"));
  CHECK_FALSE(r.report["payload"].contains("coupling"));
  c.emit_coupling = true;
  CHECK(run(c).report["payload"].contains("coupling"));
}

TEST_CASE("malformed measure file names the offending field") {
  RunConfig c;
  c.command = Command::Sinkhorn;
  c.mu = data("bad_weights.json");
  c.nu = data("delta_three.json");
  c.cost = "gaussian";
  const auto r = run(c);
  CHECK(r.exit_code == kExitUsage);
  CHECK(r.error.find("weights") != std::string::npos);
  CHECK(r.error.find("bad_weights.json") != std::string::npos);
  CHECK(r.report["error"]["code"] == "parse");
}

TEST_CASE("missing input is an I/O failure") {
  RunConfig c;
  c.command = Command::Relaxed;
  c.mu = data("no_such_file.json");
  c.nu = data("sample.csv");
  c.cost = "gaussian";
  CHECK(run(c).exit_code == kExitIo);
}

TEST_CASE("certify lemma1 yields a passing bare report array") {
  RunConfig c;
  c.command = Command::Certify;
  c.claim = "lemma1";
  c.seeds_file = data("seeds.json");
  const auto r = run(c);
  CHECK(r.exit_code == kExitOk);
  REQUIRE(r.report.is_array());
  REQUIRE(r.report.size() == 1);
  CHECK(r.report[0]["pass"] == true);
  CHECK(r.report[0]["instances"].get<int>() >= 300);
}

TEST_CASE("unknown claim fails with a usage exit code") {
  RunConfig c;
  c.command = Command::Certify;
  c.claim = "nonsense";
  CHECK(run(c).exit_code == kExitUsage);
}

TEST_CASE("rendering is stable under parse and re-render") {
  RunConfig c;
  c.command = Command::Mle;
  c.sample = data("sample.csv");
  c.mixture_class = "grid:-3:3:13";
  c.noise = "gaussian";
  const auto r = run(c);
  REQUIRE(r.exit_code == kExitOk);
  const auto text = render_report(r.report);
  CHECK(render_report(json::parse(text)) == text);
  CHECK(text.back() == '\n');
}

TEST_CASE("payloads are identical across runs with the same seed") {
  RunConfig c;
  c.command = Command::Generate;
  c.mu = data("pstar.json");
  c.noise = "laplace";
  c.n = 25;
  c.seed = 9;
  const auto a = run(c);
  const auto b = run(c);
  REQUIRE(a.exit_code == kExitOk);
  CHECK(a.report["payload"] == b.report["payload"]);
  CHECK(a.report["payload"]["points"].size() == 25);
  c.seed = 10;
  CHECK(run(c).report["payload"] != a.report["payload"]);
}

TEST_CASE("generate writes the sample CSV and the report file") {
  RunConfig c;
  c.command = Command::Generate;
  c.mu = data("pstar.json");
  c.noise = "gaussian";
  c.n = 5;
  c.sample_out = scratch("sample.csv").string();
  c.out = scratch("report.json").string();
  const auto r = run(c);
  REQUIRE(r.exit_code == kExitOk);
  CHECK(slurp(c.out) == render_report(r.report));
  std::istringstream lines(slurp(c.sample_out));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 5);
}

TEST_CASE("a report's config echo reproduces the payload") {
  RunConfig c;
  c.command = Command::Project;
  c.sample = data("sample.csv");
  c.mixture_class = "k-atom:2";
  c.cost = "gaussian";
  c.sigma2 = 0.5;
  c.seed = 3;
  const auto first = run(c);
  REQUIRE(first.exit_code == kExitOk);
  const auto again = run(run_config_from_json(first.report["config"]));
  CHECK(again.report["payload"] == first.report["payload"]);
}

TEST_CASE("project modes and class files") {
  RunConfig c;
  c.command = Command::Project;
  c.sample = data("sample.csv");
  c.mixture_class = data("two_diracs_class.json");
  c.cost = "gaussian";
  c.mode = "relaxed";
  const auto r = run(c);
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.report["payload"]["objective_kind"].is_string());
  c.mode = "hard";
  CHECK(run(c).exit_code == kExitUsage);  // hard mode needs a k-atom class
  c.mixture_class = "k-atom:2";
  CHECK(run(c).exit_code == kExitOk);
  c.mode = "sideways";
  CHECK(run(c).exit_code == kExitUsage);
}

TEST_CASE("cost shorthands") {
  RunConfig c;
  c.command = Command::Relaxed;
  c.mu = data("pstar.json");
  c.nu = data("sample.csv");
  for (const char* spec : {"gaussian", "laplace", "p-exponential:3", R"({"kind":"laplace","scale":2})"}) {
    c.cost = spec;
    CHECK(run(c).exit_code == kExitOk);
  }
  c.cost = "p-exponential:x";
  CHECK(run(c).exit_code == kExitUsage);
}

TEST_CASE("iteration cap surfaces as non-convergence") {
  RunConfig c;
  c.command = Command::Sinkhorn;
  c.mu = data("pstar.json");
  c.nu = data("sample.csv");
  c.cost = "gaussian";
  c.sigma2 = 0.01;
  c.max_iterations = 1;
  c.tolerance = 1e-14;
  const auto r = run(c);
  CHECK(r.exit_code == kExitNotConverged);
  CHECK(r.report["error"]["code"] == "not-converged");
}
