#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>

#include "entdecon/entdecon.h"

namespace {

std::string data(const char* name) { return std::string(ENTDECON_TEST_DATA) + "/" + name; }

const char* kGauss = R"({"kind":"gaussian","sigma2":1})";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(ed_version()) == "0.1.0");
  CHECK(std::string(ed_status_name(ED_PARSE)) == "parse");
}

TEST_CASE("measure handles") {
  const double atoms[] = {0.0, 1.0, 2.0};
  const double weights[] = {0.2, 0.3, 0.5};
  ed_measure* m = nullptr;
  REQUIRE(ed_measure_create(1, 3, atoms, weights, &m) == ED_OK);
  CHECK(ed_measure_size(m) == 3);
  CHECK(ed_measure_dim(m) == 1);
  double w[3], a[3];
  CHECK(ed_measure_weights(m, w) == ED_OK);
  CHECK(ed_measure_atoms(m, a) == ED_OK);
  CHECK(w[2] == 0.5);
  CHECK(a[1] == 1.0);
  ed_measure_free(m);
  ed_measure_free(nullptr);
}

TEST_CASE("invalid input maps onto status codes with a message") {
  const double atoms[] = {0.0, 1.0};
  const double bad[] = {0.5, 0.7};
  ed_measure* m = nullptr;
  CHECK(ed_measure_create(1, 2, atoms, bad, &m) == ED_INVALID_ARGUMENT);
  CHECK(m == nullptr);
  CHECK(std::string(ed_last_error()).find("sum") != std::string::npos);
  CHECK(ed_measure_create(1, 2, nullptr, bad, &m) == ED_INVALID_ARGUMENT);
  CHECK(ed_measure_load(data("bad_weights.json").c_str(), &m) == ED_PARSE);
  CHECK(std::string(ed_last_error()).find("weights") != std::string::npos);
  CHECK(ed_measure_load(data("missing.json").c_str(), &m) == ED_IO);
}

TEST_CASE("transport, relaxed value and likelihood through the C API") {
  ed_measure *a = nullptr, *b = nullptr;
  REQUIRE(ed_measure_load(data("delta_one.json").c_str(), &a) == ED_OK);
  REQUIRE(ed_measure_load(data("delta_three.json").c_str(), &b) == ED_OK);
  double obj = 0, err = 1;
  CHECK(ed_sinkhorn(a, b, kGauss, 1.0, 0.0, 0, &obj, &err) == ED_OK);
  CHECK(obj == doctest::Approx(2.0));
  CHECK(err <= 1e-10);
  double v = 0;
  CHECK(ed_relaxed(a, b, kGauss, 1.0, &v) == ED_OK);
  CHECK(v == doctest::Approx(2.0));
  const double y[] = {1.0, 2.0};
  double ll = 0;
  CHECK(ed_log_likelihood(a, 2, y, kGauss, &ll) == ED_OK);
  const double c = -0.5 * std::log(2 * 3.141592653589793);
  CHECK(ll == doctest::Approx(2 * c - 0.5));
  CHECK(ed_sinkhorn(a, b, "{not json", 1.0, 0.0, 0, &obj, &err) == ED_PARSE);
  CHECK(ed_sinkhorn(a, b, kGauss, -1.0, 0.0, 0, &obj, &err) == ED_INVALID_ARGUMENT);
  ed_measure* s = nullptr;
  REQUIRE(ed_measure_load(data("sample.csv").c_str(), &s) == ED_OK);
  CHECK(ed_measure_size(s) == 10);
  ed_measure_free(s);
  ed_measure_free(a);
  ed_measure_free(b);
}

TEST_CASE("run a configuration") {
  const nlohmann::json cfg{{"command", "certify"}, {"claim", "lemma1"}, {"seeds_file", data("seeds.json")}};
  char* report = nullptr;
  int code = -1;
  REQUIRE(ed_run_json(cfg.dump().c_str(), &report, &code) == ED_OK);
  CHECK(code == 0);
  const auto j = nlohmann::json::parse(report);
  CHECK(j[0]["pass"] == true);
  ed_string_free(report);

  const nlohmann::json bad{{"command", "sinkhorn"}, {"mu", data("bad_weights.json")},
                           {"nu", data("delta_one.json")}, {"cost", "gaussian"}};
  REQUIRE(ed_run_json(bad.dump().c_str(), &report, &code) == ED_OK);
  CHECK(code != 0);
  CHECK(std::string(ed_last_error()).find("weights") != std::string::npos);
  ed_string_free(report);

  CHECK(ed_run_json(R"({"command":"sinkhorn","bogus":1})", &report, &code) == ED_PARSE);
  CHECK(ed_run_json("[", &report, &code) == ED_PARSE);
}
