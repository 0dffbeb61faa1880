#include <doctest.h>

#include <nlohmann/json.hpp>

#include "entdecon/error.hpp"
#include "entdecon/measures.hpp"

using namespace entdecon;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an entdecon::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("measure construction validates weights and dimensions") {
  CHECK_NOTHROW(DiscreteMeasure(1, {{0.0}, {1.0}}, {0.25, 0.75}));
  CHECK(code_of([] { DiscreteMeasure(1, {{0.0}, {1.0}}, {0.5, 0.6}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { DiscreteMeasure(1, {{0.0}, {1.0}}, {1.5, -0.5}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { DiscreteMeasure(2, {{0.0, 1.0}, {1.0}}, {0.5, 0.5}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { DiscreteMeasure(1, {}, {}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("zero-weight atoms are kept and dropped by support_only") {
  const DiscreteMeasure m(1, {{0.0}, {1.0}, {2.0}}, {0.5, 0.0, 0.5});
  CHECK(m.size() == 3);
  CHECK(m.support_only().size() == 2);
  CHECK(m.mass_at(std::vector<double>{1.0}) == 0.0);
  CHECK(m.mass_at(std::vector<double>{2.0}) == 0.5);
}

TEST_CASE("canonical merges repeated atoms") {
  const auto m = DiscreteMeasure::uniform(1, {{1.0}, {3.0}, {1.0}, {1.0}}).canonical();
  REQUIRE(m.size() == 2);
  CHECK(m.mass_at(std::vector<double>{1.0}) == doctest::Approx(0.75));
  CHECK(m.mass_at(std::vector<double>{3.0}) == doctest::Approx(0.25));
}

TEST_CASE("empirical measure of a sample with ties") {
  const Sample s(std::vector<Point>{{2.0}, {2.0}, {5.0}});
  const auto e = empirical_measure(s);
  CHECK(e.size() == 2);
  CHECK(e.mass_at(std::vector<double>{2.0}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("total variation distance") {
  const auto a = DiscreteMeasure::dirac({0.0});
  const auto b = DiscreteMeasure::dirac({1.0});
  CHECK(total_variation_distance(a, b) == doctest::Approx(1.0));
  CHECK(total_variation_distance(a, a) == 0.0);
  const DiscreteMeasure c(1, {{0.0}, {1.0}}, {0.5, 0.5});
  CHECK(total_variation_distance(a, c) == doctest::Approx(0.5));
}

TEST_CASE("second moment") {
  const DiscreteMeasure m(2, {{1.0, 0.0}, {0.0, 3.0}}, {0.5, 0.5});
  CHECK(second_moment(m) == doctest::Approx(5.0));
}

TEST_CASE("measure JSON round trip and field-specific errors") {
  const DiscreteMeasure m(2, {{0.1, -2.0}, {3.0, 1e-300}}, {0.3, 0.7});
  const auto back = measure_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.atoms() == m.atoms());
  CHECK(back.weights() == m.weights());

  auto message = [](const char* text) {
    try {
      measure_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"dim":1,"atoms":[[0]]})").find("weights") != std::string::npos);
  CHECK(message(R"({"dim":1,"atoms":[[0]],"weights":["a"]})").find("weights") != std::string::npos);
  CHECK(message(R"({"dim":0,"atoms":[[0]],"weights":[1]})").find("dim") != std::string::npos);
  CHECK(message(R"({"dim":1,"atoms":[0],"weights":[1]})").find("atoms") != std::string::npos);
}

TEST_CASE("sample CSV parsing") {
  const auto s = parse_sample_csv("1.5\n\n-2.25\r\n3e2\n");
  REQUIRE(s.size() == 3);
  CHECK(s.points()[2][0] == 300.0);
  const auto two = parse_sample_csv("1,2\n3,4\n");
  CHECK(two.dim() == 2);

  try {
    parse_sample_csv("1.0\n2.0x\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(code_of([] { parse_sample_csv("1,2\n3\n"); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { parse_sample_csv(""); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { load_sample("/nonexistent/sample.csv"); }) == ErrorCode::Io);
}

TEST_CASE("sample CSV export round trips exactly") {
  const Sample s(std::vector<Point>{{0.1}, {-1.0 / 3.0}, {1e-17}});
  const auto back = parse_sample_csv(sample_to_csv(s));
  CHECK(back.points() == s.points());
}
