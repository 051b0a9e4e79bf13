#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "doctest.h"
#include "growthld/config.hpp"
#include "growthld/table.hpp"

using namespace growthld;
using io::Cell;
using io::Table;

namespace {

Table sample() {
  Table t({"name", "x", "y"});
  t.add_row({std::string("a,b"), 0.1, std::numeric_limits<double>::infinity()});
  t.add_row({std::string("say \"hi\""), -std::numeric_limits<double>::infinity(), Cell{}});
  t.add_row({std::string("plain"), 1.0 / 3.0, 5e-324});
  t.meta["model"] = "black_scholes";
  t.meta["lipschitz"] = 2.5;
  return t;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("numbers round-trip bit for bit") {
    std::mt19937_64 gen(5);
    for (int i = 0; i < 2000; ++i) {
      double x;
      const std::uint64_t bits = gen();
      std::memcpy(&x, &bits, sizeof x);
      if (std::isnan(x)) continue;
      CHECK(io::parse_number(io::format_number(x)) == x);
    }
    CHECK(io::format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(io::format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::isnan(io::parse_number("nan")));
    CHECK(io::format_number(0.1) == "0.10000000000000001");
    CHECK_THROWS_AS(io::parse_number("1.5x"), Error);
    CHECK_THROWS_AS(io::parse_number(""), Error);
  }

  TEST_CASE("CSV layout") {
    const auto csv = sample().to_csv();
    CHECK(csv.rfind("name,x,y\n", 0) == 0);
    CHECK(csv.find("\"a,b\",0.10000000000000001,inf\n") != std::string::npos);
    CHECK(csv.find("\"say \"\"hi\"\"\",-inf,\n") != std::string::npos);
    CHECK(csv.find("# model=black_scholes\n") != std::string::npos);
  }

  TEST_CASE("JSON round-trip is exact") {
    const auto t = sample();
    const auto j = t.to_json();
    CHECK(j["rows"][0]["y"] == "inf");
    CHECK(j["rows"][1]["x"] == "-inf");
    CHECK(j["rows"][1]["y"].is_null());
    const auto back = Table::from_json(nlohmann::ordered_json::parse(j.dump()));
    CHECK(back == t);
    CHECK(back.number(2, "x") == 1.0 / 3.0);
    CHECK(back.number(2, "y") == 5e-324);
    CHECK(back.meta == t.meta);
  }

  TEST_CASE("table access") {
    auto t = sample();
    CHECK_THROWS_AS(t.add_row({1.0}), Error);
    CHECK_THROWS_AS(t.at(0, "missing"), Error);
    CHECK_THROWS_AS(t.number(0, "name"), Error);
    CHECK(std::get<std::string>(t.at(2, "name")) == "plain");
  }

  TEST_CASE("grids") {
    const auto g = io::parse_grid("0:1:5");
    REQUIRE(g.size() == 5);
    CHECK(g[1] == 0.25);
    CHECK(g.back() == 1.0);
    CHECK(io::parse_grid("0.3:0.9:7").back() == 0.9);
    CHECK(io::parse_grid("0.2, 0.5 ,1").size() == 3);
    CHECK(io::parse_grid("-0.01") == std::vector<double>{-0.01});
    CHECK(io::parse_grid("2:3:1") == std::vector<double>{2.0});
    CHECK_THROWS_AS(io::parse_grid("0:1"), Error);
    CHECK_THROWS_AS(io::parse_grid("0:1:0"), Error);
    CHECK_THROWS_AS(io::parse_grid("0:1:2.5"), Error);
    CHECK_THROWS_AS(io::parse_grid(""), Error);
  }

  TEST_CASE("model files") {
    using nlohmann::json;
    CHECK(std::holds_alternative<models::BlackScholesModel>(
        io::parse_model(json::parse(R"({"b": 0.1, "sigma": 0.2})"))));
    CHECK(std::holds_alternative<models::PlatenRebolledo>(
        io::parse_model(json::parse(R"({"K": -0.5, "sigma_norm": 0.2})"))));
    const auto lg = io::parse_model(json::parse(
        R"({"K": -1, "B1": 1, "B0": 0.5, "sigma_norm": 1, "gamma_norm": 1, "rho": 0})"));
    CHECK(std::get<models::LinearFactor1D>(lg).B0 == 0.5);
    const auto md = io::parse_model(json::parse(
        R"({"K": [[-1, 0], [0, -2]], "B1": [[1, 0], [0, 1]], "B0": [0.1, 0.2],
            "sigma": [[1, 0, 0, 0], [0, 1, 0, 0]], "gamma": [[0, 0, 1, 0], [0, 0, 0, 1]]})"));
    CHECK(std::get<riccati::LinearFactorMD>(md).K(1, 1) == -2.0);

    for (const auto& m : {lg, md, io::parse_model(json::parse(R"({"b": 0.1, "sigma": 0.2})"))}) {
      const auto again = io::parse_model(json::parse(io::model_to_json(m).dump()));
      CHECK(io::model_to_json(again) == io::model_to_json(m));
    }

    auto code = [](const char* text) {
      try {
        io::parse_model(json::parse(text));
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::DomainError;
    };
    CHECK(code(R"({"b": 0.1, "sigma": 0.2, "extra": 1})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"b": 0.1})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"b": "0.1", "sigma": 0.2})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"model": "heston"})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"b": 0.1, "sigma": -0.2})") == ErrorCode::InvalidModel);
    CHECK(code(R"({"K": 0.5, "sigma_norm": 0.2})") == ErrorCode::InvalidModel);
    CHECK(code(R"({"K": [[-1, 0], [0]], "B1": [[1]], "B0": [0.1], "sigma": [[1, 0]],
                   "gamma": [[0, 1]]})") == ErrorCode::InvalidConfig);
    CHECK_THROWS_AS(io::load_model("/nonexistent/model.json"), Error);
  }
}
