#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>

#include "crb/io.hpp"
#include "crb/report.hpp"

using crb::Report;
using crb::ReportEntry;

namespace {

std::string digits12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Report sample_report() {
  Report r;
  r.command = "bayes";
  r.context.emplace_back("matrix", "J.json");
  crb::CrbValue v;
  v.log_value = -1.2345678901234567;
  v.interest = {"alpha"};
  v.dimension = 2;
  r.add_crb("CRB(alpha)", v);
  r.add_scalar("factor", 4.0 / 3.0);
  r.add_text("verdict", "Attains");
  return r;
}

}  // namespace

TEST_CASE("json reports round-trip bit-exactly", "[report]") {
  const Report r = sample_report();
  const std::string dumped = r.to_json().dump(2);
  const Report back = Report::from_json(nlohmann::ordered_json::parse(dumped));
  REQUIRE(back.command == r.command);
  REQUIRE(back.entries.size() == r.entries.size());
  REQUIRE(back.entries[0].log_value == r.entries[0].log_value);  // bitwise
  REQUIRE(back.entries[0].value == r.entries[0].value);
  REQUIRE(back.entries[1].value == r.entries[1].value);
  REQUIRE(back.entries[2].text == r.entries[2].text);
}

TEST_CASE("text and json agree to 12 significant digits", "[report]") {
  const Report r = sample_report();
  const std::string text = r.to_text();
  const auto j = r.to_json();
  const double log_json = j["results"][0]["log_value"].get<double>();
  const std::string log_12 = digits12(log_json);
  // the text rendering carries at least those 12 digits
  REQUIRE(text.find(log_12.substr(0, 12)) != std::string::npos);
  const double factor_json = j["results"][1]["value"].get<double>();
  REQUIRE(text.find(digits12(factor_json).substr(0, 12)) != std::string::npos);
}

TEST_CASE("linear values beyond exp(700) print as overflow", "[report]") {
  Report r;
  r.command = "joint";
  crb::CrbValue huge;
  huge.log_value = 800.0;
  huge.interest = {"a"};
  huge.dimension = 1;
  r.add_crb("CRB(a)", huge);
  REQUIRE(r.to_text().find("overflow") != std::string::npos);
  REQUIRE(r.to_csv().find("overflow") != std::string::npos);
  REQUIRE(r.to_json()["results"][0]["value"] == "overflow");
  REQUIRE(r.to_json()["results"][0]["log_value"].get<double>() == 800.0);
}

TEST_CASE("csv emits one row per quantity", "[report]") {
  const Report r = sample_report();
  const std::string csv = r.to_csv();
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "quantity,value,log_value");
  int rows = 0;
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 3);
}

TEST_CASE("matrix files load and serialize back", "[report]") {
  const std::string doc = R"({
    "matrix": [[2.0, 1.0], [1.0, 2.0]],
    "labels": ["a", "b"],
    "partition": {"alpha": [0], "beta": [1]}
  })";
  const crb::MatrixFile file = crb::matrix_from_json(nlohmann::ordered_json::parse(doc));
  REQUIRE(file.fisher.size() == 2);
  REQUIRE(file.partition.blocks()[0].name == "alpha");
  const auto round = crb::matrix_from_json(crb::fisher_to_json(file.fisher, file.partition));
  REQUIRE(round.fisher.entries() == file.fisher.entries());

  // defaults: labels p0.., scalar partition
  const auto bare =
      crb::matrix_from_json(nlohmann::ordered_json::parse(R"({"matrix": [[1.0]]})"));
  REQUIRE(bare.fisher.labels() == std::vector<std::string>{"p0"});
  REQUIRE(bare.partition.blocks().size() == 1);
}

TEST_CASE("config errors are reported as such", "[report]") {
  REQUIRE_THROWS_AS(crb::matrix_from_json(nlohmann::ordered_json::parse(R"({"rows": []})")),
                    crb::ConfigError);
  REQUIRE_THROWS_AS(
      crb::model_from_json(nlohmann::ordered_json::parse(R"({"model": "warp"})")),
      crb::ConfigError);
  REQUIRE_THROWS_AS(crb::load_matrix_file("/nonexistent/path.json"), crb::ConfigError);
}

TEST_CASE("model configs parse into specs", "[report]") {
  const auto sine = crb::model_from_json(nlohmann::ordered_json::parse(
      R"({"model": "sine", "A": 0.0, "B": 1.0, "C": 0.5, "omega": 0.9, "v": 0.01, "n": 256})"));
  REQUIRE(std::holds_alternative<crb::SineSpec>(sine.model));
  REQUIRE(std::get<crb::SineSpec>(sine.model).samples == 256);

  const auto lmm = crb::model_from_json(nlohmann::ordered_json::parse(
      R"({"model": "lmm", "A": [[1],[0],[0]], "B": [[1],[1],[0]], "v": 1.0})"));
  REQUIRE(std::holds_alternative<crb::LmmSpec>(lmm.model));

  const auto custom = crb::model_from_json(nlohmann::ordered_json::parse(
      R"({"model": "custom-loglik", "name": "gaussian-mean", "n": 10, "v": 1.0})"));
  REQUIRE(std::holds_alternative<crb::CustomLoglikConfig>(custom.model));
}
