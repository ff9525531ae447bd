#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "crb/io.hpp"
#include "crb/report.hpp"

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / ("crb_cli_out_" + std::to_string(++counter) + ".txt");
  const fs::path err = dir / ("crb_cli_err_" + std::to_string(counter) + ".txt");
  const std::string cmd = std::string(CRB_CLI_PATH) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult result{-1, slurp(out), slurp(err)};
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  fs::remove(out);
  fs::remove(err);
  return result;
}

std::string sample(const std::string& name) {
  return std::string(CRB_SAMPLES_DIR) + "/" + name;
}

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

double json_result(const nlohmann::ordered_json& report, const std::string& name,
                   const std::string& field = "value") {
  for (const auto& r : report.at("results"))
    if (r.at("name").get<std::string>().find(name) != std::string::npos)
      return r.at(field).get<double>();
  FAIL("no result entry matching '" + name + "'");
  return 0.0;
}

}  // namespace

TEST_CASE("bayes on the sine model reports the factor-four phase penalty", "[cli]") {
  const CliResult r =
      run_cli("bayes --model " + sample("sine.json") + " --interest phi --other omega --output json");
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::ordered_json::parse(r.out);
  REQUIRE(json_result(report, "factor CRB(omega)") == Catch::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("chain factors sum to the joint bound", "[cli]") {
  const CliResult r =
      run_cli("chain --matrix " + sample("matrix.json") + " --order beta,alpha --output json");
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::ordered_json::parse(r.out);
  const double f1 = json_result(report, "CRB(beta|alpha)", "log_value");
  const double f2 = json_result(report, "CRB(alpha)", "log_value");
  const double joint = json_result(report, "CRB(alpha,beta)", "log_value");
  REQUIRE(f1 + f2 == Catch::Approx(joint).margin(1e-12));
}

TEST_CASE("orthogonal designs report unit inflation", "[cli]") {
  const CliResult r =
      run_cli("lmm --config " + sample("lmm_orthogonal.json") + " --inflation --output json");
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::ordered_json::parse(r.out);
  REQUIRE(json_result(report, "inflation") == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("json reports re-read to identical log values", "[cli]") {
  const CliResult r =
      run_cli("marginal --matrix " + sample("matrix.json") + " --interest alpha --output json");
  REQUIRE(r.exit_code == 0);
  const crb::Report report = crb::Report::from_json(nlohmann::ordered_json::parse(r.out));
  REQUIRE(report.entries.size() == 1);
  // the log value survives print + parse bit-exactly
  const crb::MatrixFile file = crb::load_matrix_file(sample("matrix.json"));
  const double expected =
      crb::crb_marginal(file.fisher, file.partition, "alpha").log_value;
  REQUIRE(*report.entries[0].log_value == expected);
}

TEST_CASE("text and json renderings agree to 12 significant digits", "[cli]") {
  const CliResult text =
      run_cli("bayes --matrix " + sample("matrix.json") + " --interest alpha --other beta");
  const CliResult json =
      run_cli("bayes --matrix " + sample("matrix.json") +
              " --interest alpha --other beta --output json");
  REQUIRE(text.exit_code == 0);
  REQUIRE(json.exit_code == 0);
  const auto report = nlohmann::ordered_json::parse(json.out);
  for (const auto& entry : report.at("results")) {
    if (!entry.contains("log_value")) continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", entry.at("log_value").get<double>());
    REQUIRE(text.out.find(std::string(buf).substr(0, 12)) != std::string::npos);
  }
}

TEST_CASE("csv output is one row per quantity", "[cli]") {
  const CliResult r = run_cli("sine --config " + sample("sine.json") + " --output csv");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.rfind("quantity,value,log_value\n", 0) == 0);
  REQUIRE(r.out.find("\"inflation A\",4,") != std::string::npos);
}

TEST_CASE("fim output feeds back into the matrix commands", "[cli]") {
  static int counter = 0;
  const fs::path fim_path =
      fs::temp_directory_path() / ("crb_fim_" + std::to_string(++counter) + ".json");
  const CliResult fim = run_cli("fim --config " + sample("sine.json") +
                                " --method gaussian --include-v --output json");
  REQUIRE(fim.exit_code == 0);
  std::ofstream(fim_path) << fim.out;

  const CliResult marginal =
      run_cli("marginal --matrix " + fim_path.string() + " --interest omega --output json");
  REQUIRE(marginal.exit_code == 0);
  const auto report = nlohmann::ordered_json::parse(marginal.out);
  // exact finite-n bound sits within a percent of the closed dominant form
  const double dominant = (2.0 * 0.01 / std::pow(1024.0, 3)) * 12.0;
  REQUIRE(json_result(report, "CRB(omega)") ==
          Catch::Approx(dominant).epsilon(0.01));
  fs::remove(fim_path);
}

TEST_CASE("montecarlo fim subcommand reports standard errors", "[cli]") {
  const fs::path cfg = write_temp("crb_cli_gaussmean.json",
                                  R"({"model": "custom-loglik", "name": "gaussian-mean",
                                      "n": 10, "v": 1.0, "theta": [0.25]})");
  const CliResult r =
      run_cli("fim --config " + cfg.string() + " --method score --trials 5000 --output json");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::ordered_json::parse(r.out);
  REQUIRE(j.contains("standard_error"));
  const double est = j["matrix"][0][0].get<double>();
  const double se = j["standard_error"][0][0].get<double>();
  REQUIRE(std::abs(est - 10.0) <= 3.0 * se);
  fs::remove(cfg);
}

TEST_CASE("config errors exit with code 2", "[cli]") {
  REQUIRE(run_cli("marginal --matrix /no/such/file.json --interest a").exit_code == 2);
  REQUIRE(run_cli("marginal --matrix " + sample("matrix.json") + " --interest nope").exit_code == 2);
  const CliResult bad = run_cli("joint --blocks a");
  REQUIRE(bad.exit_code == 2);  // neither --matrix nor --model
  REQUIRE_FALSE(bad.err.empty());
}

TEST_CASE("numerical failures exit with code 3", "[cli]") {
  const fs::path indef = write_temp("crb_cli_indef.json",
                                    R"({"matrix": [[1.0, 2.0], [2.0, 1.0]]})");
  const CliResult r = run_cli("marginal --matrix " + indef.string() + " --interest p0");
  REQUIRE(r.exit_code == 3);
  REQUIRE(r.err.find("positive definite") != std::string::npos);
  fs::remove(indef);
}

TEST_CASE("bound violations exit with code 4", "[cli]") {
  // starved trial budget with near-zero slack: sampling dips below the bound
  const CliResult r = run_cli("validate --config " + sample("lmm.json") +
                              " --trials 100 --seed 0 --slack 0.0001");
  REQUIRE(r.exit_code == 4);
  REQUIRE(r.out.find("Violates") != std::string::npos);
}

TEST_CASE("validate passes at default settings", "[cli]") {
  const CliResult r = run_cli("validate --config " + sample("lmm.json") +
                              " --trials 20000 --seed 1");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("overall = Attains") != std::string::npos);
}

TEST_CASE("help exits cleanly", "[cli]") {
  REQUIRE(run_cli("--help").exit_code == 0);
  REQUIRE(run_cli("bayes --help").exit_code == 0);
}
