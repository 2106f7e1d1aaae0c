#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DTPC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WEXITSTATUS(raw);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("dtpc_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("capacity command: reruns are byte-identical, outputs complete") {
  fs::path a = fresh_dir("cap_a"), b = fresh_dir("cap_b");
  const std::string args = "capacity --lambda0 1 --pmax 2 --pavg 2 --seed 7 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "capacity.json") == slurp(b / "capacity.json"));
  CHECK(slurp(a / "support.csv") == slurp(b / "support.csv"));
  CHECK(fs::exists(a / "capacity.meta.json"));

  nlohmann::json j = nlohmann::json::parse(slurp(a / "capacity.json"));
  CHECK(j.at("command") == "capacity");
  CHECK(j.at("root_seed") == 7);
  CHECK(j.at("config").at("lambda0") == 1.0);
  CHECK(j.at("result").at("certified") == true);
  CHECK(j.at("result").at("kkt_max_violation").get<double>() <= 1e-4);
  CHECK(j.contains("version"));
}

TEST_CASE("sid command reports the dichotomy triple deterministically") {
  fs::path a = fresh_dir("sid_a"), b = fresh_dir("sid_b");
  const std::string args = "sid --lambda-b 1 --lambda-e 10 --pmax 2 --pavg 2 --seed 3 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "sid.json") == slurp(b / "sid.json"));

  nlohmann::json j = nlohmann::json::parse(slurp(a / "sid.json"));
  const double c_main = j.at("result").at("c_main").get<double>();
  const double c_sid = j.at("result").at("c_sid").get<double>();
  CHECK(j.at("result").at("secrecy_positive") == true);
  CHECK(c_main == c_sid);
}

TEST_CASE("sid command rejects a non-degraded pair") {
  fs::path a = fresh_dir("sid_bad");
  CHECK(run_cli("sid --lambda-b 1 --lambda-e 0.5 --pmax 2 --pavg 2 --out " + a.string()) == 1);
}

TEST_CASE("idsim command: deterministic summary and trial trace") {
  fs::path a = fresh_dir("id_a"), b = fresh_dir("id_b");
  const std::string args =
      "idsim --n 9 --q 5 --d 1 --trials 400 --lambda1 0.3 --lambda2 0.4 --seed 11 "
      "--trace-csv --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "idsim.json") == slurp(b / "idsim.json"));
  CHECK(slurp(a / "trials.csv") == slurp(b / "trials.csv"));

  nlohmann::json j = nlohmann::json::parse(slurp(a / "idsim.json"));
  CHECK(j.at("result").at("trials") == 400);
  CHECK(j.at("result").contains("second_kind_rate"));
  CHECK(j.at("result").at("rate_of").get<double>() > 0.0);
}

TEST_CASE("leakage command writes the report and the event audit") {
  fs::path a = fresh_dir("leak_a"), b = fresh_dir("leak_b");
  const std::string args = "leakage --lambda-e 8 --messages 3 --n 2 --seed 5 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "leakage.json") == slurp(b / "leakage.json"));
  CHECK(slurp(a / "audit.csv") == slurp(b / "audit.csv"));

  nlohmann::json j = nlohmann::json::parse(slurp(a / "leakage.json"));
  CHECK(j.at("result").at("path") == "exact");
  CHECK(j.at("result").at("exact_mi_bits").get<double>() <=
        j.at("result").at("chain_rule_bound_bits").get<double>() + 1e-9);
}

TEST_CASE("converse command: table rows respect the bound, reruns identical") {
  fs::path a = fresh_dir("conv_a"), b = fresh_dir("conv_b");
  const std::string args = "converse --n 10,50 --nu 0.1 --samples 5000 --seed 9 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "converse.json") == slurp(b / "converse.json"));
  CHECK(slurp(a / "converse.csv") == slurp(b / "converse.csv"));

  nlohmann::json j = nlohmann::json::parse(slurp(a / "converse.json"));
  for (const auto& row : j.at("result").at("rows"))
    CHECK(row.at("empirical_tail").get<double>() <= row.at("chebyshev_bound").get<double>());
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("capacity --pmax 5") == 2);  // missing lambda0/pavg
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("capacity --lambda0 x --pmax 5 --pavg 5") == 2);
}

TEST_CASE("config file feeds parameters, flags win") {
  fs::path dir = fresh_dir("cfg");
  fs::path cfg = dir / "experiment.json";
  {
    std::ofstream out(cfg);
    out << R"({"lambda0": 2.0, "p_max": 1.0, "p_avg": 1.0})";
  }
  REQUIRE(run_cli("capacity --config " + cfg.string() + " --out " + dir.string()) == 0);
  nlohmann::json from_file = nlohmann::json::parse(slurp(dir / "capacity.json"));
  CHECK(from_file.at("config").at("lambda0") == 2.0);
  CHECK(from_file.at("config").at("p_max") == 1.0);

  REQUIRE(run_cli("capacity --config " + cfg.string() + " --lambda0 1 --out " + dir.string()) ==
          0);
  nlohmann::json overridden = nlohmann::json::parse(slurp(dir / "capacity.json"));
  CHECK(overridden.at("config").at("lambda0") == 1.0);  // flag beats the file
  CHECK(overridden.at("config").at("p_max") == 1.0);    // file beats the default
}
