#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "islands_cli_test";

int run(const std::string& args, const std::string& log = "log.txt") {
  fs::create_directories(kTmp);
  const std::string cmd = std::string(ISLANDS_CLI) + " " + args + " > " + (kTmp / log).string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("solve") {
  const fs::path out = kTmp / "solve";
  CHECK(run("solve --kind small-slope --volume 1e4 --restarts 2 --out " + out.string()) == 0);
  const json r = load(out / "result.json");
  CHECK(r["converged"] == true);
  CHECK(r["beta"].get<double>() < 1.0);
  CHECK(r["kind"] == "small-slope");
  CHECK(fs::exists(out / "profile.csv"));
  CHECK(fs::exists(out / "profile.svg"));
  const json m = load(out / "result.json.manifest.json");
  CHECK(m["config"]["volume"].get<double>() == 1e4);
  CHECK(m["config"]["restarts"] == 2);

  // Same config, same seed: identical numbers.
  const fs::path again = kTmp / "solve2";
  CHECK(run("solve --kind small-slope --volume 1e4 --restarts 2 --out " + again.string()) == 0);
  CHECK(slurp(out / "result.json") == slurp(again / "result.json"));

  const fs::path wet = kTmp / "wet";
  CHECK(run("solve --kind small-slope --volume 1 --out " + wet.string()) == 0);
  CHECK(load(wet / "result.json")["wetting"] == true);
}

TEST_CASE("config file and overrides") {
  fs::create_directories(kTmp);
  std::ofstream(kTmp / "bad.json") << "{ \"volume\": ";
  CHECK(run("solve --config " + (kTmp / "bad.json").string()) == 1);
  std::ofstream(kTmp / "unknown.json") << R"({"volume": 3, "colour": "red"})";
  CHECK(run("solve --config " + (kTmp / "unknown.json").string()) == 1);
  CHECK(run("solve --kind nonsense --volume 3") == 1);
  CHECK(run("solve --volume") == 1);
  CHECK(run("frobnicate") == 1);

  const fs::path out = kTmp / "cfg";
  std::ofstream(kTmp / "good.json") << R"({"volume": 50, "restarts": 1, "seed": 9, "out": ")" +
                                           out.string() + "\"}";
  CHECK(run("solve --config " + (kTmp / "good.json").string() + " --volume 60") == 0);
  const json m = load(out / "result.json.manifest.json");
  CHECK(m["config"]["volume"].get<double>() == 60.0);  // flag wins
  CHECK(m["config"]["seed"] == 9);
}

TEST_CASE("non-convergence exit code") {
  CHECK(run("solve --volume 1e4 --max-iters 2 --restarts 1 --out " + (kTmp / "nc").string()) == 2);
}

TEST_CASE("sweep") {
  CHECK(run("sweep --volumes ''") == 1);
  const fs::path out = kTmp / "sweep";
  CHECK(run("sweep --volumes 100,300,1000 --restarts 1 --jobs 2 --out " + out.string()) == 0);
  CHECK(slurp(out / "sweep.csv").rfind("V,E,S,total,beta,lambda,maxh,support,converged", 0) == 0);
  const json f = load(out / "fit.json");
  CHECK(f["fit_points"] == 3);
  CHECK(fs::exists(out / "loglog.svg"));
  CHECK(fs::exists(out / "sweep.csv.manifest.json"));
}

TEST_CASE("corrector") {
  CHECK(run("corrector --truncations 1") == 1);
  const fs::path a = kTmp / "corr", b = kTmp / "corr2";
  CHECK(run("corrector --out " + a.string()) == 0);
  const double cw = load(a / "corrector.json")["extrapolated"];
  CHECK(std::abs(cw - oracle::C_W) / oracle::C_W <= 0.01);
  CHECK(run("corrector --corrector-cells 512 --out " + b.string()) == 0);
  const double cw2 = load(b / "corrector.json")["extrapolated"];
  CHECK(std::abs(cw2 - cw) / cw < 0.005);
}

TEST_CASE("limit") {
  const fs::path out = kTmp / "limit";
  CHECK(run("limit --kind large-slope --out " + out.string()) == 0);
  const json j = load(out / "limit.json");
  CHECK(j["kind"] == "rectangle");
  CHECK(j["ell"].get<double>() == doctest::Approx(1.9459).epsilon(1e-3));
  CHECK(run("limit --kind exact") == 1);
}

TEST_CASE("verify") {
  CHECK(run("verify --checks volume,stability --out " + (kTmp / "v1").string(), "v1.txt") == 0);
  const std::string log = slurp(kTmp / "v1.txt");
  CHECK(log.find("PASS volume") != std::string::npos);
  CHECK(log.find("PASS stability") != std::string::npos);
  CHECK(log.find("rescaling") == std::string::npos);

  CHECK(run("verify --checks el-residual --flip-el-sign --out " + (kTmp / "v2").string(), "v2.txt") == 2);
  CHECK(slurp(kTmp / "v2.txt").find("FAIL el-residual") != std::string::npos);
  CHECK(run("verify --checks nothing") == 1);
}
