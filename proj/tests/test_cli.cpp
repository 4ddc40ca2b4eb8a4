#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::string& work_dir() {
  static const std::string dir = [] {
    char tmpl[] = "/tmp/shifteq_cli_XXXXXX";
    const char* d = mkdtemp(tmpl);
    REQUIRE(d != nullptr);
    return std::string(d);
  }();
  return dir;
}

int run_cli(const std::string& args, const std::string& env_prefix = {}) {
  const std::string cmd = env_prefix + " \"" + SHIFTEQ_CLI_PATH + "\" " + args;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_file(const std::string& name, const std::string& text) {
  const std::string path = work_dir() + "/" + name;
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("audit runs the requested suites and writes the report") {
  const std::string report = work_dir() + "/rep.json";
  const std::string cfg = write_file("ok.json", R"({
    "suites": ["lemma1", "abspe_counterexample"],
    "trials": 2,
    "output": {"path": ")" + report + R"("}
  })");
  CHECK(run_cli("audit --config " + cfg + " > " + work_dir() + "/audit.out") == 0);
  const std::string body = slurp(report);
  CHECK(body.find("\"suite\": \"lemma1\"") != std::string::npos);
  CHECK(body.find("\"suite\": \"abspe_counterexample\"") != std::string::npos);
  CHECK(slurp(work_dir() + "/audit.out").find("audit: OK") != std::string::npos);
}

TEST_CASE("unknown suites are a config error") {
  const std::string cfg = write_file("bad_suite.json", R"({"suites": ["made_up"]})");
  CHECK(run_cli("audit --config " + cfg + " 2> /dev/null") == 2);
}

TEST_CASE("an impossible threshold turns the exit code to failure") {
  // residuals of a few dozen are genuine failures, but not above 1e9
  const std::string cfg = write_file("floor.json", R"({
    "suites": ["gsa_counterexample"],
    "trials": 2,
    "tolerances": {"negative_floor": 1e9}
  })");
  CHECK(run_cli("audit --config " + cfg + " > /dev/null 2> /dev/null") == 1);
}

TEST_CASE("missing config file exits with a config error") {
  CHECK(run_cli("audit --config " + work_dir() + "/missing.json 2> /dev/null") == 2);
}

TEST_CASE("csv format override lands in the report file") {
  const std::string report = work_dir() + "/rep.csv";
  const std::string cfg = write_file("csv.json", R"({"suites": ["lemma1"], "trials": 2})");
  CHECK(run_cli("audit --config " + cfg + " --out " + report +
                " --format csv > /dev/null") == 0);
  const std::string body = slurp(report);
  CHECK(body.rfind("suite,op_name,input_seed,passed,residual,matched_dy,matched_dx", 0) == 0);
}

TEST_CASE("environment seed applies when the config leaves it out") {
  const std::string report = work_dir() + "/seeded.json";
  const std::string cfg = write_file("no_seed.json", R"({
    "suites": ["lemma1"],
    "trials": 2,
    "output": {"path": ")" + report + R"("}
  })");
  CHECK(run_cli("audit --config " + cfg + " > /dev/null", "SHIFTEQ_SEED=99") == 0);
  CHECK(slurp(report).find("\"seed\": \"99\"") != std::string::npos);

  // a config seed wins over the environment
  const std::string cfg2 = write_file("with_seed.json", R"({
    "suites": ["lemma1"],
    "trials": 2,
    "seed": 4,
    "output": {"path": ")" + report + R"("}
  })");
  CHECK(run_cli("audit --config " + cfg2 + " > /dev/null", "SHIFTEQ_SEED=99") == 0);
  CHECK(slurp(report).find("\"seed\": \"4\"") != std::string::npos);
}

TEST_CASE("demo prints residuals for baseline and anchored variants") {
  const std::string out = work_dir() + "/demo.out";
  CHECK(run_cli("demo --variant vit_poly --seed 5 --shift 1 2 > " + out) == 0);
  const std::string body = slurp(out);
  CHECK(body.find("max residual") != std::string::npos);
  CHECK(body.find("vit_poly") != std::string::npos);
  CHECK(body.find("consistent") != std::string::npos);
}

TEST_CASE("bench prints per-size timings") {
  const std::string out = work_dir() + "/bench.out";
  CHECK(run_cli("bench --sizes 8 > " + out) == 0);
  CHECK(slurp(out).find("anchor_ms") != std::string::npos);
  CHECK(run_cli("bench --sizes 7 2> /dev/null > /dev/null") == 2);
}

TEST_CASE("help exits cleanly") {
  CHECK(run_cli("--help > /dev/null") == 0);
}
