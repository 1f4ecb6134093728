#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "../test_support.hpp"
#include "tepcvsr/cli.hpp"
#include "tepcvsr/report.hpp"

using namespace tepcvsr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tepcvsr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / fmt::format("tepcvsr-cli-{}", ::getpid()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string d(const std::string& f) { return testing::data(f).string(); }

int lines(const fs::path& p) {
  const auto s = testing::slurp(p);
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("screen case3") {
  const auto out = scratch("screen");
  const auto r = cli({"screen", "--case", d("case3.m"), "--config", d("case3_n1.json"), "--out", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(lines(out / "ranking.csv") == 1 + 3);
  CHECK(lines(out / "islanding.csv") == 1);
}

TEST_CASE("screen radial case") {
  const auto out = scratch("radial");
  const auto r = cli({"screen", "--case", d("radial3.m"), "--config", d("radial3.json"), "--out", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(lines(out / "ranking.csv") == 1);
  CHECK(lines(out / "islanding.csv") == 1 + 2);
}

TEST_CASE("input errors exit 2") {
  auto r = cli({"screen", "--case", "/nonexistent/grid.m"});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("/nonexistent/grid.m") != std::string::npos);
  r = cli({"plan", "--case", d("case3.m"), "--config", "/nonexistent/p.json"});
  CHECK(r.code == kExitInput);
  r = cli({"plan", "--case", d("case3.m"), "--mode", "fast"});
  CHECK(r.code == kExitInput);
  r = cli({"plan"});
  CHECK(r.code == kExitInput);
  r = cli({"frobnicate"});
  CHECK(r.code == kExitInput);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("backend errors exit 3") {
  ::setenv("TEPCVSR_SOLVER", "/nonexistent/solver", 1);
  const auto r = cli({"plan", "--case", d("case3.m"), "--config", d("case3.json"), "--backend", "subprocess",
                      "--out", scratch("nobackend").string()});
  ::unsetenv("TEPCVSR_SOLVER");
  CHECK(r.code == kExitBackend);
  CHECK(cli({"plan", "--case", d("case3.m"), "--backend", "gurobi"}).code == kExitBackend);
}

TEST_CASE("time limit exits 4") {
  const auto r = cli({"plan", "--case", d("case24_rts.m"), "--config", d("case24_rts.json"), "--mode", "integrated",
                      "--time-limit", "2", "--out", scratch("timelimit").string()});
  CHECK(r.code == kExitTimeLimit);
}

TEST_CASE("plan in both modes agrees on case3") {
  double totals[2] = {0, 0};
  int i = 0;
  for (const char* mode : {"integrated", "decomposed"}) {
    const auto out = scratch(std::string("plan-") + mode);
    const auto r = cli({"plan", "--case", d("case3.m"), "--config", d("case3.json"), "--mode", mode, "--out",
                        out.string(), "--plots"});
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(out / "costs.csv"));
    CHECK(fs::exists(out / "security.csv"));
    CHECK(fs::exists(out / "summary.txt"));
    CHECK(fs::exists(out / "costs.svg"));
    CHECK(fs::exists(out / "slack.svg"));
    CHECK(r.out.find("Total cost (M$)") != std::string::npos);
    totals[i++] = json::parse(testing::slurp(out / "plan.json")).at("objective").at("total").get<double>();
  }
  CHECK(testing::rel_close(totals[0], totals[1], 1e-6));
}

TEST_CASE("no-cvsr never lowers the cost") {
  const auto a = scratch("with");
  const auto b = scratch("without");
  REQUIRE(cli({"plan", "--case", d("case3.m"), "--config", d("case3.json"), "--out", a.string()}).code == 0);
  REQUIRE(cli({"plan", "--case", d("case3.m"), "--config", d("case3.json"), "--no-cvsr", "--out", b.string()}).code == 0);
  const double with = json::parse(testing::slurp(a / "plan.json")).at("objective").at("total").get<double>();
  const auto doc = json::parse(testing::slurp(b / "plan.json"));
  const double without = doc.at("objective").at("total").get<double>();
  CHECK(without >= with - 1e-6);
  CHECK(doc.at("stages")[0].at("installed_cvsrs").empty());
}

TEST_CASE("identical runs write identical plan documents") {
  const auto a = scratch("det1");
  const auto b = scratch("det2");
  for (const auto& out : {a, b}) {
    REQUIRE(cli({"plan", "--case", d("garver6c.m"), "--config", d("garver6c.json"), "--mode", "decomposed", "--out",
                 out.string()}).code == 0);
  }
  CHECK(testing::slurp(a / "plan.json") == testing::slurp(b / "plan.json"));
}

TEST_CASE("verify") {
  const auto out = scratch("verify");
  REQUIRE(cli({"plan", "--case", d("corridor4.m"), "--config", d("corridor4.json"), "--out", out.string()}).code == 0);
  auto r = cli({"verify", "--case", d("corridor4.m"), "--config", d("corridor4.json"), "--plan",
                (out / "plan.json").string(), "--out", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(lines(out / "security.csv") == 1 + 1 + 4);
  // Strip the builds: the circuit 2 outage overloads circuit 1 again.
  auto doc = json::parse(testing::slurp(out / "plan.json"));
  for (auto& s : doc["stages"]) {
    s["lines_in_service"] = json::array();
    s["cvsrs_in_service"] = json::array();
  }
  std::ofstream(out / "bare.json") << doc.dump();
  r = cli({"verify", "--case", d("corridor4.m"), "--config", d("corridor4.json"), "--plan",
           (out / "bare.json").string(), "--out", out.string()});
  CHECK(r.code == kExitCheckFailed);
  r = cli({"verify", "--case", d("corridor4.m"), "--config", d("corridor4.json"), "--plan", "/nonexistent.json"});
  CHECK(r.code == kExitInput);
}

TEST_CASE("oracle command") {
  const auto out = scratch("oracle");
  auto r = cli({"oracle", "--case", d("case3.m"), "--config", d("case3.json"), "--out", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("match") != std::string::npos);
  CHECK(lines(out / "oracle.csv") == 1 + 4);
  r = cli({"oracle", "--case", d("case3.m"), "--config", d("case3.json"), "--override-bigm", "0.01", "--out",
           out.string()});
  CHECK(r.code != kExitOk);
  CHECK(r.code == kExitCheckFailed);
  const auto cfg = out / "big.json";
  std::ofstream(cfg) << json{{"cvsr_sites", "all_lines"}, {"contingencies", "none"}}.dump();
  r = cli({"oracle", "--case", d("case24_rts.m"), "--config", cfg.string(), "--out", out.string()});
  CHECK(r.code == kExitInput);
}

TEST_CASE("export writes LP and MPS files") {
  const auto out = scratch("export");
  const auto r = cli({"export", "--case", d("case3.m"), "--config", d("case3.json"), "--out", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(testing::slurp(out / "model.lp").find("alpha_k4_t1") != std::string::npos);
  CHECK(testing::slurp(out / "model.mps").find("delta_k2_t1") != std::string::npos);
}

TEST_CASE("process exit codes") {
  const std::string exe = TEPCVSR_CLI;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(exe + " screen --case /nonexistent.m") == 2);
  CHECK(status(exe + " --help") == 0);
  CHECK(status(fmt::format("{} plan --case {} --config {} --out {}", exe, d("case3.m"), d("case3.json"),
                           scratch("proc").string())) == 0);
  CHECK(status(fmt::format("{} plan --case {} --config {} --backend subprocess --out {}", exe, d("case3.m"),
                           d("case3.json"), scratch("proc-sub").string())) == 0);
}
