#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"
#include "tepcvsr/report.hpp"

using namespace tepcvsr;
using nlohmann::json;

namespace {

struct Solved {
  PlanningProblem p;
  IntegratedResult r;
  SecurityReport sec;
};

Solved solve(const std::string& c, const std::string& cfg) {
  PlannerOptions po;
  auto p = testing::fixture(c, cfg);
  auto r = integrated_plan(p, po);
  auto sec = verify_plan(p, r.plan, po);
  return {std::move(p), std::move(r), std::move(sec)};
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("plan document layout") {
  const auto s = solve("case3", "case3");
  const auto doc = plan_to_json(s.p, s.r.plan, s.sec, s.r.big_m);
  REQUIRE(doc.at("stages").size() == 1);
  const auto& st = doc.at("stages")[0];
  CHECK(st.at("built_lines").empty());
  REQUIRE(st.at("installed_cvsrs").size() == 1);
  CHECK(st.at("installed_cvsrs")[0].at("branch") == 2);
  CHECK(st.at("installed_cvsrs")[0].at("cost") == 1e6);
  CHECK(st.contains("costs"));
  CHECK(doc.at("audit").at("linearization").contains("passed"));
  CHECK(doc.at("audit").at("big_m").at("passed") == true);
  CHECK(doc.at("audit").at("security").at("secure") == true);
  CHECK(doc.at("objective").at("total").get<double>() == doctest::Approx(158.68e6).epsilon(1e-9));
}

TEST_CASE("serialization is deterministic") {
  const auto a = solve("garver6c", "garver6c");
  const auto b = solve("garver6c", "garver6c");
  CHECK(plan_to_json(a.p, a.r.plan, a.sec).dump(2) == plan_to_json(b.p, b.r.plan, b.sec).dump(2));
}

TEST_CASE("total recomputed from the document") {
  for (const auto& [c, cfg] : std::vector<std::pair<std::string, std::string>>{{"case3", "case3"},
                                                                               {"garver6c", "garver6c"}}) {
    CAPTURE(cfg);
    const auto s = solve(c, cfg);
    const auto doc = json::parse(plan_to_json(s.p, s.r.plan).dump());
    CHECK(testing::rel_close(recompute_total(doc), s.r.plan.total, 1e-9));
  }
}

TEST_CASE("plan document round trip") {
  const auto s = solve("garver6c", "garver6c");
  const auto doc = plan_to_json(s.p, s.r.plan);
  const auto back = plan_from_json(s.p, doc);
  REQUIRE(back.stages.size() == s.r.plan.stages.size());
  for (std::size_t i = 0; i < back.stages.size(); ++i) {
    CHECK(back.stages[i].cumulative == s.r.plan.stages[i].cumulative);
    CHECK(back.stages[i].built_lines == s.r.plan.stages[i].built_lines);
  }
  CHECK(testing::rel_close(back.total, s.r.plan.total, 1e-12));
  json bad = doc;
  bad["stages"][0]["lines_in_service"] = json::array({99});
  CHECK_THROWS_AS(plan_from_json(s.p, bad), ValidationError);
  json broken = doc;
  broken["stages"][0].erase("dispatch");
  CHECK_THROWS_AS(plan_from_json(s.p, broken), ValidationError);
}

TEST_CASE("CSV outputs") {
  const auto s = solve("case3", "case3_n1");
  const auto costs = costs_csv(s.r.plan);
  CHECK(costs.rfind("item,type,stage,undiscounted,discounted\n", 0) == 0);
  double sum = 0.0;
  std::istringstream in(costs);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) sum += std::stod(line.substr(line.rfind(',') + 1));
  CHECK(testing::rel_close(sum, s.r.plan.total, 1e-12));
  const auto sec = security_csv(s.sec);
  CHECK(sec.rfind("contingency,block,stage,total_slack_MW,worst_branch\n", 0) == 0);
  CHECK(count_lines(sec) == 1 + 4);
  PlannerOptions po;
  const auto rk = rank_contingencies(s.p, {}, po);
  const auto r = ranking_csv(s.p, rk);
  CHECK(count_lines(r) == 1 + 3);
  CHECK(r.find("\n1,2,1,3,") != std::string::npos);
  const auto radial = testing::fixture("radial3", "radial3");
  const auto isl = islanding_csv(radial.network, radial.islanding);
  CHECK(isl == "branch,from,to\n1,1,2\n2,2,3\n");
}

TEST_CASE("charts and summary") {
  const auto s = solve("case3", "case3_n1");
  const auto svg = cost_chart_svg(s.r.plan);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(slack_chart_svg(s.sec).find("</svg>") != std::string::npos);
  const auto text = summary_text(s.p, s.r.plan, 1.5);
  CHECK(text.find("Investment cost (M$)") != std::string::npos);
  CHECK(text.find("Total cost (M$)") != std::string::npos);
}
