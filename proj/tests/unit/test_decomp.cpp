#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"

using namespace tepcvsr;
using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, std::string>> kSmall = {
    {"case3", "case3"}, {"case3", "case3_n1"}, {"corridor4", "corridor4"}, {"ring3", "ring3"}, {"garver6c", "garver6c"}};

json corridor_cfg(json extra = json::object()) {
  json cfg{{"blocks", json::array({json{{"name", "flat"}, {"scale", 1.0}, {"hours", 8760}}})},
           {"stages", json::array({json{{"years", 5}}})},
           {"candidate_lines", json::array({json{{"parallel_to", 1}, {"cost", 30e6}}})},
           {"cvsr_sites", json::array({json{{"branch", 1}, {"cost", 2e6}, {"range_fraction", 0.8}}})}};
  for (auto& [k, v] : extra.items()) cfg[k] = v;
  return cfg;
}

}  // namespace

TEST_CASE("ranking of case3 by outage OPF cost") {
  const auto p = testing::fixture("case3", "case3_n1");
  PlannerOptions po;
  const auto r = rank_contingencies(p, {}, po);
  REQUIRE(r.entries.size() == 3);
  // Losing 1-3 leaves the 66 MW detour: 66*10 + 134*50. The others leave 110 MW on 1-3: 110*10 + 90*50.
  CHECK(r.entries[0].branch == 2);
  CHECK(r.entries[0].cost == doctest::Approx(7360.0).epsilon(1e-9));
  CHECK(r.entries[1].branch == 1);
  CHECK(r.entries[2].branch == 3);
  CHECK(r.entries[1].cost == doctest::Approx(5600.0).epsilon(1e-9));
  CHECK(r.entries[2].cost == doctest::Approx(5600.0).epsilon(1e-9));
  CHECK(r.entries[1].loading == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(critical_contingencies(p, r, po) == std::vector<int>{2, 1});
  po.cc_count = 1;
  CHECK(critical_contingencies(p, r, po) == std::vector<int>{2});
}

TEST_CASE("security sweep measures the corridor overload") {
  const auto p = testing::fixture_with("corridor4", corridor_cfg());
  PlannerOptions po;
  DispatchSnapshot d;
  d.pg[{1, 1}] = {{1, 180.0}};
  const auto rep = check_security(p, {1}, {BuildSet{}}, d, po);
  CHECK(rep.entries.size() == 1 + p.contingencies.size());
  REQUIRE(rep.worst.has_value());
  CHECK(rep.worst->contingency == 2);
  CHECK(rep.worst->worst_branch == 1);
  CHECK(rep.max_slack == doctest::Approx(20.0).epsilon(1e-7));
  CHECK_FALSE(rep.secure());
  // The reactor at x = 0.18 leaves 180 * 0.2 / 0.38 MW on circuit 1.
  const auto fixed = check_security(p, {1}, {BuildSet{{}, {1}}}, d, po);
  CHECK(fixed.secure());
  CHECK(fixed.audit.passed());
  const auto line = check_security(p, {1}, {BuildSet{{5}, {}}}, d, po);
  CHECK(line.secure());
}

TEST_CASE("parallel sweep is identical to the serial one") {
  const auto p = testing::fixture("case24_rts", "case24_rts");
  PlannerOptions serial, par;
  par.jobs = 4;
  const auto plan = iterative_plan(p, serial).plan;
  const auto a = verify_plan(p, plan, serial);
  const auto b = verify_plan(p, plan, par);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].contingency == b.entries[i].contingency);
    CHECK(a.entries[i].total_slack == b.entries[i].total_slack);
  }
  CHECK(a.max_slack == b.max_slack);
}

TEST_CASE("repair loop buys the cheap reactor") {
  const auto p = testing::fixture_with("corridor4", corridor_cfg({{"critical_contingencies", 0}}));
  PlannerOptions po;
  const auto r = iterative_plan(p, po);
  REQUIRE(r.log.size() == 1);
  CHECK(r.log[0].critical.empty());
  CHECK(r.log[0].repair_iterations >= 1);
  CHECK(r.plan.final_builds() == BuildSet{{}, {1}});
  CHECK(verify_plan(p, r.plan, po).secure());
}

TEST_CASE("repair failures") {
  PlannerOptions po;
  CHECK_THROWS_AS(testing::fixture_with("corridor4", corridor_cfg({{"max_repair_iterations", 0}})), ValidationError);
  auto cfg = json::parse(testing::slurp(testing::data("case24_rts.json")));
  cfg["redispatchable_generators"] = "none";
  cfg["critical_contingencies"] = 0;
  cfg["max_repair_iterations"] = 1;
  const auto capped = testing::fixture_with("case24_rts", cfg);
  CHECK_THROWS_AS(iterative_plan(capped, po), ModelError);
  json bare{{"blocks", json::array({json{{"name", "flat"}, {"scale", 1.0}, {"hours", 8760}}})},
            {"critical_contingencies", 0}};
  const auto hopeless = testing::fixture_with("corridor4", bare);
  CHECK_THROWS_AS(iterative_plan(hopeless, po), ValidationError);
}

TEST_CASE("decomposed never beats integrated") {
  PlannerOptions po;
  for (const auto& [c, cfg] : kSmall) {
    CAPTURE(cfg);
    const auto p = testing::fixture(c, cfg);
    const auto in = integrated_plan(p, po);
    const auto de = iterative_plan(p, po);
    CHECK(de.plan.total >= in.plan.total - 1e-6 * std::max(1.0, in.plan.total));
    CHECK(in.big_m.passed());
    CHECK(verify_plan(p, de.plan, po).secure());
    CHECK(verify_plan(p, in.plan, po).secure());
  }
}

TEST_CASE("case3 decomposes exactly") {
  PlannerOptions po;
  const auto p = testing::fixture("case3", "case3");
  CHECK(testing::rel_close(iterative_plan(p, po).plan.total, integrated_plan(p, po).plan.total, 1e-6));
}

TEST_CASE("oracle agrees with the MILP") {
  PlannerOptions po;
  for (const auto& [c, cfg] : kSmall) {
    CAPTURE(cfg);
    const auto p = testing::fixture(c, cfg);
    const auto oracle = enumerate_plans_oracle(p, po);
    REQUIRE(oracle.best.has_value());
    CHECK(testing::rel_close(oracle.best_objective, integrated_plan(p, po).plan.total, 1e-6));
  }
}

TEST_CASE("oracle without candidates is a dispatch-only OPF") {
  PlannerOptions po;
  const auto p = testing::fixture_with("ring3", json{{"blocks", json::array({json{{"scale", 1.0}, {"hours", 8760}}})},
                                               {"contingencies", "none"}});
  const auto oracle = enumerate_plans_oracle(p, po);
  REQUIRE(oracle.trajectories.size() == 1);
  // 90 MW at 25 $/MWh for 43800 h
  CHECK(oracle.best_objective == doctest::Approx(90.0 * 25 * 43800).epsilon(1e-9));
  CHECK(integrated_plan(p, po).plan.total == doctest::Approx(oracle.best_objective).epsilon(1e-9));
}

TEST_CASE("oracle cap") {
  PlannerOptions po;
  const auto p = testing::fixture_with("case24_rts", json{{"cvsr_sites", "all_lines"}, {"contingencies", "none"}});
  CHECK_THROWS_AS(enumerate_plans_oracle(p, po), ValidationError);
}

TEST_CASE("a corrupted big-M cuts the optimum of case3") {
  PlannerOptions po;
  const auto p = testing::fixture("case3", "case3");
  const auto oracle = enumerate_plans_oracle(p, po);
  po.override_m_k = 0.01;
  const auto bad = build_model(p, [&] {
    auto o = integrated_options(p);
    o.override_m_k = 0.01;
    return o;
  }());
  const auto r = po.run(bad);
  REQUIRE(r.optimal());
  CHECK_FALSE(testing::rel_close(r.objective, oracle.best_objective, 1e-6));
  CHECK(r.objective > oracle.best_objective);
}
