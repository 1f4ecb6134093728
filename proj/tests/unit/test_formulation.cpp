#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"
#include "tepcvsr/solver.hpp"

using namespace tepcvsr;
using nlohmann::json;

namespace {

// One CVSR site on an x = 0.1 branch with the angle difference pinned; returns the w range (MW).
std::pair<double, double> w_range(double theta, int delta, int n, double range = 0.2) {
  CvsrSite site;
  site.branch = 1;
  site.x_v_max = range * 0.1;
  const auto r = cvsr_susceptance_bounds(0.1, 0.0, site.x_v_max);
  site.b_v_min = r.b_min;
  site.b_v_max = r.b_max;
  const double base = 100.0;
  const double M = base * big_m_values(10.0, r.b_min).m_k;
  std::pair<double, double> out;
  for (double sense : {1.0, -1.0}) {
    MilpModel m;
    const int w = m.add_variable(Variable{"w", VarKind::Continuous, -1e6, 1e6, sense});
    const int z = m.add_variable(Variable{"z", VarKind::Continuous, -1e6, 1e6, 0.0});
    const int y = m.add_variable(Variable{"y", VarKind::Binary, 0.0, 1.0, 0.0});
    const int d = m.add_variable(Variable{"d", VarKind::Binary, double(delta), double(delta), 0.0});
    const int th = m.add_variable(Variable{"th", VarKind::Continuous, theta, theta, 0.0});
    const auto rows = emit_reformulation(m, site, n, {w, z, y, d, {{th, 1.0}}}, M, base, "k1");
    REQUIRE(rows.size() == 8);
    SolveRequest req;
    req.model = &m;
    const auto res = HighsBackend().solve(req);
    if (!res.optimal()) return {std::nan(""), std::nan("")};
    (sense > 0 ? out.first : out.second) = res.values[static_cast<std::size_t>(w)];
  }
  return out;
}

}  // namespace

TEST_CASE("reformulation admits exactly the CVSR flow interval") {
  const double bmin = -1.0 / 0.6 * 100.0;  // MW per rad
  for (double theta : {0.3, -0.2, 0.0, 1.0}) {
    CAPTURE(theta);
    auto [lo, hi] = w_range(theta, 1, 1);
    const double a = std::min(bmin * theta, 0.0), b = std::max(bmin * theta, 0.0);
    CHECK(lo == doctest::Approx(a).epsilon(1e-7));
    CHECK(hi == doctest::Approx(b).epsilon(1e-7));
    auto off = w_range(theta, 0, 1);
    CHECK(std::abs(off.first) <= 1e-7);
    CHECK(std::abs(off.second) <= 1e-7);
    auto out = w_range(theta, 1, 0);
    CHECK(std::abs(out.first) <= 1e-7);
    CHECK(std::abs(out.second) <= 1e-7);
  }
  // In service, the linking rows keep |theta| within theta_max.
  CHECK(std::isnan(w_range(1.2, 1, 1).first));
  CHECK(std::isnan(w_range(-1.2, 0, 1).first));
  CHECK_FALSE(std::isnan(w_range(1.2, 1, 0).first));
}

TEST_CASE("integrated case3 model layout") {
  const auto p = testing::fixture("case3", "case3");
  const auto m = build_integrated_model(p);
  CHECK(m.num_binaries() == 3);  // alpha, delta, y in the one base state
  for (const char* row : {"ra1_k2_c0_b1_t1", "rb2_k2_c0_b1_t1", "rz1_k2_c0_b1_t1", "rl2_k2_c0_b1_t1",
                          "bal_i3_c0_b1_t1", "fe_k1_c0_b1_t1", "fv_k2_c0_b1_t1", "fc1_k4_c0_b1_t1",
                          "tc2_k4_c0_b1_t1"}) {
    CAPTURE(row);
    bool found = false;
    for (const auto& c : m.constraints()) found = found || c.name == row;
    CHECK(found);
  }
  // Investment enters weighted by the stage-1 discount factor of 1.
  CHECK(m.variable(*m.find("alpha_k4_t1")).objective == 80e6);
  CHECK(m.variable(*m.find("delta_k2_t1")).objective == 1e6);
  // Operating weight: 8760 h * 5 years * $/MWh
  CHECK(m.variable(*m.find("Pg_n2_c0_b1_t1")).objective == doctest::Approx(8760.0 * 5 * 50));
  CHECK(flow_coefficient(p, 10.0) == 1000.0);
  CHECK(cvsr_big_m_mw(p, p.cvsr_sites[0]) == doctest::Approx(100.0 / 0.6 * kThetaMax));
  CHECK(cvsr_big_m_mw(p, p.cvsr_sites[0], 0.01) == doctest::Approx(1.0));
}

TEST_CASE("multi-stage models carry monotonicity rows and incremental costs") {
  const auto p = testing::fixture("garver6c", "garver6c");
  const auto m = build_integrated_model(p);
  int mono = 0;
  for (const auto& c : m.constraints()) mono += c.name.rfind("mono_", 0) == 0;
  CHECK(mono == 3 + 2);
  const double d2 = 1.0 / std::pow(1.05, 5);
  // x_1 pays C (1 - d2), x_2 pays C d2
  CHECK(m.variable(*m.find("alpha_k8_t1")).objective == doctest::Approx(30e6 * (1 - d2)));
  CHECK(m.variable(*m.find("alpha_k8_t2")).objective == doctest::Approx(30e6 * d2));
}

TEST_CASE("fixed builds pin binaries and the sign of absent devices") {
  const auto p = testing::fixture("case3", "case3");
  auto opt = integrated_options(p);
  opt.fixed = BuildSet{{}, {}};
  const auto m = build_model(p, opt);
  const auto& y = m.variable(*m.find("y_k2_c0_b1_t1"));
  CHECK(y.upper == 0.0);
  const auto& d = m.variable(*m.find("delta_k2_t1"));
  CHECK(d.lower == 0.0);
  CHECK(d.upper == 0.0);
  opt.fixed = BuildSet{{4}, {2}};
  const auto m2 = build_model(p, opt);
  CHECK(m2.variable(*m2.find("alpha_k4_t1")).lower == 1.0);
}

TEST_CASE("no-cvsr scope drops every CVSR variable") {
  const auto p = testing::fixture("case3", "case3");
  const auto m = build_integrated_model(p, false);
  CHECK_FALSE(m.find("w_k2_c0_b1_t1").has_value());
  CHECK_FALSE(m.find("delta_k2_t1").has_value());
  CHECK(m.num_binaries() == 1);
}

TEST_CASE("scope errors") {
  const auto p = testing::fixture("case3", "case3");
  auto opt = integrated_options(p);
  opt.soft_thermal = true;
  CHECK_THROWS_AS(build_model(p, opt), ModelError);
  auto dup = integrated_options(p);
  dup.states.push_back(dup.states.front());
  CHECK_THROWS_AS(build_model(p, dup), ModelError);
  const auto heavy = testing::fixture_with("case3", json{{"stages", json::array({json{{"years", 5}, {"load_multiplier", 4.0}}})}});
  CHECK_THROWS_AS(build_integrated_model(heavy), ValidationError);
}

TEST_CASE("solved case3 extracts a CVSR plan at the hand-derived cost") {
  const auto p = testing::fixture("case3", "case3");
  const auto opt = integrated_options(p);
  const auto m = build_model(p, opt);
  SolveRequest req;
  req.model = &m;
  const auto res = HighsBackend().solve(req);
  REQUIRE(res.optimal());
  const auto plan = extract_plan(m, res.values, p, opt);
  // Bus-1 share of the 1-3 corridor with the reactor at x = 0.12 against the 0.2 detour is 0.625,
  // so 160 MW cheap + 40 MW expensive: 3600 $/h for 43800 h, plus the 1 M$ device.
  CHECK(plan.final_builds().cvsrs == std::set<int>{2});
  CHECK(plan.final_builds().lines.empty());
  CHECK(plan.total == doctest::Approx(1e6 + 43800.0 * 3600.0).epsilon(1e-9));
  CHECK(res.objective == doctest::Approx(plan.total).epsilon(1e-9));
  CHECK(plan.audit.passed());
  CHECK(plan.audit.active_tuples == 1);
  CHECK(std::abs(plan.dispatch.at(1, 1, 1) - 160.0) <= 1e-6);
  const auto bm = audit_big_m(m, res.values, p, opt);
  CHECK(bm.passed());
  CHECK(bm.constraints_checked > 0);
}

TEST_CASE("cost breakdown in closed form") {
  const auto p = testing::fixture("garver6c", "garver6c");
  DispatchSnapshot d;
  for (int t = 1; t <= 2; ++t)
    for (int b = 1; b <= 2; ++b) d.pg[{b, t}] = {{1, 10.0}, {2, 0.0}, {3, 100.0}};
  const auto c = compute_costs(p, {1, 2}, {BuildSet{{9}, {}}, BuildSet{{8, 9}, {2}}}, d);
  const double d2 = 1.0 / std::pow(1.05, 5);
  CHECK(c.line == doctest::Approx(30e6 + 30e6 * d2).epsilon(1e-12));
  CHECK(c.cvsr == doctest::Approx(2e6 * d2).epsilon(1e-12));
  const double hourly = 10.0 * 30 + 100.0 * 28;
  CHECK(hourly_cost(p, d, 1, 1) == hourly);
  const double op = hourly * (2000 + 6760) * 5 * (1 + d2);
  CHECK(c.operating == doctest::Approx(op).epsilon(1e-12));
}

TEST_CASE("cost breakdown rejects builds outside the candidate sets") {
  const auto p = testing::fixture("garver6c", "garver6c");
  DispatchSnapshot d;
  CHECK_THROWS_AS(compute_costs(p, {1}, {BuildSet{{}, {3}}}, d), ValidationError);
  CHECK_THROWS_AS(compute_costs(p, {1}, {BuildSet{{99}, {}}}, d), ValidationError);
}

TEST_CASE("linearization holds on random instances") {
  std::mt19937 rng(99);
  int solved = 0;
  for (int i = 0; i < 60 && solved < 30; ++i) {
    const auto net = parse_matpower(testing::random_case_text(rng, 4 + i % 3));
    json cfg{{"blocks", json::array({json{{"name", "a"}, {"scale", 1.0}, {"hours", 3000}},
                                     json{{"name", "b"}, {"scale", 0.6}, {"hours", 5760}}})},
             {"contingencies", "none"},
             {"cvsr_sites", "all_lines"},
             {"candidate_lines", json::array({json{{"parallel_to", 1}, {"cost", 5e7}}})}};
    PlanningProblem p;
    try {
      p = load_problem(net, cfg);
    } catch (const ValidationError&) {
      continue;
    }
    MilpModel m;
    try {
      m = build_integrated_model(p);
    } catch (const ValidationError&) {
      continue;
    }
    SolveRequest req;
    req.model = &m;
    const auto res = HighsBackend().solve(req);
    if (!res.optimal()) continue;
    ++solved;
    const auto a = audit_linearization(m, res.values, p, integrated_options(p));
    CHECK(a.passed());
  }
  CHECK(solved >= 20);
}
