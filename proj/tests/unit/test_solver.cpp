#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"
#include "tepcvsr/solver.hpp"

using namespace tepcvsr;

namespace {

// min -x - 2y  s.t. x + y <= 1.5, y binary, x in [0, 1]
MilpModel knapsack() {
  MilpModel m;
  const int x = m.add_variable(Variable{"x", VarKind::Continuous, 0.0, 1.0, -1.0});
  const int y = m.add_variable(Variable{"y", VarKind::Binary, 0.0, 1.0, -2.0});
  m.add_constraint("cap", {{x, 1.0}, {y, 1.0}}, Sense::LessEqual, 1.5);
  m.add_objective_offset(10.0);
  return m;
}

}  // namespace

TEST_CASE("statuses round trip") {
  for (auto s : {SolveStatus::Optimal, SolveStatus::GapReached, SolveStatus::Infeasible, SolveStatus::Unbounded,
                 SolveStatus::TimeLimit, SolveStatus::Error}) {
    CHECK(status_from_string(to_string(s)) == s);
  }
  CHECK(status_from_string("OPTIMAL") == SolveStatus::Optimal);
}

TEST_CASE("in-process solve") {
  const auto m = knapsack();
  SolveRequest req;
  req.model = &m;
  const auto r = HighsBackend().solve(req);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(7.5));
  CHECK(r.value(m, "y") == 1.0);
  CHECK(r.value(m, "x") == doctest::Approx(0.5));
  CHECK_THROWS_AS(r.value(m, "nope"), SolverError);
  CHECK(r.named_values(m).size() == 2);
}

TEST_CASE("infeasible model") {
  MilpModel m;
  const int x = m.add_variable(Variable{"x", VarKind::Continuous, 0.0, 1.0, 1.0});
  m.add_constraint("r", {{x, 1.0}}, Sense::GreaterEqual, 2.0);
  SolveRequest req;
  req.model = &m;
  const auto r = HighsBackend().solve(req);
  CHECK(r.status == SolveStatus::Infeasible);
  CHECK_FALSE(r.has_solution());
}

TEST_CASE("relaxation and fixing") {
  const auto m = knapsack();
  SolveRequest req;
  req.model = &m;
  HighsBackend be;
  const auto relaxed = solve_lp_relaxation(req, BinaryTreatment::Relax, be);
  CHECK(relaxed.objective == doctest::Approx(10.0 - 0.5 - 2.0));
  const auto fixed = solve_lp_relaxation(req, BinaryTreatment::Fix, be, {0.0, 0.0});
  CHECK(fixed.objective == doctest::Approx(9.0));
  CHECK(relaxed_copy(m, BinaryTreatment::Relax).num_binaries() == 0);
}

TEST_CASE("solution file formats") {
  const auto a = parse_solution("status optimal\nobjective 3.5\nbound 3.25\n# comment\nx 1\ny 0.5\n");
  CHECK(a.status == "optimal");
  CHECK(*a.objective == 3.5);
  CHECK(*a.bound == 3.25);
  CHECK(a.values.at("y") == 0.5);
  const auto cbc = parse_solution("Optimal - objective value 12.5\n      0 x     1     0\n      1 y     2     0\n");
  CHECK(cbc.status == "optimal");
  CHECK(*cbc.objective == 12.5);
  CHECK(cbc.values.at("y") == 2.0);
  try {
    parse_solution("x 1\ny\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_solution("x one\n"), ParseError);
  CHECK_THROWS_AS(read_solution_file("/nonexistent.sol"), Error);

  const auto m = knapsack();
  SolveRequest req;
  req.model = &m;
  const auto r = HighsBackend().solve(req);
  const auto back = parse_solution(format_solution(m, r));
  CHECK(back.values.at("x") == r.values[0]);
  CHECK(*back.objective == r.objective);
}

TEST_CASE("subprocess backend agrees with the in-process solve") {
  const auto be = make_backend("subprocess");
  CHECK(be->name() == "subprocess");
  for (const auto& [c, cfg] : std::vector<std::pair<std::string, std::string>>{
           {"case3", "case3"}, {"corridor4", "corridor4"}, {"garver6c", "garver6c"}}) {
    CAPTURE(cfg);
    const auto p = testing::fixture(c, cfg);
    const auto m = build_integrated_model(p);
    SolveRequest req;
    req.model = &m;
    const auto direct = HighsBackend().solve(req);
    const auto sub = be->solve(req);
    REQUIRE(direct.optimal());
    REQUIRE(sub.optimal());
    CHECK(testing::rel_close(sub.objective, direct.objective, 1e-9));
  }
}

TEST_CASE("backend selection errors") {
  CHECK_THROWS_AS(make_backend("cplex"), SolverError);
  CHECK(make_backend("highs")->name() == "highs");
  ::setenv("TEPCVSR_SOLVER", "/nonexistent/solver", 1);
  CHECK_THROWS_AS(make_backend("subprocess"), SolverError);
  ::unsetenv("TEPCVSR_SOLVER");
  const auto broken = make_backend("subprocess:/bin/true {lp} {sol}");
  const auto m = knapsack();
  SolveRequest req;
  req.model = &m;
  CHECK_THROWS_AS(broken->solve(req), SolverError);
  const auto liar = make_backend("subprocess:printf 'status optimal\\nzz 1\\n' | tee {sol}");
  CHECK_THROWS_AS(liar->solve(req), SolverError);
}
