#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include <unistd.h>

#include <fmt/format.h>

#include "Highs.h"

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"

using namespace tepcvsr;

namespace {

double solve_file(const std::filesystem::path& path, std::vector<std::string>* names = nullptr) {
  Highs h;
  h.setOptionValue("output_flag", false);
  h.setOptionValue("mip_rel_gap", 1e-10);
  h.setOptionValue("mip_abs_gap", 1e-9);
  REQUIRE(h.readModel(path.string()) != HighsStatus::kError);
  h.run();
  REQUIRE(h.getModelStatus() == HighsModelStatus::kOptimal);
  if (names) *names = h.getLp().col_names_;
  return h.getInfo().objective_function_value;
}

std::filesystem::path tmp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / fmt::format("tepcvsr-io-{}", ::getpid());
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("variable names") {
  CHECK(var_name({Role::Generation, 3, 0, 1, 2}) == "Pg_n3_c0_b1_t2");
  CHECK(var_name({Role::ExistingFlow, 5, 2, 1, 1}) == "PE_k5_c2_b1_t1");
  CHECK(var_name({Role::CandidateFlow, 40, 7, 3, 2}) == "PC_k40_c7_b3_t2");
  CHECK(var_name({Role::Angle, 12, 0, 2, 1}) == "th_i12_c0_b2_t1");
  CHECK(var_name({Role::CvsrFlow, 2, 0, 1, 1}) == "w_k2_c0_b1_t1");
  CHECK(var_name({Role::CvsrAngle, 2, 3, 1, 1}) == "z_k2_c3_b1_t1");
  CHECK(var_name({Role::CvsrSign, 2, 3, 1, 1}) == "y_k2_c3_b1_t1");
  CHECK(var_name({Role::BuildLine, 4, 0, 0, 2}) == "alpha_k4_t2");
  CHECK(var_name({Role::BuildCvsr, 9, 0, 0, 1}) == "delta_k9_t1");
  CHECK(var_name({Role::SlackE1, 1, 2, 1, 1}) == "uE1_k1_c2_b1_t1");
  CHECK(var_name({Role::SlackC2, 4, 2, 1, 1}) == "uC2_k4_c2_b1_t1");
}

TEST_CASE("model bookkeeping") {
  MilpModel m;
  const int x = m.add_variable({Role::BuildLine, 1, 0, 0, 1}, VarKind::Binary, 0, 1, 5.0);
  const int y = m.add_variable(Variable{"y", VarKind::Continuous, -2.0, 3.0, 1.0});
  m.add_constraint("r", {{x, 1.0}, {y, 1.0}, {x, 2.0}}, Sense::GreaterEqual, 1.0);
  REQUIRE(m.constraint(0).terms.size() == 2);
  CHECK(m.constraint(0).terms[0].coef == 3.0);
  CHECK(m.num_binaries() == 1);
  CHECK(m.find("alpha_k1_t1") == x);
  CHECK(m.find(VarKey{Role::BuildLine, 1, 0, 0, 1}) == x);
  CHECK_FALSE(m.find("nope").has_value());
  CHECK_THROWS_AS(m.require({Role::BuildLine, 2, 0, 0, 1}), ModelError);
  CHECK_THROWS_AS(m.add_variable(Variable{"y", VarKind::Continuous, 0, 1, 0}), ModelError);
  CHECK_THROWS_AS(m.add_variable(Variable{"b", VarKind::Binary, 0, 2, 0}), ModelError);
  CHECK_THROWS_AS(m.add_constraint("bad", {{7, 1.0}}, Sense::Equal, 0.0), ModelError);
  m.add_objective_offset(2.5);
  CHECK(m.evaluate_objective({1.0, 0.0}) == 7.5);
  CHECK(m.max_violation({0.0, 3.0}) == 0.0);
  CHECK(m.max_violation({0.0, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("LP text layout") {
  MilpModel m;
  const int a = m.add_variable(Variable{"a", VarKind::Binary, 0, 1, 2.0});
  const int b = m.add_variable(Variable{"b", VarKind::Continuous, -1.0, 4.0, -1.0});
  m.add_constraint("c1", {{a, 1.0}, {b, 1.0}}, Sense::LessEqual, 3.0);
  const auto lp = to_lp_string(m);
  CHECK(lp.find("Minimize") != std::string::npos);
  CHECK(lp.find("c1:") != std::string::npos);
  CHECK(lp.find("General") != std::string::npos);
  CHECK(lp.find("End") != std::string::npos);
  const auto mps = to_mps_string(m);
  CHECK(mps.find("MARKER") != std::string::npos);
  CHECK(mps.find("ENDATA") != std::string::npos);
}

TEST_CASE("exported LP and MPS files reimport with the same names and objective") {
  for (const auto& [case_name, cfg] : std::vector<std::pair<std::string, std::string>>{
           {"case3", "case3"}, {"case3", "case3_n1"}, {"corridor4", "corridor4"}, {"garver6c", "garver6c"}}) {
    CAPTURE(cfg);
    const auto p = testing::fixture(case_name, cfg);
    const auto model = build_integrated_model(p);
    HighsBackend backend;
    SolveRequest req;
    req.model = &model;
    const auto direct = backend.solve(req);
    REQUIRE(direct.optimal());

    const auto lp_path = tmp(cfg + ".lp");
    const auto mps_path = tmp(cfg + ".mps");
    std::ofstream(lp_path) << to_lp_string(model);
    std::ofstream(mps_path) << to_mps_string(model);

    std::vector<std::string> names;
    const double from_lp = solve_file(lp_path, &names);
    const double from_mps = solve_file(mps_path);
    CHECK(testing::rel_close(from_lp, direct.objective, 1e-9));
    CHECK(testing::rel_close(from_mps, direct.objective, 1e-9));

    // Names survive exactly; the LP reader may drop columns that appear nowhere.
    std::set<std::string> ours;
    for (const auto& v : model.variables()) ours.insert(v.name);
    for (const auto& n : names) CHECK(ours.count(n) == 1);
  }
}

TEST_CASE("names in the LP file match the model") {
  const auto p = testing::fixture("case3", "case3");
  const auto model = build_integrated_model(p);
  const auto lp = to_lp_string(model);
  for (const char* name : {"alpha_k4_t1", "delta_k2_t1", "Pg_n1_c0_b1_t1", "w_k2_c0_b1_t1", "z_k2_c0_b1_t1",
                           "y_k2_c0_b1_t1", "th_i3_c0_b1_t1", "PE_k1_c0_b1_t1", "PC_k4_c0_b1_t1"}) {
    CAPTURE(name);
    CHECK(model.find(name).has_value());
    CHECK(lp.find(name) != std::string::npos);
  }
}
