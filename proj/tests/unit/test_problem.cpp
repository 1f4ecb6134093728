#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"

using namespace tepcvsr;
using nlohmann::json;

namespace {

PlanningProblem case3(const json& cfg) { return testing::fixture_with("case3", cfg); }

}  // namespace

TEST_CASE("defaults") {
  const auto p = case3(json::object());
  CHECK(p.discount_rate == 0.05);
  REQUIRE(p.stages.size() == 1);
  CHECK(p.stage(1).years == 5);
  REQUIRE(p.num_blocks(1) == 3);
  CHECK(p.stage(1).blocks[0].hours + p.stage(1).blocks[1].hours + p.stage(1).blocks[2].hours == 8760.0);
  CHECK(p.stage(1).blocks[1].scale == 0.85);
  CHECK(p.contingencies == std::vector<int>{1, 2, 3});
  CHECK(p.islanding.empty());
  CHECK(p.critical_count == 2);
  CHECK(p.critical_blocks == std::vector<std::vector<int>>{{1, 2}});
  CHECK(p.redispatchable.empty());
  CHECK(p.candidates.empty());
  CHECK(p.cvsr_sites.empty());
}

TEST_CASE("states put the base case first") {
  const auto p = case3(json{{"stages", json::array({json{{"years", 5}}, json{{"years", 5}}})}});
  const auto s = p.all_states();
  REQUIRE(s.size() == 2 * 3 * 4);
  CHECK(s[0] == StateKey{0, 1, 1});
  CHECK(s[1] == StateKey{1, 1, 1});
  CHECK(s[4] == StateKey{0, 2, 1});
  CHECK(s[12] == StateKey{0, 1, 2});
  CHECK(p.stage(2).start_year == 6);
  CHECK(p.base_states(2).size() == 3);
}

TEST_CASE("discount and operating weights") {
  auto p = case3(json{{"stages", json::array({json{{"years", 5}}, json{{"years", 5}}})}});
  CHECK(std::abs(p.discount(6) - 0.783526) <= 1e-6);
  CHECK(std::abs(p.discount(6) - 1.0 / std::pow(1.05, 5)) <= 1e-15);
  // literal: hours * years * discount(start)
  CHECK(p.operating_weight(1, 2) == doctest::Approx(760.0 * 5 / std::pow(1.05, 5)).epsilon(1e-12));
  CHECK(p.operating_weight_undiscounted(1, 2) == 760.0 * 5);
  auto q = case3(json{{"operating_cost_mode", "per_year"}, {"stages", json::array({json{{"years", 5}}})}});
  double annuity = 0.0;
  for (int y = 1; y <= 5; ++y) annuity += 1.0 / std::pow(1.05, y - 1);
  CHECK(q.operating_weight(2, 1) == doctest::Approx(5000.0 * annuity).epsilon(1e-12));
}

TEST_CASE("demand and ratings") {
  const auto p = case3(json{{"rating_multiplier", 0.5},
                            {"stages", json::array({json{{"years", 5}, {"load_multiplier", 1.2}}})},
                            {"candidate_lines", json::array({json{{"parallel_to", 2}, {"cost", 1e6}}})}});
  CHECK(p.demand(p.network.loads[0], 2, 1) == doctest::Approx(200 * 1.2 * 0.85));
  const auto& br = p.network.branch(2);
  CHECK(p.rating(br, StateKey{0, 1, 1}) == 50.0);
  CHECK(p.rating(br, StateKey{1, 1, 1}) == 55.0);
  const auto* cl = p.find_candidate(4);
  REQUIRE(cl);
  CHECK(cl->from_bus == 1);
  CHECK(cl->to_bus == 3);
  CHECK(cl->reactance == 0.1);
  CHECK(p.rating(*cl, StateKey{0, 1, 1}) == 50.0);
  CHECK(p.rating(*cl, StateKey{3, 1, 1}) == 55.0);
  const auto lt = case3(json{{"contingency_rating", "long_term"}});
  CHECK(lt.rating(lt.network.branch(2), StateKey{1, 1, 1}) == 100.0);
}

TEST_CASE("CVSR site defaults") {
  const auto p = case3(json{{"cvsr_sites", json::array({2, json{{"branch", 3}, {"range_fraction", 0.5}}})}});
  REQUIRE(p.cvsr_sites.size() == 2);
  const auto* s = p.find_cvsr(2);
  REQUIRE(s);
  CHECK(s->x_v_max == doctest::Approx(0.02));
  CHECK(s->x_v_min == 0.0);
  CHECK(std::abs(s->b_v_min - (-1.0 / 0.6)) <= 1e-9);
  CHECK(s->b_v_max == 0.0);
  // 10 $/kVA * 100 MW * 1000 * 0.2
  CHECK(s->cost == doctest::Approx(10.0 * 100 * 1000 * 0.2));
  const auto all = case3(json{{"cvsr_sites", "all_lines"}});
  CHECK(all.cvsr_sites.size() == 3);
}

TEST_CASE("explicit lists") {
  const auto p = case3(json{{"contingencies", json::array({3, 1})},
                            {"critical_contingencies", json{{"list", json::array({3})}, {"blocks", json::array({1})}}},
                            {"redispatchable_generators", json::array({2})},
                            {"generator_costs", json{{"2", 70.0}}}});
  CHECK(p.contingencies == std::vector<int>{1, 3});
  CHECK(p.critical_contingencies == std::vector<int>{3});
  CHECK(p.critical_blocks == std::vector<std::vector<int>>{{1}});
  CHECK(p.is_redispatchable(2));
  CHECK_FALSE(p.is_redispatchable(1));
  CHECK(p.network.generator(2).cost == 70.0);
  CHECK(case3(json{{"contingencies", "none"}}).contingencies.empty());
}

TEST_CASE("radial case leaves no contingencies") {
  const auto p = testing::fixture("radial3", "radial3");
  CHECK(p.contingencies.empty());
  CHECK(p.islanding == std::set<int>{1, 2});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(case3(json{{"unknown_key", 1}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"blocks", json::array({json{{"scale", 1.0}, {"hours", 100}}})}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"candidate_lines", json::array({json{{"parallel_to", 9}, {"cost", 1}}})}}),
                  ValidationError);
  CHECK_THROWS_AS(case3(json{{"candidate_lines", json::array({json{{"parallel_to", 1}, {"cost", 0}}})}}),
                  ValidationError);
  CHECK_THROWS_AS(case3(json{{"cvsr_sites", json::array({2, 2})}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"cvsr_sites", json::array({8})}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"contingencies", json::array({5})}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"contingencies", "some"}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"critical_contingencies", json{{"blocks", json::array({4})}}}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"operating_cost_mode", "monthly"}}), ValidationError);
  CHECK_THROWS_AS(case3(json{{"generator_costs", json{{"9", 1.0}}}}), ValidationError);
  CHECK_THROWS_AS(testing::fixture_with("radial3", json{{"contingencies", json::array({1})}}), ValidationError);
  CHECK_THROWS_AS(load_problem_file(read_matpower_file(testing::data("case3.m")), "/nonexistent.json"),
                  ValidationError);
}
