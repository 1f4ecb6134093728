#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"

using namespace tepcvsr;

namespace {

const char* kFixtures[] = {"case3", "corridor4", "ring3", "radial3", "garver6c", "case24_rts"};

const char* kTiny = R"(function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
	2	1	50	0	0	0	1	1	0	230	1	1.1	0.9;
];
mpc.gen = [
	1	50	0	100	-100	1	100	1	100	0;
];
mpc.branch = [
	1	2	0.01	0.2	0	0	0	0	0	0	1	-360	360;
];
mpc.gencost = [
	2	0	0	2	12	0;
];
)";

}  // namespace

TEST_CASE("case3 fields") {
  const auto c = read_matpower_file(testing::data("case3.m"));
  CHECK(c.base_mva == 100.0);
  REQUIRE(c.buses.size() == 3);
  REQUIRE(c.branches.size() == 3);
  REQUIRE(c.generators.size() == 2);
  REQUIRE(c.loads.size() == 1);
  CHECK(c.slack_bus() == 1);
  CHECK(c.loads[0].bus == 3);
  CHECK(c.loads[0].p_demand == 200.0);
  CHECK(c.branch(2).from_bus == 1);
  CHECK(c.branch(2).to_bus == 3);
  CHECK(c.branch(2).rate_a == 100.0);
  CHECK(c.branch(2).rate_b == 110.0);
  CHECK(c.branch(2).susceptance == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(c.generator(2).cost == 50.0);
  CHECK(c.generator(1).p_max == 300.0);
  CHECK(c.total_demand() == 200.0);
}

TEST_CASE("zero rating means unlimited") {
  const auto c = parse_matpower(kTiny);
  CHECK(std::isinf(c.branch(1).rate_a));
  CHECK(c.branch(1).reactance == 0.2);
}

TEST_CASE("round trip through the writer") {
  for (const char* name : kFixtures) {
    CAPTURE(name);
    const auto c = read_matpower_file(testing::data(std::string(name) + ".m"));
    const auto again = parse_matpower(write_matpower(c));
    CHECK(again == c);
  }
  const auto tiny = parse_matpower(kTiny);
  CHECK(parse_matpower(write_matpower(tiny)) == tiny);
}

TEST_CASE("parse errors carry the line number") {
  std::string bad = kTiny;
  bad.replace(bad.find("0.2"), 3, "0.x");
  try {
    parse_matpower(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 12);
  }
  std::string unclosed = kTiny;
  unclosed.erase(unclosed.find("];\nmpc.gencost"), 3);
  CHECK_THROWS_AS(parse_matpower(unclosed), ParseError);
}

TEST_CASE("validation errors") {
  std::string unknown_bus = kTiny;
  unknown_bus.replace(unknown_bus.find("\t1\t2\t0.01"), 9, "\t1\t7\t0.01");
  CHECK_THROWS_AS(parse_matpower(unknown_bus), ValidationError);
  std::string zero_x = kTiny;
  zero_x.replace(zero_x.find("0.2\t"), 3, "0.0");
  CHECK_THROWS_AS(parse_matpower(zero_x), ValidationError);
  CHECK_THROWS_AS(read_matpower_file("/nonexistent/case.m"), ValidationError);
}

TEST_CASE("missing case file names the path") {
  try {
    read_matpower_file("/nonexistent/case.m");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/case.m") != std::string::npos);
  }
}

TEST_CASE("islanding equals brute-force bridges on every fixture") {
  for (const char* name : kFixtures) {
    CAPTURE(name);
    const auto c = read_matpower_file(testing::data(std::string(name) + ".m"));
    CHECK(islanding_contingencies(c) == testing::bridges_by_removal(c));
  }
}

TEST_CASE("islanding on random graphs") {
  std::mt19937 rng(7);
  for (int i = 0; i < 60; ++i) {
    const auto c = parse_matpower(testing::random_case_text(rng, 3 + i % 8));
    CHECK(islanding_contingencies(c) == testing::bridges_by_removal(c));
  }
}

TEST_CASE("radial case: every branch islands") {
  const auto c = read_matpower_file(testing::data("radial3.m"));
  CHECK(islanding_contingencies(c) == std::set<int>{1, 2});
}

TEST_CASE("24-bus case: the 7-8 corridor islands") {
  const auto c = read_matpower_file(testing::data("case24_rts.m"));
  int id78 = 0;
  for (const auto& br : c.branches) {
    if ((br.from_bus == 7 && br.to_bus == 8) || (br.from_bus == 8 && br.to_bus == 7)) id78 = br.id;
  }
  REQUIRE(id78 != 0);
  CHECK(islanding_contingencies(c).count(id78) == 1);
}

TEST_CASE("disconnected case is rejected by the screening") {
  std::string two = kTiny;
  two.replace(two.find("1\t-360"), 1, "0");
  std::optional<NetworkCase> c;
  try {
    c = parse_matpower(two);
  } catch (const ValidationError&) {
    return;  // rejected at load time is fine as well
  }
  CHECK_THROWS_AS(islanding_contingencies(*c), ValidationError);
}
