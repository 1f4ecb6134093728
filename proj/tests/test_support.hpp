#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tepcvsr/decomp.hpp"
#include "tepcvsr/netcase.hpp"
#include "tepcvsr/problem.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return TEPCVSR_TEST_DATA; }
inline std::filesystem::path data(const std::string& name) { return data_dir() / name; }

inline tepcvsr::PlanningProblem fixture(const std::string& case_name, const std::string& config_name) {
  auto net = tepcvsr::read_matpower_file(data(case_name + ".m"));
  return tepcvsr::load_problem_file(net, data(config_name + ".json"));
}

inline tepcvsr::PlanningProblem fixture_with(const std::string& case_name, const nlohmann::json& config) {
  return tepcvsr::load_problem(tepcvsr::read_matpower_file(data(case_name + ".m")), config);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Brute force: drop each in-service branch and flood-fill the rest of the in-service graph.
inline std::set<int> bridges_by_removal(const tepcvsr::NetworkCase& c) {
  std::set<int> out;
  for (const auto& cut : c.branches) {
    if (!cut.in_service) continue;
    std::set<int> seen{c.buses.front().id};
    std::vector<int> stack{c.buses.front().id};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& br : c.branches) {
        if (!br.in_service || br.id == cut.id) continue;
        int v = 0;
        if (br.from_bus == u) v = br.to_bus;
        else if (br.to_bus == u) v = br.from_bus;
        else continue;
        if (seen.insert(v).second) stack.push_back(v);
      }
    }
    if (seen.size() != c.buses.size()) out.insert(cut.id);
  }
  return out;
}

// Random connected MATPOWER text: a random spanning tree plus extra edges, one slack generator
// and a few more units, ratings tight enough that some lines bind.
inline std::string random_case_text(std::mt19937& rng, int n_bus) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::ostringstream os;
  os << "function mpc = rnd\nmpc.version = '2';\nmpc.baseMVA = 100;\nmpc.bus = [\n";
  std::vector<double> pd(static_cast<std::size_t>(n_bus));
  double total = 0.0;
  for (int i = 1; i <= n_bus; ++i) {
    pd[static_cast<std::size_t>(i - 1)] = i == 1 ? 0.0 : std::round(20.0 + 80.0 * u01(rng));
    total += pd[static_cast<std::size_t>(i - 1)];
    os << '\t' << i << '\t' << (i == 1 ? 3 : 1) << '\t' << pd[static_cast<std::size_t>(i - 1)]
       << "\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;\n";
  }
  os << "];\nmpc.gen = [\n";
  std::vector<int> gen_bus{1, 1 + static_cast<int>(rng() % static_cast<unsigned>(n_bus))};
  os << "\t1\t0\t0\t100\t-100\t1\t100\t1\t" << std::round(total * 1.2) << "\t0;\n";
  os << '\t' << gen_bus[1] << "\t0\t0\t100\t-100\t1\t100\t1\t" << std::round(total * 1.2) << "\t0;\n";
  os << "];\nmpc.branch = [\n";
  std::set<std::pair<int, int>> used;
  auto line = [&](int f, int t) {
    const double x = 0.05 + 0.25 * u01(rng);
    const double rate = std::round(total * (0.25 + 0.6 * u01(rng)));
    os << '\t' << f << '\t' << t << "\t0\t" << x << "\t0\t" << rate << '\t' << std::round(rate * 1.1) << '\t'
       << std::round(rate * 1.1) << "\t0\t0\t1\t-360\t360;\n";
    used.insert({std::min(f, t), std::max(f, t)});
  };
  for (int i = 2; i <= n_bus; ++i) line(1 + static_cast<int>(rng() % static_cast<unsigned>(i - 1)), i);
  for (int extra = 0; extra < n_bus; ++extra) {
    const int f = 1 + static_cast<int>(rng() % static_cast<unsigned>(n_bus));
    const int t = 1 + static_cast<int>(rng() % static_cast<unsigned>(n_bus));
    if (f == t || used.count({std::min(f, t), std::max(f, t)})) continue;
    line(f, t);
  }
  os << "];\nmpc.gencost = [\n\t2\t0\t0\t2\t" << std::round(10 + 10 * u01(rng)) << "\t0;\n\t2\t0\t0\t2\t"
     << std::round(40 + 20 * u01(rng)) << "\t0;\n];\n";
  return os.str();
}

}  // namespace testing
