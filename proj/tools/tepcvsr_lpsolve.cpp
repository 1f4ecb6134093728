// Stand-alone LP/MILP solver used by the subprocess backend:
//   tepcvsr-lpsolve model.lp model.sol [--time-limit S] [--gap G] [--threads N] [--no-polish]
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "Highs.h"

namespace {

const char* status_word(HighsModelStatus s, bool mip, double obj, double bound) {
  switch (s) {
    case HighsModelStatus::kOptimal:
      return mip && std::abs(obj - bound) > 1e-9 * std::max(1.0, std::abs(obj)) ? "gap_reached" : "optimal";
    case HighsModelStatus::kInfeasible:
      return "infeasible";
    case HighsModelStatus::kUnbounded:
      return "unbounded";
    case HighsModelStatus::kTimeLimit:
      return "time_limit";
    default:
      return "error";
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::string lp_path, sol_path;
  double time_limit = 600.0, gap = 1e-8;
  int threads = 1;
  bool no_polish = false;
  CLI::App app{"tepcvsr-lpsolve"};
  app.add_option("lp", lp_path, "LP file")->required();
  app.add_option("sol", sol_path, "solution file to write")->required();
  app.add_option("--time-limit", time_limit);
  app.add_option("--gap", gap);
  app.add_option("--threads", threads);
  app.add_flag("--no-polish", no_polish);
  CLI11_PARSE(app, argc, argv);

  Highs h;
  h.setOptionValue("output_flag", false);
  h.setOptionValue("threads", threads);
  h.setOptionValue("random_seed", 0);
  h.setOptionValue("time_limit", time_limit);
  h.setOptionValue("mip_rel_gap", gap);
  h.setOptionValue("mip_abs_gap", 1e-9);
  h.setOptionValue("mip_feasibility_tolerance", 1e-9);
  h.setOptionValue("primal_feasibility_tolerance", 1e-9);
  h.setOptionValue("dual_feasibility_tolerance", 1e-9);
  if (h.readModel(lp_path) == HighsStatus::kError) {
    std::cerr << "cannot read " << lp_path << '\n';
    return 2;
  }
  h.run();
  if (h.getModelStatus() == HighsModelStatus::kUnboundedOrInfeasible) {
    h.setOptionValue("presolve", "off");
    h.run();
  }
  const HighsLp& lp = h.getLp();
  const bool mip = !lp.integrality_.empty() &&
                   std::any_of(lp.integrality_.begin(), lp.integrality_.end(),
                               [](HighsVarType t) { return t != HighsVarType::kContinuous; });
  const auto status = h.getModelStatus();
  const auto& info = h.getInfo();
  const bool have_point = info.primal_solution_status == kSolutionStatusFeasible;
  std::vector<double> x = have_point ? h.getSolution().col_value : std::vector<double>{};
  double obj = info.objective_function_value;
  const double bound = mip ? info.mip_dual_bound : obj;

  if (mip && have_point && !no_polish) {
    // Re-solve the LP with integers fixed to get clean continuous values.
    Highs fix;
    fix.setOptionValue("output_flag", false);
    fix.setOptionValue("primal_feasibility_tolerance", 1e-9);
    fix.setOptionValue("dual_feasibility_tolerance", 1e-9);
    HighsLp copy = lp;
    for (HighsInt j = 0; j < copy.num_col_; ++j) {
      if (copy.integrality_[static_cast<std::size_t>(j)] == HighsVarType::kContinuous) continue;
      const double v = std::round(x[static_cast<std::size_t>(j)]);
      copy.col_lower_[static_cast<std::size_t>(j)] = v;
      copy.col_upper_[static_cast<std::size_t>(j)] = v;
    }
    copy.integrality_.clear();
    fix.passModel(copy);
    fix.run();
    if (fix.getModelStatus() == HighsModelStatus::kOptimal) {
      const double o = fix.getInfo().objective_function_value;
      if (o <= obj + 1e-7 * std::max(1.0, std::abs(obj))) {
        x = fix.getSolution().col_value;
        obj = o;
        for (HighsInt j = 0; j < copy.num_col_; ++j) {
          if (lp.integrality_[static_cast<std::size_t>(j)] != HighsVarType::kContinuous) {
            x[static_cast<std::size_t>(j)] = copy.col_lower_[static_cast<std::size_t>(j)];
          }
        }
      }
    }
  }

  std::ofstream out(sol_path);
  if (!out) {
    std::cerr << "cannot write " << sol_path << '\n';
    return 2;
  }
  out << "status " << status_word(status, mip, obj, bound) << '\n';
  if (!x.empty()) {
    out << fmt::format("objective {:.17g}\nbound {:.17g}\n", obj, bound);
    for (std::size_t j = 0; j < x.size(); ++j) out << fmt::format("{} {:.17g}\n", lp.col_names_[j], x[j]);
  }
  return 0;
}
