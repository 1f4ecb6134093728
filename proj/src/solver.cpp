#include "tepcvsr/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>

#include "Highs.h"

#include "tepcvsr/error.hpp"

#ifndef TEPCVSR_LPSOLVE_DEFAULT
#define TEPCVSR_LPSOLVE_DEFAULT "tepcvsr-lpsolve"
#endif

namespace tepcvsr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

HighsLp to_highs(const MilpModel& m) {
  HighsLp lp;
  const auto& vars = m.variables();
  const auto& rows = m.constraints();
  lp.num_col_ = static_cast<HighsInt>(vars.size());
  lp.num_row_ = static_cast<HighsInt>(rows.size());
  lp.sense_ = ObjSense::kMinimize;
  lp.offset_ = m.objective_offset();
  bool any_int = false;
  for (const auto& v : vars) {
    lp.col_cost_.push_back(v.objective);
    lp.col_lower_.push_back(v.lower);
    lp.col_upper_.push_back(v.upper);
    any_int = any_int || v.kind == VarKind::Binary;
  }
  if (any_int) {
    for (const auto& v : vars) {
      lp.integrality_.push_back(v.kind == VarKind::Binary ? HighsVarType::kInteger : HighsVarType::kContinuous);
    }
  }
  lp.a_matrix_.format_ = MatrixFormat::kRowwise;
  lp.a_matrix_.num_col_ = lp.num_col_;
  lp.a_matrix_.num_row_ = lp.num_row_;
  lp.a_matrix_.start_.assign(1, 0);
  for (const auto& r : rows) {
    for (const auto& t : r.terms) {
      lp.a_matrix_.index_.push_back(static_cast<HighsInt>(t.var));
      lp.a_matrix_.value_.push_back(t.coef);
    }
    lp.a_matrix_.start_.push_back(static_cast<HighsInt>(lp.a_matrix_.index_.size()));
    const double inf = kHighsInf;
    switch (r.sense) {
      case Sense::LessEqual:
        lp.row_lower_.push_back(-inf);
        lp.row_upper_.push_back(r.rhs);
        break;
      case Sense::GreaterEqual:
        lp.row_lower_.push_back(r.rhs);
        lp.row_upper_.push_back(inf);
        break;
      case Sense::Equal:
        lp.row_lower_.push_back(r.rhs);
        lp.row_upper_.push_back(r.rhs);
        break;
    }
  }
  return lp;
}

SolveResult run_highs(const SolveRequest& req, bool presolve) {
  const MilpModel& m = *req.model;
  SolveResult res;
  Highs h;
  h.setOptionValue("output_flag", false);
  h.setOptionValue("threads", static_cast<HighsInt>(std::max(1, req.threads)));
  h.setOptionValue("random_seed", static_cast<HighsInt>(0));
  h.setOptionValue("time_limit", req.time_limit);
  h.setOptionValue("mip_rel_gap", req.relative_gap);
  h.setOptionValue("mip_abs_gap", 1e-9);
  h.setOptionValue("mip_feasibility_tolerance", req.integrality_tol);
  h.setOptionValue("primal_feasibility_tolerance", 1e-9);
  h.setOptionValue("dual_feasibility_tolerance", 1e-9);
  if (!presolve) h.setOptionValue("presolve", "off");
  if (h.passModel(to_highs(m)) == HighsStatus::kError) {
    res.status = SolveStatus::Error;
    res.message = "highs rejected the model";
    return res;
  }
  h.run();
  const auto ms = h.getModelStatus();
  const auto& info = h.getInfo();
  const bool is_mip = m.num_binaries() > 0;
  const bool feasible = info.primal_solution_status == kSolutionStatusFeasible;
  switch (ms) {
    case HighsModelStatus::kOptimal: res.status = SolveStatus::Optimal; break;
    case HighsModelStatus::kModelEmpty: res.status = SolveStatus::Optimal; break;
    case HighsModelStatus::kInfeasible: res.status = SolveStatus::Infeasible; break;
    case HighsModelStatus::kUnbounded: res.status = SolveStatus::Unbounded; break;
    case HighsModelStatus::kUnboundedOrInfeasible:
      if (presolve) return run_highs(req, false);
      res.status = SolveStatus::Infeasible;
      break;
    case HighsModelStatus::kTimeLimit:
    case HighsModelStatus::kIterationLimit:
    case HighsModelStatus::kSolutionLimit:
    case HighsModelStatus::kInterrupt:
      res.status = SolveStatus::TimeLimit;
      break;
    default:
      res.status = SolveStatus::Error;
      res.message = fmt::format("highs model status {}", h.modelStatusToString(ms));
      break;
  }
  if (ms == HighsModelStatus::kModelEmpty) {
    res.objective = res.bound = m.objective_offset();
    res.values.assign(m.variables().size(), 0.0);
    return res;
  }
  if (feasible && (res.status == SolveStatus::Optimal || res.status == SolveStatus::TimeLimit)) {
    const auto& sol = h.getSolution();
    res.values.assign(sol.col_value.begin(), sol.col_value.end());
    res.objective = info.objective_function_value;
    res.bound = is_mip ? info.mip_dual_bound : res.objective;
    if (res.status == SolveStatus::Optimal && is_mip &&
        std::abs(res.objective - res.bound) > 1e-9 * std::max(1.0, std::abs(res.objective))) {
      res.status = SolveStatus::GapReached;
    }
  }
  return res;
}

/// Fix integers of a MIP point and re-solve the LP; keeps the original point if the LP fails.
void polish(const SolveRequest& req, SolveResult& res, const SolverBackend& backend) {
  const MilpModel& m = *req.model;
  if (!req.polish || m.num_binaries() == 0 || !res.has_solution()) return;
  SolveRequest lp_req = req;
  lp_req.polish = false;
  auto lp = solve_lp_relaxation(lp_req, BinaryTreatment::Fix, backend, res.values);
  if (lp.status != SolveStatus::Optimal || !lp.has_solution()) return;
  if (lp.objective > res.objective + 1e-7 * std::max(1.0, std::abs(res.objective))) return;
  res.values = std::move(lp.values);
  res.objective = lp.objective;
  res.bound = std::min(res.bound, res.objective);
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::optional<double> to_double(const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool is_integer_token(const std::string& tok) {
  return !tok.empty() && tok.find_first_not_of("0123456789") == std::string::npos;
}

std::atomic<unsigned> temp_counter{0};

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::GapReached: return "gap_reached";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::Error: return "error";
  }
  return "error";
}

SolveStatus status_from_string(const std::string& s) {
  std::string l;
  for (char c : s) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "optimal") return SolveStatus::Optimal;
  if (l == "gap_reached") return SolveStatus::GapReached;
  if (l == "infeasible") return SolveStatus::Infeasible;
  if (l == "unbounded") return SolveStatus::Unbounded;
  if (l == "time_limit" || l == "stopped") return SolveStatus::TimeLimit;
  return SolveStatus::Error;
}

double SolveResult::value(const MilpModel& m, const std::string& name) const {
  auto idx = m.find(name);
  if (!idx) throw SolverError(fmt::format("unknown variable {}", name));
  if (!has_solution()) throw SolverError("no solution available");
  return values.at(static_cast<std::size_t>(*idx));
}

std::map<std::string, double> SolveResult::named_values(const MilpModel& m) const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < values.size(); ++i) out[m.variables()[i].name] = values[i];
  return out;
}

SolveResult HighsBackend::solve(const SolveRequest& req) const {
  if (!req.model) throw SolverError("highs: request has no model");
  const auto t0 = Clock::now();
  auto res = run_highs(req, true);
  polish(req, res, *this);
  res.wall_time = seconds_since(t0);
  return res;
}

SubprocessBackend::SubprocessBackend(std::string command_template) : command_(std::move(command_template)) {}

SolveResult SubprocessBackend::solve(const SolveRequest& req) const {
  if (!req.model) throw SolverError("subprocess: request has no model");
  const MilpModel& m = *req.model;
  const auto t0 = Clock::now();
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() /
                   fmt::format("tepcvsr-{}-{}", static_cast<long>(::getpid()), temp_counter.fetch_add(1));
  fs::create_directories(dir);
  const auto lp_path = dir / "model.lp";
  const auto sol_path = dir / "model.sol";
  {
    std::ofstream out(lp_path);
    if (!out) throw SolverError(fmt::format("subprocess: cannot write {}", lp_path.string()));
    write_lp(m, out);
  }
  std::string cmd = command_;
  replace_all(cmd, "{lp}", shell_quote(lp_path.string()));
  replace_all(cmd, "{sol}", shell_quote(sol_path.string()));
  replace_all(cmd, "{time}", fmt::format("{}", req.time_limit));
  replace_all(cmd, "{gap}", fmt::format("{}", req.relative_gap));
  const int rc = std::system((cmd + " > " + shell_quote((dir / "solver.log").string()) + " 2>&1").c_str());

  SolveResult res;
  if (!fs::exists(sol_path)) {
    std::string log;
    std::ifstream lf(dir / "solver.log");
    std::getline(lf, log, '\0');
    fs::remove_all(dir);
    throw SolverError(fmt::format("subprocess backend '{}' produced no solution file (exit {}): {}", command_, rc, log));
  }
  const auto file = read_solution_file(sol_path);
  fs::remove_all(dir);
  res.status = file.status.empty() ? (rc == 0 ? SolveStatus::Optimal : SolveStatus::Error) : status_from_string(file.status);
  if (res.status == SolveStatus::Optimal || res.status == SolveStatus::GapReached || res.status == SolveStatus::TimeLimit) {
    if (!file.values.empty() || m.variables().empty()) {
      res.values.assign(m.variables().size(), 0.0);
      for (const auto& [name, v] : file.values) {
        auto idx = m.find(name);
        if (!idx) throw SolverError(fmt::format("subprocess: solution names unknown variable {}", name));
        res.values[static_cast<std::size_t>(*idx)] = v;
      }
      res.objective = m.evaluate_objective(res.values);
      res.bound = file.bound.value_or(res.objective);
    } else if (res.status == SolveStatus::TimeLimit) {
      res.message = "time limit without a feasible point";
    } else {
      throw SolverError(fmt::format("subprocess backend '{}' reported {} but wrote no values", command_, file.status));
    }
  }
  res.wall_time = seconds_since(t0);
  return res;
}

std::unique_ptr<SolverBackend> make_backend(const std::string& spec) {
  if (spec.empty() || spec == "highs") return std::make_unique<HighsBackend>();
  if (spec.rfind("subprocess", 0) == 0) {
    if (spec.size() > 11 && spec[10] == ':') return std::make_unique<SubprocessBackend>(spec.substr(11));
    if (spec != "subprocess") throw SolverError(fmt::format("unknown backend '{}'", spec));
    const char* env = std::getenv("TEPCVSR_SOLVER");
    const std::string exe = env && *env ? env : TEPCVSR_LPSOLVE_DEFAULT;
    if (exe.find('/') != std::string::npos && !std::filesystem::exists(exe)) {
      throw SolverError(fmt::format("subprocess backend: solver executable '{}' not found", exe));
    }
    return std::make_unique<SubprocessBackend>(shell_quote(exe) + " {lp} {sol} --time-limit {time} --gap {gap}");
  }
  throw SolverError(fmt::format("unknown backend '{}' (expected highs or subprocess)", spec));
}

std::unique_ptr<SolverBackend> default_backend() { return std::make_unique<HighsBackend>(); }

SolveResult solve(const SolveRequest& req, const SolverBackend& backend) {
  if (!req.model) throw SolverError("solve request has no model");
  if (!(req.time_limit > 0.0)) throw SolverError("time limit must be positive");
  if (req.relative_gap < 0.0) throw SolverError("relative gap must be >= 0");
  return backend.solve(req);
}

SolveResult solve(const SolveRequest& req) { return solve(req, HighsBackend{}); }

MilpModel relaxed_copy(const MilpModel& m, BinaryTreatment mode, const std::vector<double>& fix_at) {
  MilpModel copy = m;
  for (std::size_t i = 0; i < copy.variables().size(); ++i) {
    const auto& v = copy.variables()[i];
    if (v.kind != VarKind::Binary) continue;
    const int idx = static_cast<int>(i);
    if (mode == BinaryTreatment::Fix) {
      double val = i < fix_at.size() ? std::round(fix_at[i]) : 0.0;
      val = std::clamp(val, v.lower, v.upper);
      copy.set_bounds(idx, val, val);
    }
    copy.set_kind(idx, VarKind::Continuous);
  }
  return copy;
}

SolveResult solve_lp_relaxation(const SolveRequest& req, BinaryTreatment mode, const SolverBackend& backend,
                                const std::vector<double>& fix_at) {
  if (!req.model) throw SolverError("solve request has no model");
  const MilpModel lp = relaxed_copy(*req.model, mode, fix_at);
  SolveRequest r = req;
  r.model = &lp;
  r.polish = false;
  return solve(r, backend);
}

SolutionFile parse_solution(const std::string& text) {
  SolutionFile out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    const std::string head = tok[0];
    if (head == "status" && tok.size() == 2) {
      out.status = to_string(status_from_string(tok[1]));
      continue;
    }
    if ((head == "objective" || head == "bound") && tok.size() == 2) {
      auto v = to_double(tok[1]);
      if (!v) throw ParseError(fmt::format("bad {} value '{}'", head, tok[1]), lineno);
      (head == "objective" ? out.objective : out.bound) = *v;
      continue;
    }
    if (head == "Optimal" || head == "Infeasible" || head == "Unbounded" || head == "Stopped") {
      out.status = to_string(status_from_string(head));
      if (auto v = to_double(tok.back())) out.objective = *v;
      continue;
    }
    if (tok.size() == 2) {
      auto v = to_double(tok[1]);
      if (!v) throw ParseError(fmt::format("bad value '{}' for {}", tok[1], head), lineno);
      out.values[head] = *v;
      continue;
    }
    if (tok.size() >= 3 && is_integer_token(tok[0])) {
      auto v = to_double(tok[2]);
      if (!v) throw ParseError(fmt::format("bad value '{}' for {}", tok[2], tok[1]), lineno);
      out.values[tok[1]] = *v;
      continue;
    }
    throw ParseError(fmt::format("unrecognised solution line '{}'", line), lineno);
  }
  return out;
}

SolutionFile read_solution_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SolverError(fmt::format("cannot read solution file {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_solution(ss.str());
}

std::string format_solution(const MilpModel& m, const SolveResult& r) {
  std::string out = fmt::format("status {}\n", to_string(r.status));
  if (r.has_solution()) {
    out += fmt::format("objective {:.17g}\nbound {:.17g}\n", r.objective, r.bound);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      out += fmt::format("{} {:.17g}\n", m.variables()[i].name, r.values[i]);
    }
  }
  return out;
}

}  // namespace tepcvsr
