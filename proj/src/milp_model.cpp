#include "tepcvsr/milp_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "tepcvsr/error.hpp"

namespace tepcvsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string g17(double v) { return fmt::format("{:.17g}", v); }

std::string state_suffix(const VarKey& k) { return fmt::format("_c{}_b{}_t{}", k.state, k.block, k.stage); }

}  // namespace

std::string var_name(const VarKey& key) {
  switch (key.role) {
    case Role::Generation: return fmt::format("Pg_n{}", key.element) + state_suffix(key);
    case Role::ExistingFlow: return fmt::format("PE_k{}", key.element) + state_suffix(key);
    case Role::CandidateFlow: return fmt::format("PC_k{}", key.element) + state_suffix(key);
    case Role::Angle: return fmt::format("th_i{}", key.element) + state_suffix(key);
    case Role::CvsrFlow: return fmt::format("w_k{}", key.element) + state_suffix(key);
    case Role::CvsrAngle: return fmt::format("z_k{}", key.element) + state_suffix(key);
    case Role::CvsrSign: return fmt::format("y_k{}", key.element) + state_suffix(key);
    case Role::BuildLine: return fmt::format("alpha_k{}_t{}", key.element, key.stage);
    case Role::BuildCvsr: return fmt::format("delta_k{}_t{}", key.element, key.stage);
    case Role::SlackE1: return fmt::format("uE1_k{}", key.element) + state_suffix(key);
    case Role::SlackE2: return fmt::format("uE2_k{}", key.element) + state_suffix(key);
    case Role::SlackC1: return fmt::format("uC1_k{}", key.element) + state_suffix(key);
    case Role::SlackC2: return fmt::format("uC2_k{}", key.element) + state_suffix(key);
  }
  return "?";
}

int MilpModel::add_variable(Variable v) {
  if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0)) {
    throw ModelError(fmt::format("binary variable {} has bounds [{}, {}] outside [0,1]", v.name, v.lower, v.upper));
  }
  const int idx = static_cast<int>(vars_.size());
  if (!by_name_.emplace(v.name, idx).second) throw ModelError(fmt::format("duplicate variable {}", v.name));
  vars_.push_back(std::move(v));
  return idx;
}

int MilpModel::add_variable(const VarKey& key, VarKind kind, double lower, double upper, double objective) {
  const int idx = add_variable(Variable{var_name(key), kind, lower, upper, objective});
  keyed_.emplace(key, idx);
  return idx;
}

ConstraintId MilpModel::add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs) {
  for (const auto& t : terms) {
    if (t.var < 0 || static_cast<std::size_t>(t.var) >= vars_.size()) {
      throw ModelError(fmt::format("constraint {} references undeclared variable index {}", name, t.var));
    }
  }
  // Merge duplicate columns so writers never emit a variable twice in one row.
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> merged;
  for (const auto& t : terms) {
    if (!merged.empty() && merged.back().var == t.var) {
      merged.back().coef += t.coef;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
  rows_.push_back({std::move(name), std::move(merged), sense, rhs});
  return static_cast<ConstraintId>(rows_.size() - 1);
}

std::optional<int> MilpModel::find(const VarKey& key) const {
  auto it = keyed_.find(key);
  if (it == keyed_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> MilpModel::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

int MilpModel::require(const VarKey& key) const {
  auto idx = find(key);
  if (!idx) throw ModelError(fmt::format("variable {} is not declared", var_name(key)));
  return *idx;
}

void MilpModel::set_bounds(int var, double lower, double upper) {
  auto& v = vars_.at(static_cast<std::size_t>(var));
  if (v.kind == VarKind::Binary && (lower < 0.0 || upper > 1.0)) {
    throw ModelError(fmt::format("binary variable {} cannot take bounds [{}, {}]", v.name, lower, upper));
  }
  v.lower = lower;
  v.upper = upper;
}

std::size_t MilpModel::num_binaries() const {
  return static_cast<std::size_t>(
      std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) { return v.kind == VarKind::Binary; }));
}

double MilpModel::evaluate_objective(const std::vector<double>& values) const {
  double sum = offset_;
  for (std::size_t i = 0; i < vars_.size(); ++i) sum += vars_[i].objective * values.at(i);
  return sum;
}

double MilpModel::max_violation(const std::vector<double>& values) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    worst = std::max({worst, vars_[i].lower - values.at(i), values.at(i) - vars_[i].upper});
  }
  for (const auto& r : rows_) {
    double lhs = 0.0;
    for (const auto& t : r.terms) lhs += t.coef * values.at(static_cast<std::size_t>(t.var));
    switch (r.sense) {
      case Sense::LessEqual: worst = std::max(worst, lhs - r.rhs); break;
      case Sense::GreaterEqual: worst = std::max(worst, r.rhs - lhs); break;
      case Sense::Equal: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
    }
  }
  return worst;
}

void MilpModel::check_consistency() const {
  for (const auto& v : vars_) {
    if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0)) {
      throw ModelError(fmt::format("binary variable {} has bounds outside [0,1]", v.name));
    }
    if (v.lower > v.upper) throw ModelError(fmt::format("variable {} has empty bounds [{}, {}]", v.name, v.lower, v.upper));
  }
  for (const auto& r : rows_) {
    for (const auto& t : r.terms) {
      if (t.var < 0 || static_cast<std::size_t>(t.var) >= vars_.size()) {
        throw ModelError(fmt::format("constraint {} references undeclared variable", r.name));
      }
    }
  }
}

void write_lp(const MilpModel& m, std::ostream& out) {
  const auto& vars = m.variables();
  auto emit_terms = [&](std::vector<std::pair<int, double>> terms) {
    if (terms.empty()) {
      out << " 0 " << vars.front().name;
      return;
    }
    int on_line = 0;
    for (const auto& [var, coef] : terms) {
      out << (coef < 0 ? " - " : " + ") << g17(std::abs(coef)) << ' ' << vars[static_cast<std::size_t>(var)].name;
      if (++on_line == 6) {
        out << "\n ";
        on_line = 0;
      }
    }
  };

  out << "\\ planning model\nMinimize\n obj:";
  std::vector<std::pair<int, double>> obj;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].objective != 0.0) obj.emplace_back(static_cast<int>(i), vars[i].objective);
  }
  if (obj.empty() && m.objective_offset() == 0.0 && !vars.empty()) obj.emplace_back(0, 0.0);
  if (!obj.empty()) emit_terms(obj);
  if (m.objective_offset() != 0.0) {
    out << (m.objective_offset() < 0 ? " - " : " + ") << g17(std::abs(m.objective_offset()));
  }
  out << "\nSubject To\n";
  for (const auto& r : m.constraints()) {
    out << ' ' << r.name << ':';
    std::vector<std::pair<int, double>> terms;
    for (const auto& t : r.terms) terms.emplace_back(t.var, t.coef);
    emit_terms(terms);
    out << (r.sense == Sense::LessEqual ? " <= " : r.sense == Sense::GreaterEqual ? " >= " : " = ") << g17(r.rhs)
        << '\n';
  }
  out << "Bounds\n";
  for (const auto& v : vars) {
    const bool lo_inf = std::isinf(v.lower) && v.lower < 0;
    const bool up_inf = std::isinf(v.upper) && v.upper > 0;
    if (lo_inf && up_inf) {
      out << ' ' << v.name << " free\n";
    } else if (v.lower == v.upper) {
      out << ' ' << v.name << " = " << g17(v.lower) << '\n';
    } else if (lo_inf) {
      out << " -inf <= " << v.name << " <= " << g17(v.upper) << '\n';
    } else if (up_inf) {
      if (v.lower != 0.0) out << ' ' << v.name << " >= " << g17(v.lower) << '\n';
    } else {
      out << ' ' << g17(v.lower) << " <= " << v.name << " <= " << g17(v.upper) << '\n';
    }
  }
  bool any_int = false;
  for (const auto& v : vars) {
    if (v.kind != VarKind::Binary) continue;
    if (!any_int) out << "General\n";
    any_int = true;
    out << ' ' << v.name << '\n';
  }
  out << "End\n";
}

std::string to_lp_string(const MilpModel& m) {
  std::ostringstream ss;
  write_lp(m, ss);
  return ss.str();
}

void write_mps(const MilpModel& m, std::ostream& out) {
  const auto& vars = m.variables();
  const auto& rows = m.constraints();
  std::vector<std::vector<std::pair<int, double>>> cols(vars.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& t : rows[r].terms) cols[static_cast<std::size_t>(t.var)].emplace_back(static_cast<int>(r), t.coef);
  }

  out << "NAME planning\nROWS\n N obj\n";
  for (const auto& r : rows) {
    out << ' ' << (r.sense == Sense::LessEqual ? 'L' : r.sense == Sense::GreaterEqual ? 'G' : 'E') << ' ' << r.name
        << '\n';
  }
  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const bool is_int = vars[j].kind == VarKind::Binary;
    if (is_int != in_int) {
      out << " MARKER" << marker++ << " 'MARKER' " << (is_int ? "'INTORG'" : "'INTEND'") << '\n';
      in_int = is_int;
    }
    const auto& name = vars[j].name;
    out << ' ' << name << " obj " << g17(vars[j].objective) << '\n';
    for (const auto& [r, coef] : cols[j]) out << ' ' << name << ' ' << rows[static_cast<std::size_t>(r)].name << ' ' << g17(coef) << '\n';
  }
  if (in_int) out << " MARKER" << marker++ << " 'MARKER' 'INTEND'\n";
  out << "RHS\n";
  if (m.objective_offset() != 0.0) out << " rhs obj " << g17(-m.objective_offset()) << '\n';
  for (const auto& r : rows) {
    if (r.rhs != 0.0) out << " rhs " << r.name << ' ' << g17(r.rhs) << '\n';
  }
  out << "BOUNDS\n";
  for (const auto& v : vars) {
    const bool lo_inf = std::isinf(v.lower) && v.lower < 0;
    const bool up_inf = std::isinf(v.upper) && v.upper > 0;
    if (lo_inf && up_inf) {
      out << " FR bnd " << v.name << '\n';
    } else if (v.lower == v.upper) {
      out << " FX bnd " << v.name << ' ' << g17(v.lower) << '\n';
    } else {
      if (lo_inf) {
        out << " MI bnd " << v.name << '\n';
      } else {
        out << " LO bnd " << v.name << ' ' << g17(v.lower) << '\n';
      }
      if (!up_inf) out << " UP bnd " << v.name << ' ' << g17(v.upper) << '\n';
    }
  }
  out << "ENDATA\n";
}

std::string to_mps_string(const MilpModel& m) {
  std::ostringstream ss;
  write_mps(m, ss);
  return ss.str();
}

}  // namespace tepcvsr
