#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tepcvsr {

enum class VarKind { Continuous, Binary };
enum class Sense { LessEqual, GreaterEqual, Equal };

/// Role of a decision variable in the planning model.
enum class Role {
  Generation,    // Pg_n
  ExistingFlow,  // PE_k
  CandidateFlow, // PC_k
  Angle,         // th_i (bus angle)
  CvsrFlow,      // w_k
  CvsrAngle,     // z_k
  CvsrSign,      // y_k
  BuildLine,     // alpha_k
  BuildCvsr,     // delta_k
  SlackE1,
  SlackE2,
  SlackC1,
  SlackC2,
};

/// Structured key of a variable: (role, element, state, block, stage).
/// Element is the generator, branch or bus id; state is the outaged branch id (0 = base).
/// Build variables use state = block = 0.
struct VarKey {
  Role role{};
  int element = 0;
  int state = 0;
  int block = 0;
  int stage = 0;
  auto operator<=>(const VarKey&) const = default;
};

std::string var_name(const VarKey& key);

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = 0.0;
  double objective = 0.0;
};

struct Term {
  int var = 0;
  double coef = 0.0;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

using ConstraintId = int;

/// Solver-agnostic minimization MILP.
class MilpModel {
 public:
  int add_variable(Variable v);
  int add_variable(const VarKey& key, VarKind kind, double lower, double upper, double objective = 0.0);
  ConstraintId add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs);

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return rows_; }
  const Variable& variable(int i) const { return vars_.at(static_cast<std::size_t>(i)); }
  const Constraint& constraint(ConstraintId i) const { return rows_.at(static_cast<std::size_t>(i)); }

  std::optional<int> find(const VarKey& key) const;
  std::optional<int> find(std::string_view name) const;
  /// Like find() but throws ModelError when the variable is not declared.
  int require(const VarKey& key) const;
  const std::map<VarKey, int>& keyed() const { return keyed_; }

  void set_objective_coef(int var, double coef) { vars_.at(static_cast<std::size_t>(var)).objective = coef; }
  void add_objective_coef(int var, double coef) { vars_.at(static_cast<std::size_t>(var)).objective += coef; }
  void set_bounds(int var, double lower, double upper);
  void set_kind(int var, VarKind kind) { vars_.at(static_cast<std::size_t>(var)).kind = kind; }
  double objective_offset() const { return offset_; }
  void add_objective_offset(double v) { offset_ += v; }

  std::size_t num_binaries() const;

  /// Sum of objective coefficients times values plus the offset.
  double evaluate_objective(const std::vector<double>& values) const;
  /// Largest bound or row violation of a point (absolute, in model units).
  double max_violation(const std::vector<double>& values) const;

  /// Throws ModelError if a row references an undeclared variable or a binary has bounds outside [0,1].
  void check_consistency() const;

 private:
  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
  std::unordered_map<std::string, int> by_name_;
  std::map<VarKey, int> keyed_;
  double offset_ = 0.0;
};

/// CPLEX LP format. Coefficients are printed with 17 significant digits.
void write_lp(const MilpModel& m, std::ostream& out);
std::string to_lp_string(const MilpModel& m);
/// Free-format MPS with integer markers.
void write_mps(const MilpModel& m, std::ostream& out);
std::string to_mps_string(const MilpModel& m);

}  // namespace tepcvsr
