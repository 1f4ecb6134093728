#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tepcvsr/milp_model.hpp"
#include "tepcvsr/problem.hpp"

namespace tepcvsr {

/// Susceptance deviation range of a series reactor with reactance in [x_v_min, x_v_max] on a
/// branch of reactance x_k. Both bounds are <= 0 and b_min <= b_max.
struct SusceptanceRange {
  double b_min = 0.0;
  double b_max = 0.0;
};

SusceptanceRange cvsr_susceptance_bounds(double x_k, double x_v_min, double x_v_max);

/// Disjunctive constants in per unit: m_k gates the w bounds, m_prime the flow equations.
struct BigM {
  double m_k = 0.0;
  double m_prime = 0.0;
};

BigM big_m_values(double b_k, double b_v_min, double theta_max = kThetaMax);

/// cost / (1 + rate)^(year - 1)
double discounted_cost(double cost, int year, double rate);
/// Sum of 1/(1+rate)^(y-1) for y = first_year .. first_year + years - 1.
double discounted_annuity(int first_year, int years, double rate);

/// Committed transmission lines (candidate ids) and CVSR sites (branch ids).
struct BuildSet {
  std::set<int> lines;
  std::set<int> cvsrs;
  bool empty() const { return lines.empty() && cvsrs.empty(); }
  friend bool operator==(const BuildSet&, const BuildSet&) = default;
};

/// Base-case generator outputs, MW, keyed by (block, stage) then generator id.
struct DispatchSnapshot {
  std::map<std::pair<int, int>, std::map<int, double>> pg;
  double at(int block, int stage, int gen) const;
  bool has(int block, int stage) const { return pg.count({block, stage}) != 0; }
};

enum class ObjectiveKind {
  Planning,          // discounted incremental investment + discounted base-state generation cost
  RepairInvestment,  // discounted incremental investment only
  SlackSum,          // total thermal violation, MW
  HourlyCost,        // generation cost of the included states, $/h
};

/// Scope of one model instance. All integrated, master, repair, subproblem and ranking models are
/// produced by the same builder with different scopes.
struct BuildOptions {
  std::vector<int> stages;         // stages carrying build variables, ascending
  std::vector<StateKey> states;    // operating states
  BuildSet prior;                  // builds committed before the first stage in scope
  std::optional<BuildSet> fixed;   // builds fixed to exactly this set in every stage in scope
  ObjectiveKind objective = ObjectiveKind::Planning;
  bool soft_thermal = false;       // thermal limits relaxed by slacks; requires fixed builds
  std::optional<DispatchSnapshot> fixed_dispatch;  // base dispatch given as constants
  bool redispatch_all = false;     // every generator free in every state (contingency OPF)
  bool allow_cvsr = true;          // false treats the CVSR site set as empty
  std::optional<double> override_m_k;  // test hook: replaces every M_k (per unit)
};

/// Options for the full multi-stage integrated problem over all states.
BuildOptions integrated_options(const PlanningProblem& p, bool allow_cvsr = true);

/// Linear expression for the angle difference across a branch.
struct ReformulationVars {
  int w = -1;
  int z = -1;
  int y = -1;
  int delta = -1;
  std::vector<Term> theta;  // theta_from - theta_to
};

/// Adds the CVSR reformulation rows for one (site, state): the two big-M pairs on w, the
/// N-scaled z envelope and the theta-linking pair. Flows are in MW, so susceptances are
/// multiplied by base_mva and m_k is given in MW. Returns the ids of the eight rows.
std::vector<ConstraintId> emit_reformulation(MilpModel& model, const CvsrSite& site, int n_kcbt,
                                             const ReformulationVars& v, double m_k_mw, double base_mva,
                                             const std::string& tag, double theta_max = kThetaMax);

/// Builds the MILP for a scope. Throws ValidationError when a state has infeasible data
/// (generation capacity below demand, p_min > p_max) and ModelError on inconsistent scopes.
MilpModel build_model(const PlanningProblem& p, const BuildOptions& opt);
MilpModel build_integrated_model(const PlanningProblem& p, bool allow_cvsr = true,
                                 std::optional<double> override_m_k = std::nullopt);

/// Susceptance of a branch in the model, MW per radian.
double flow_coefficient(const PlanningProblem& p, double susceptance_pu);
/// M_k in MW for a CVSR site, honouring an override.
double cvsr_big_m_mw(const PlanningProblem& p, const CvsrSite& site, std::optional<double> override_pu = {});

struct CostItem {
  std::string item;  // "line:<id>", "cvsr:<branch>", "operating"
  std::string type;  // line | cvsr | operating
  int stage = 1;
  double undiscounted = 0.0;
  double discounted = 0.0;
};

struct StagePlan {
  int stage = 1;
  int start_year = 1;
  std::vector<int> built_lines;      // new in this stage
  std::vector<int> installed_cvsrs;  // new in this stage
  BuildSet cumulative;
  double line_cost = 0.0;  // discounted
  double cvsr_cost = 0.0;
  double operating_cost = 0.0;
};

struct LinearizationAudit {
  int tuples_checked = 0;
  int active_tuples = 0;      // delta = 1, N = 1, |theta| > 1e-9
  double worst_excess = 0.0;  // largest distance of w/theta outside [b_min, b_max], per unit
  double worst_inactive_w = 0.0;  // largest |w| (per unit) where delta = 0 or N = 0
  double worst_balance = 0.0;     // largest nodal mismatch, per unit
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

struct BigMAudit {
  int constraints_checked = 0;
  double min_slack = 0.0;  // smallest margin below M among deactivated constraints, MW
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

/// Build decisions, dispatch and costs recovered from a solved model.
struct ExpansionPlan {
  std::string mode;  // integrated | decomposed
  std::vector<StagePlan> stages;
  std::vector<CostItem> costs;
  DispatchSnapshot dispatch;
  double line_investment = 0.0;  // all discounted
  double cvsr_investment = 0.0;
  double operating = 0.0;
  double total = 0.0;
  bool optimal = true;
  LinearizationAudit audit;

  BuildSet final_builds() const { return stages.empty() ? BuildSet{} : stages.back().cumulative; }
};

/// Rounds binaries (error beyond 1e-4 from an integer), reads builds and dispatch, recomputes the
/// cost breakdown in closed form and runs the linearization audit. Throws SolverError on an
/// integrality violation and AuditError when the audit fails.
ExpansionPlan extract_plan(const MilpModel& model, const std::vector<double>& values, const PlanningProblem& p,
                           const BuildOptions& opt);

/// Linearization and nodal-balance audit of a solution (no throwing).
LinearizationAudit audit_linearization(const MilpModel& model, const std::vector<double>& values,
                                       const PlanningProblem& p, const BuildOptions& opt);

/// Checks that every deactivated disjunctive row sits at least `margin` MW inside its M bound.
BigMAudit audit_big_m(const MilpModel& model, const std::vector<double>& values, const PlanningProblem& p,
                      const BuildOptions& opt, double margin = 1e-6);

/// Discounted costs of a build trajectory plus a dispatch, in closed form.
struct CostBreakdown {
  std::vector<CostItem> items;
  double line = 0.0;
  double cvsr = 0.0;
  double operating = 0.0;
  double total() const { return line + cvsr + operating; }
};
/// `stages` and `cumulative` run in parallel; `before_first` is what was built before stages.front().
CostBreakdown compute_costs(const PlanningProblem& p, const std::vector<int>& stages,
                            const std::vector<BuildSet>& cumulative, const DispatchSnapshot& dispatch,
                            const BuildSet& before_first = {});

/// Hourly generation cost of the base dispatch in one block and stage, $/h.
double hourly_cost(const PlanningProblem& p, const DispatchSnapshot& dispatch, int block, int stage);

}  // namespace tepcvsr
