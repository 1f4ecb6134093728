#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tepcvsr/formulation.hpp"
#include "tepcvsr/solver.hpp"

namespace tepcvsr {

/// Settings shared by every solve issued by the planning algorithms.
struct PlannerOptions {
  const SolverBackend* backend = nullptr;  // nullptr = in-process HiGHS
  double relative_gap = 1e-8;
  double time_limit = 600.0;  // seconds per solve
  int threads = 1;
  int jobs = 1;               // parallel security subproblems
  bool allow_cvsr = true;
  std::optional<int> cc_count;          // overrides the problem's critical contingency count
  std::optional<double> override_m_k;   // test hook, per unit
  double slack_tolerance = 1e-4;        // MW

  SolveResult run(const MilpModel& m) const;
};

struct RankedContingency {
  int branch = 0;
  double cost = 0.0;     // $/h, +inf when the outage OPF is infeasible
  double loading = 0.0;  // largest |flow| / rating over in-service branches
};

struct ContingencyRanking {
  int stage = 1;
  int block = 1;  // the peak block used for the OPF runs
  std::vector<RankedContingency> entries;  // worst first
  std::set<int> islanding;
};

/// DC OPF per surviving single-branch outage at the stage's peak block with all generators free
/// and contingency ratings; sorted by cost, then loading (within 1e-6), then branch id.
ContingencyRanking rank_contingencies(const PlanningProblem& p, const BuildSet& plan_so_far, const PlannerOptions& po,
                                      int stage = 1);

/// The contingencies placed in the stage-t master: the configured list, else the top count of the ranking.
std::vector<int> critical_contingencies(const PlanningProblem& p, const ContingencyRanking& ranking,
                                        const PlannerOptions& po);

BuildOptions master_options(const PlanningProblem& p, int stage, const BuildSet& prior, const std::vector<int>& cc,
                            const PlannerOptions& po);
MilpModel build_master(const PlanningProblem& p, int stage, const BuildSet& prior, const std::vector<int>& cc,
                       const PlannerOptions& po);

BuildOptions security_options(const PlanningProblem& p, int stage, int block, int contingency, const BuildSet& builds,
                              const DispatchSnapshot& dispatch, const PlannerOptions& po);
MilpModel build_security_subproblem(const PlanningProblem& p, int stage, int block, int contingency,
                                    const BuildSet& builds, const DispatchSnapshot& dispatch, const PlannerOptions& po);

struct BranchViolation {
  int branch = 0;        // existing branch or candidate id
  bool candidate = false;
  double below = 0.0;    // u1, MW beyond the negative limit
  double above = 0.0;    // u2, MW beyond the positive limit
};

struct SecurityEntry {
  int contingency = 0;  // 0 = base state
  int block = 1;
  int stage = 1;
  double total_slack = 0.0;  // MW
  int worst_branch = 0;      // 0 when no violation
  std::vector<BranchViolation> violations;
};

struct SecurityReport {
  std::vector<SecurityEntry> entries;
  double max_slack = 0.0;
  std::optional<SecurityEntry> worst;  // argmax slack, ties by lowest contingency id then block, stage
  LinearizationAudit audit;            // over every subproblem solution

  bool secure(double tol = 1e-4) const { return max_slack <= tol; }
};

/// Runs the security subproblem for every (state, block) of the listed stages.
SecurityReport check_security(const PlanningProblem& p, const std::vector<int>& stages,
                              const std::vector<BuildSet>& builds, const DispatchSnapshot& dispatch,
                              const PlannerOptions& po);
/// Full N-1 sweep of a plan over all its stages.
SecurityReport verify_plan(const PlanningProblem& p, const ExpansionPlan& plan, const PlannerOptions& po);

struct StageLog {
  int stage = 1;
  std::vector<int> critical;
  int repair_iterations = 0;
  std::vector<std::string> repairs;  // "contingency c block b: +line_x +cvsr_y"
};

struct DecompositionResult {
  ExpansionPlan plan;
  std::vector<SecurityReport> history;
  std::vector<StageLog> log;
  std::vector<ContingencyRanking> rankings;
  double wall_time = 0.0;
};

/// Stage-by-stage master, N-1 check and worst-contingency repair loop.
/// Throws ValidationError when a contingency cannot be repaired and ModelError when the
/// iteration cap is exceeded.
DecompositionResult iterative_plan(const PlanningProblem& p, const PlannerOptions& po);

/// Integrated MILP solve plus extraction.
struct IntegratedResult {
  ExpansionPlan plan;
  SolveResult solve;
  BigMAudit big_m;
  double wall_time = 0.0;
};
IntegratedResult integrated_plan(const PlanningProblem& p, const PlannerOptions& po);

struct OracleTrajectory {
  std::vector<BuildSet> cumulative;  // one per stage
  bool feasible = false;
  double investment = 0.0;
  double operating = 0.0;
  double objective = 0.0;
};

struct OracleResult {
  std::vector<OracleTrajectory> trajectories;
  std::optional<std::size_t> best;  // index into trajectories
  double best_objective = 0.0;
  long lp_solves = 0;
};

/// Brute force over every monotone build trajectory. For each one the CVSR flow sign of every
/// active (site, state) tuple is enumerated and a plain DC LP without any big-M row is solved.
/// The LP splits into independent (block, stage) groups, which are enumerated separately.
/// Throws ValidationError when the search space exceeds the cap.
OracleResult enumerate_plans_oracle(const PlanningProblem& p, const PlannerOptions& po);

inline constexpr int kOracleMaxBuildBinaries = 12;
inline constexpr int kOracleMaxStages = 2;
inline constexpr long kOracleMaxLps = 200000;

}  // namespace tepcvsr
