#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tepcvsr/milp_model.hpp"

namespace tepcvsr {

enum class SolveStatus { Optimal, GapReached, Infeasible, Unbounded, TimeLimit, Error };

std::string to_string(SolveStatus s);
SolveStatus status_from_string(const std::string& s);

struct SolveRequest {
  const MilpModel* model = nullptr;
  double time_limit = 600.0;  // seconds
  double relative_gap = 1e-8;
  double integrality_tol = 1e-6;
  int threads = 1;
  /// After a MIP solve, fix the integers at their rounded values and re-solve the LP.
  bool polish = true;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Error;
  double objective = 0.0;
  double bound = 0.0;
  std::vector<double> values;  // aligned with model variables
  double wall_time = 0.0;
  std::string message;

  bool has_solution() const { return !values.empty(); }
  bool optimal() const { return status == SolveStatus::Optimal || status == SolveStatus::GapReached; }
  /// Value of a named variable (throws SolverError when unknown or no solution).
  double value(const MilpModel& m, const std::string& name) const;
  std::map<std::string, double> named_values(const MilpModel& m) const;
};

class SolverBackend {
 public:
  virtual ~SolverBackend() = default;
  virtual std::string name() const = 0;
  virtual SolveResult solve(const SolveRequest& req) const = 0;
};

/// In-process HiGHS.
class HighsBackend : public SolverBackend {
 public:
  std::string name() const override { return "highs"; }
  SolveResult solve(const SolveRequest& req) const override;
};

/// Writes the model as an LP file, runs an executable, reads back a solution file.
/// The command template may use {lp}, {sol}, {time} and {gap}.
class SubprocessBackend : public SolverBackend {
 public:
  explicit SubprocessBackend(std::string command_template);
  std::string name() const override { return "subprocess"; }
  SolveResult solve(const SolveRequest& req) const override;
  const std::string& command() const { return command_; }

 private:
  std::string command_;
};

/// "highs" (default) or "subprocess". The subprocess solver path comes from TEPCVSR_SOLVER when
/// set, otherwise the bundled tepcvsr-lpsolve tool. "subprocess:<template>" sets the command.
std::unique_ptr<SolverBackend> make_backend(const std::string& spec);
std::unique_ptr<SolverBackend> default_backend();

SolveResult solve(const SolveRequest& req, const SolverBackend& backend);
SolveResult solve(const SolveRequest& req);

enum class BinaryTreatment { Relax, Fix };
/// LP solve of the model with binaries relaxed to [0,1] or fixed at `fix_at` (rounded; values
/// outside the vector default to 0).
SolveResult solve_lp_relaxation(const SolveRequest& req, BinaryTreatment mode, const SolverBackend& backend,
                                const std::vector<double>& fix_at = {});
MilpModel relaxed_copy(const MilpModel& m, BinaryTreatment mode, const std::vector<double>& fix_at = {});

/// Solution file: optional "status <s>", "objective <v>", "bound <v>" header lines, then one
/// "name value" pair per line. Lines starting with '#' are ignored; "idx name value ..." rows
/// and a leading "Optimal - objective value X" line are also understood.
struct SolutionFile {
  std::string status;  // empty when absent
  std::optional<double> objective;
  std::optional<double> bound;
  std::map<std::string, double> values;
};
SolutionFile parse_solution(const std::string& text);
SolutionFile read_solution_file(const std::filesystem::path& path);
std::string format_solution(const MilpModel& m, const SolveResult& r);

}  // namespace tepcvsr
