#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "tepcvsr/netcase.hpp"

namespace tepcvsr {

/// Maximum angle difference across a branch, radians.
inline constexpr double kThetaMax = std::numbers::pi / 3.0;

struct LoadBlock {
  std::string name;
  double scale = 1.0;  // fraction of the stage's peak demand
  double hours = 0.0;  // duration per year
};

struct Stage {
  int index = 1;       // 1-based
  int start_year = 1;  // year index used for discounting (t in (1+d)^(t-1))
  int years = 5;
  double load_multiplier = 1.0;
  std::vector<LoadBlock> blocks;
};

struct CandidateLine {
  int id = 0;  // unique across existing branches and candidates
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;    // p.u.
  double susceptance = 0.0;  // p.u.
  double rate_a = 0.0;       // MW, multiplier applied
  double rate_b = 0.0;       // MW, multiplier applied
  double cost = 0.0;         // $
  std::optional<int> parallel_to;
};

struct CvsrSite {
  int branch = 0;
  double range_fraction = 0.2;
  double x_v_min = 0.0;  // p.u.
  double x_v_max = 0.0;  // p.u.
  double b_v_min = 0.0;  // p.u., <= 0
  double b_v_max = 0.0;  // p.u., <= 0
  double cost = 0.0;     // $
};

enum class OperatingCostMode {
  Literal,  // A_bt spans the whole stage, discounted once at the stage start year
  PerYear,  // yearly operating cost discounted year by year over the stage
};

/// One operating condition: the outaged branch (0 = base case), load block and stage (both 1-based).
struct StateKey {
  int outage = 0;
  int block = 1;
  int stage = 1;
  auto operator<=>(const StateKey&) const = default;
};

/// Full planning instance. Immutable once returned by load_problem.
class PlanningProblem {
 public:
  NetworkCase network;
  std::vector<Stage> stages;
  std::vector<CandidateLine> candidates;
  std::vector<CvsrSite> cvsr_sites;
  std::vector<int> contingencies;           // outaged branch ids (Ω_c without the base state)
  std::vector<int> critical_contingencies;  // explicit list; empty means "rank and take the top critical_count"
  int critical_count = 2;
  std::vector<std::vector<int>> critical_blocks;  // per stage, 1-based block indices
  std::set<int> redispatchable;                   // generator ids free to move after a contingency
  std::set<int> islanding;                        // branches excluded from the contingency set
  double discount_rate = 0.05;
  double hours_per_year = 8760.0;
  double rating_multiplier = 1.0;
  bool short_term_rating_in_contingency = true;
  OperatingCostMode operating_mode = OperatingCostMode::Literal;
  int max_repair_iterations = 50;
  double cvsr_cost_per_kva = 10.0;

  int num_blocks(int stage) const { return static_cast<int>(stages.at(static_cast<std::size_t>(stage - 1)).blocks.size()); }
  const Stage& stage(int t) const { return stages.at(static_cast<std::size_t>(t - 1)); }

  /// Ω_c × Ω_b × Ω_T with the base state first in every (block, stage).
  std::vector<StateKey> all_states() const;
  /// Base states only, for every block of the given stage (or of all stages when stage == 0).
  std::vector<StateKey> base_states(int stage = 0) const;

  /// Demand of one load in the given block and stage, MW.
  double demand(const Load& load, int block, int stage) const;
  double total_demand(int block, int stage) const;
  /// Thermal limit of an existing branch in a state, MW (multiplier and short-term rule applied).
  double rating(const Branch& br, const StateKey& s) const;
  double rating(const CandidateLine& cl, const StateKey& s) const;
  /// N_kcbt: 0 when branch k is the outaged element of state s.
  static int in_service(int branch, const StateKey& s) { return branch == s.outage ? 0 : 1; }

  bool is_redispatchable(int gen) const { return redispatchable.count(gen) != 0; }
  const CandidateLine* find_candidate(int id) const;
  const CvsrSite* find_cvsr(int branch) const;

  /// Discount factor 1/(1+d)^(t-1) for a year index.
  double discount(int year) const;
  /// Multiplier turning an hourly cost ($/h) in block b of stage t into discounted stage cost.
  double operating_weight(int block, int stage) const;
  double operating_weight_undiscounted(int block, int stage) const;
};

/// Builds a planning problem from a validated case and a JSON config.
/// Throws ValidationError on any inconsistency between the two.
PlanningProblem load_problem(const NetworkCase& network, const nlohmann::json& config);
PlanningProblem load_problem_file(const NetworkCase& network, const std::filesystem::path& config_path);

/// Default blocks (peak, normal, low) used when the config has none.
std::vector<LoadBlock> default_blocks();

}  // namespace tepcvsr
