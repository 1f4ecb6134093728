#include "tepcvsr/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "tepcvsr/error.hpp"
#include "tepcvsr/formulation.hpp"

namespace tepcvsr {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::set<std::string> kTopLevelKeys = {
    "discount_rate",          "hours_per_year",       "rating_multiplier",   "contingency_rating",
    "operating_cost_mode",    "blocks",               "stages",              "candidate_lines",
    "cvsr_sites",             "cvsr_cost_per_kva",    "contingencies",       "critical_contingencies",
    "redispatchable_generators", "max_repair_iterations", "generator_costs", "description",
};

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ValidationError(fmt::format("config key '{}' must be a number", key));
  return j.at(key).get<double>();
}

int integer(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ValidationError(fmt::format("config key '{}' must be an integer", key));
  return j.at(key).get<int>();
}

std::vector<LoadBlock> parse_blocks(const json& j, double hours_per_year, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ValidationError(where + ": blocks must be a non-empty list");
  std::vector<LoadBlock> out;
  double sum = 0.0;
  for (const auto& b : j) {
    LoadBlock blk;
    blk.name = b.value("name", fmt::format("block{}", out.size() + 1));
    blk.scale = number(b, "scale", 1.0);
    blk.hours = number(b, "hours", 0.0);
    if (blk.scale < 0.0) throw ValidationError(fmt::format("{}: block {} has negative scale", where, blk.name));
    if (blk.hours <= 0.0) throw ValidationError(fmt::format("{}: block {} needs positive hours", where, blk.name));
    sum += blk.hours;
    out.push_back(blk);
  }
  if (std::abs(sum - hours_per_year) > 1e-6 * hours_per_year) {
    throw ValidationError(
        fmt::format("{}: block durations sum to {} h but a year has {} h", where, sum, hours_per_year));
  }
  return out;
}

std::vector<int> parse_id_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be a list of ids");
  std::vector<int> ids;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw ValidationError(what + " must contain integer ids");
    ids.push_back(v.get<int>());
  }
  return ids;
}

void parse_candidates(PlanningProblem& p, const json& list) {
  if (!list.is_array()) throw ValidationError("candidate_lines must be a list");
  const auto& net = p.network;
  int next_id = 0;
  for (const auto& br : net.branches) next_id = std::max(next_id, br.id);
  for (const auto& c : list) {
    CandidateLine cl;
    cl.id = ++next_id;
    double rate_a = 0.0;
    double rate_b = 0.0;
    if (c.contains("parallel_to")) {
      const int ref = c.at("parallel_to").get<int>();
      if (!net.has_branch(ref)) throw ValidationError(fmt::format("candidate parallel_to unknown branch {}", ref));
      const auto& br = net.branch(ref);
      cl.parallel_to = ref;
      cl.from_bus = br.from_bus;
      cl.to_bus = br.to_bus;
      cl.reactance = number(c, "x", br.reactance);
      rate_a = number(c, "rating", br.rate_a);
      rate_b = number(c, "rating_short_term", c.contains("rating") ? rate_a : br.rate_b);
    } else {
      cl.from_bus = integer(c, "from", 0);
      cl.to_bus = integer(c, "to", 0);
      cl.reactance = number(c, "x", 0.0);
      rate_a = number(c, "rating", 0.0);
      rate_b = number(c, "rating_short_term", rate_a);
    }
    if (!net.has_bus(cl.from_bus) || !net.has_bus(cl.to_bus)) {
      throw ValidationError(fmt::format("candidate line {} references unknown bus ({} - {})", cl.id, cl.from_bus, cl.to_bus));
    }
    if (cl.from_bus == cl.to_bus) throw ValidationError(fmt::format("candidate line {} is a self loop", cl.id));
    if (!(cl.reactance > 0.0)) throw ValidationError(fmt::format("candidate line {} needs reactance > 0", cl.id));
    if (!(rate_a > 0.0) || !(rate_b > 0.0)) throw ValidationError(fmt::format("candidate line {} needs a positive rating", cl.id));
    cl.susceptance = 1.0 / cl.reactance;
    cl.rate_a = rate_a * p.rating_multiplier;
    cl.rate_b = rate_b * p.rating_multiplier;
    cl.cost = number(c, "cost", 0.0);
    if (!(cl.cost > 0.0)) throw ValidationError(fmt::format("candidate line {} needs cost > 0", cl.id));
    p.candidates.push_back(cl);
  }
}

CvsrSite make_site(const PlanningProblem& p, int branch, const json& spec) {
  const auto& net = p.network;
  if (!net.has_branch(branch)) throw ValidationError(fmt::format("CVSR site on unknown branch {}", branch));
  const auto& br = net.branch(branch);
  if (!br.in_service) throw ValidationError(fmt::format("CVSR site on out-of-service branch {}", branch));
  CvsrSite s;
  s.branch = branch;
  s.range_fraction = number(spec, "range_fraction", 0.2);
  const double min_fraction = number(spec, "x_min_fraction", 0.0);
  if (s.range_fraction < 0.0 || min_fraction < 0.0 || min_fraction > s.range_fraction) {
    throw ValidationError(fmt::format("CVSR site {}: need 0 <= x_min_fraction <= range_fraction", branch));
  }
  s.x_v_min = min_fraction * br.reactance;
  s.x_v_max = s.range_fraction * br.reactance;
  const auto range = cvsr_susceptance_bounds(br.reactance, s.x_v_min, s.x_v_max);
  s.b_v_min = range.b_min;
  s.b_v_max = range.b_max;
  if (spec.contains("cost")) {
    s.cost = number(spec, "cost", 0.0);
  } else {
    if (std::isinf(br.rate_a)) {
      throw ValidationError(fmt::format("CVSR site {} is on an unlimited branch; give an explicit cost", branch));
    }
    // $/kVA times device kVA (branch MVA rating x range fraction x 1000).
    s.cost = p.cvsr_cost_per_kva * br.rate_a * 1000.0 * s.range_fraction;
  }
  if (s.cost < 0.0) throw ValidationError(fmt::format("CVSR site {} has negative cost", branch));
  return s;
}

void parse_cvsr(PlanningProblem& p, const json& j) {
  std::set<int> seen;
  auto add = [&](CvsrSite s) {
    if (!seen.insert(s.branch).second) throw ValidationError(fmt::format("duplicate CVSR site on branch {}", s.branch));
    p.cvsr_sites.push_back(s);
  };
  if (j.is_string()) {
    if (j.get<std::string>() != "all_lines") throw ValidationError("cvsr_sites must be a list or \"all_lines\"");
    for (const auto& br : p.network.branches) {
      if (br.in_service && !br.is_transformer) add(make_site(p, br.id, json::object()));
    }
    return;
  }
  if (!j.is_array()) throw ValidationError("cvsr_sites must be a list or \"all_lines\"");
  for (const auto& s : j) {
    if (s.is_number_integer()) {
      add(make_site(p, s.get<int>(), json::object()));
    } else {
      if (!s.contains("branch")) throw ValidationError("CVSR site entry needs a branch id");
      add(make_site(p, s.at("branch").get<int>(), s));
    }
  }
}

void parse_contingencies(PlanningProblem& p, const json& config) {
  p.islanding = islanding_contingencies(p.network);
  const json spec = config.value("contingencies", json("auto"));
  if (spec.is_string()) {
    const auto s = spec.get<std::string>();
    if (s == "auto") {
      for (const auto& br : p.network.branches) {
        if (br.in_service && !p.islanding.count(br.id)) p.contingencies.push_back(br.id);
      }
    } else if (s != "none") {
      throw ValidationError("contingencies must be \"auto\", \"none\" or a list of branch ids");
    }
  } else {
    std::set<int> seen;
    for (int id : parse_id_list(spec, "contingencies")) {
      if (!p.network.has_branch(id)) throw ValidationError(fmt::format("contingency on unknown branch {}", id));
      if (!p.network.branch(id).in_service) throw ValidationError(fmt::format("contingency on out-of-service branch {}", id));
      if (p.islanding.count(id)) throw ValidationError(fmt::format("contingency on branch {} islands the network", id));
      if (seen.insert(id).second) p.contingencies.push_back(id);
    }
    std::sort(p.contingencies.begin(), p.contingencies.end());
  }

  const json cc = config.value("critical_contingencies", json::object());
  if (cc.is_number_integer()) {
    p.critical_count = cc.get<int>();
  } else if (cc.is_object()) {
    p.critical_count = integer(cc, "count", p.critical_count);
    if (cc.contains("list")) {
      p.critical_contingencies = parse_id_list(cc.at("list"), "critical_contingencies.list");
      for (int id : p.critical_contingencies) {
        if (std::find(p.contingencies.begin(), p.contingencies.end(), id) == p.contingencies.end()) {
          throw ValidationError(fmt::format("critical contingency {} is not in the contingency set", id));
        }
      }
    }
  } else {
    throw ValidationError("critical_contingencies must be an integer or an object");
  }
  if (p.critical_count < 0) throw ValidationError("critical contingency count must be >= 0");

  // Blocks on which the critical contingencies enter the master: flat list or one list per stage.
  std::vector<std::vector<int>> blocks;
  json blk = cc.is_object() && cc.contains("blocks") ? cc.at("blocks") : json::array({1, 2});
  if (!blk.is_array()) throw ValidationError("critical_contingencies.blocks must be a list");
  const bool per_stage = !blk.empty() && blk.front().is_array();
  for (const auto& st : p.stages) {
    std::vector<int> list;
    if (per_stage) {
      if (blk.size() != p.stages.size()) throw ValidationError("critical_contingencies.blocks needs one list per stage");
      list = parse_id_list(blk.at(static_cast<std::size_t>(st.index - 1)), "critical_contingencies.blocks");
    } else {
      list = parse_id_list(blk, "critical_contingencies.blocks");
    }
    std::vector<int> kept;
    for (int b : list) {
      if (b < 1) throw ValidationError("critical contingency block indices are 1-based");
      // The default (1, 2) is clipped to the blocks that exist; explicit lists must be valid.
      if (b > static_cast<int>(st.blocks.size())) {
        if (cc.is_object() && cc.contains("blocks")) {
          throw ValidationError(fmt::format("stage {} has no block {}", st.index, b));
        }
        continue;
      }
      if (std::find(kept.begin(), kept.end(), b) == kept.end()) kept.push_back(b);
    }
    std::sort(kept.begin(), kept.end());
    blocks.push_back(kept);
  }
  p.critical_blocks = blocks;
}

void parse_generators(PlanningProblem& p, const json& config) {
  if (config.contains("generator_costs")) {
    const auto& gc = config.at("generator_costs");
    if (!gc.is_object()) throw ValidationError("generator_costs must map generator ids to $/MWh");
    for (const auto& [key, val] : gc.items()) {
      int id = 0;
      try {
        id = std::stoi(key);
      } catch (const std::exception&) {
        throw ValidationError(fmt::format("generator_costs key '{}' is not an id", key));
      }
      auto it = std::find_if(p.network.generators.begin(), p.network.generators.end(),
                             [&](const Generator& g) { return g.id == id; });
      if (it == p.network.generators.end()) throw ValidationError(fmt::format("generator_costs: unknown generator {}", id));
      if (!val.is_number() || val.get<double>() < 0.0) throw ValidationError("generator costs must be numbers >= 0");
      it->cost = val.get<double>();
    }
  }
  const json rd = config.value("redispatchable_generators", json("none"));
  if (rd.is_string()) {
    const auto s = rd.get<std::string>();
    if (s == "all") {
      for (const auto& g : p.network.generators) p.redispatchable.insert(g.id);
    } else if (s != "none") {
      throw ValidationError("redispatchable_generators must be \"none\", \"all\" or a list of ids");
    }
  } else {
    for (int id : parse_id_list(rd, "redispatchable_generators")) {
      bool found = std::any_of(p.network.generators.begin(), p.network.generators.end(),
                               [&](const Generator& g) { return g.id == id; });
      if (!found) throw ValidationError(fmt::format("redispatchable generator {} does not exist", id));
      p.redispatchable.insert(id);
    }
  }
}

}  // namespace

std::vector<LoadBlock> default_blocks() {
  return {{"peak", 1.0, 760.0}, {"normal", 0.85, 5000.0}, {"low", 0.6, 3000.0}};
}

PlanningProblem load_problem(const NetworkCase& network, const json& config) {
  if (!config.is_object()) throw ValidationError("planning config must be a JSON object");
  for (const auto& [key, val] : config.items()) {
    if (!kTopLevelKeys.count(key)) throw ValidationError(fmt::format("unknown config key '{}'", key));
  }

  PlanningProblem p;
  p.network = network;
  p.network.validate();

  p.discount_rate = number(config, "discount_rate", 0.05);
  p.hours_per_year = number(config, "hours_per_year", 8760.0);
  p.rating_multiplier = number(config, "rating_multiplier", 1.0);
  p.cvsr_cost_per_kva = number(config, "cvsr_cost_per_kva", 10.0);
  p.max_repair_iterations = integer(config, "max_repair_iterations", 50);
  if (p.discount_rate < 0.0) throw ValidationError("discount_rate must be >= 0");
  if (!(p.hours_per_year > 0.0)) throw ValidationError("hours_per_year must be > 0");
  if (!(p.rating_multiplier > 0.0)) throw ValidationError("rating_multiplier must be > 0");
  if (p.max_repair_iterations < 1) throw ValidationError("max_repair_iterations must be >= 1");

  const auto rating_mode = config.value("contingency_rating", std::string("short_term"));
  if (rating_mode == "short_term") {
    p.short_term_rating_in_contingency = true;
  } else if (rating_mode == "long_term") {
    p.short_term_rating_in_contingency = false;
  } else {
    throw ValidationError("contingency_rating must be \"short_term\" or \"long_term\"");
  }
  const auto op_mode = config.value("operating_cost_mode", std::string("literal"));
  if (op_mode == "literal") {
    p.operating_mode = OperatingCostMode::Literal;
  } else if (op_mode == "per_year") {
    p.operating_mode = OperatingCostMode::PerYear;
  } else {
    throw ValidationError("operating_cost_mode must be \"literal\" or \"per_year\"");
  }

  const auto blocks = config.contains("blocks") ? parse_blocks(config.at("blocks"), p.hours_per_year, "blocks")
                                                : default_blocks();
  const json stages = config.value("stages", json::array({json{{"years", 5}, {"load_multiplier", 1.0}}}));
  if (!stages.is_array() || stages.empty()) throw ValidationError("stages must be a non-empty list");
  int year = 1;
  for (const auto& s : stages) {
    Stage st;
    st.index = static_cast<int>(p.stages.size()) + 1;
    st.start_year = year;
    st.years = integer(s, "years", 5);
    st.load_multiplier = number(s, "load_multiplier", 1.0);
    if (st.years < 1) throw ValidationError(fmt::format("stage {} needs years >= 1", st.index));
    if (st.load_multiplier < 0.0) throw ValidationError(fmt::format("stage {} has a negative load multiplier", st.index));
    st.blocks = s.contains("blocks") ? parse_blocks(s.at("blocks"), p.hours_per_year, fmt::format("stage {}", st.index))
                                     : blocks;
    year += st.years;
    p.stages.push_back(st);
  }

  parse_generators(p, config);
  if (config.contains("candidate_lines")) parse_candidates(p, config.at("candidate_lines"));
  if (config.contains("cvsr_sites")) parse_cvsr(p, config.at("cvsr_sites"));
  parse_contingencies(p, config);
  return p;
}

PlanningProblem load_problem_file(const NetworkCase& network, const std::filesystem::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw ValidationError(fmt::format("cannot open config file {}", config_path.string()));
  json config;
  try {
    config = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", config_path.string(), e.what()));
  }
  try {
    return load_problem(network, config);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", config_path.string(), e.what()));
  }
}

std::vector<StateKey> PlanningProblem::all_states() const {
  std::vector<StateKey> out;
  for (const auto& st : stages) {
    for (int b = 1; b <= static_cast<int>(st.blocks.size()); ++b) {
      out.push_back({0, b, st.index});
      for (int c : contingencies) out.push_back({c, b, st.index});
    }
  }
  return out;
}

std::vector<StateKey> PlanningProblem::base_states(int stage_index) const {
  std::vector<StateKey> out;
  for (const auto& st : stages) {
    if (stage_index != 0 && st.index != stage_index) continue;
    for (int b = 1; b <= static_cast<int>(st.blocks.size()); ++b) out.push_back({0, b, st.index});
  }
  return out;
}

double PlanningProblem::demand(const Load& load, int block, int stage_index) const {
  const auto& st = stage(stage_index);
  return load.p_demand * st.load_multiplier * st.blocks.at(static_cast<std::size_t>(block - 1)).scale;
}

double PlanningProblem::total_demand(int block, int stage_index) const {
  double sum = 0.0;
  for (const auto& l : network.loads) sum += demand(l, block, stage_index);
  return sum;
}

double PlanningProblem::rating(const Branch& br, const StateKey& s) const {
  const double base = (s.outage != 0 && short_term_rating_in_contingency) ? br.rate_b : br.rate_a;
  return std::isinf(base) ? kInf : base * rating_multiplier;
}

double PlanningProblem::rating(const CandidateLine& cl, const StateKey& s) const {
  return (s.outage != 0 && short_term_rating_in_contingency) ? cl.rate_b : cl.rate_a;
}

const CandidateLine* PlanningProblem::find_candidate(int id) const {
  for (const auto& c : candidates) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

const CvsrSite* PlanningProblem::find_cvsr(int branch) const {
  for (const auto& s : cvsr_sites) {
    if (s.branch == branch) return &s;
  }
  return nullptr;
}

double PlanningProblem::discount(int year) const { return 1.0 / std::pow(1.0 + discount_rate, year - 1); }

double PlanningProblem::operating_weight(int block, int stage_index) const {
  const auto& st = stage(stage_index);
  const double hours = st.blocks.at(static_cast<std::size_t>(block - 1)).hours;
  if (operating_mode == OperatingCostMode::Literal) return hours * st.years * discount(st.start_year);
  return hours * discounted_annuity(st.start_year, st.years, discount_rate);
}

double PlanningProblem::operating_weight_undiscounted(int block, int stage_index) const {
  const auto& st = stage(stage_index);
  return st.blocks.at(static_cast<std::size_t>(block - 1)).hours * st.years;
}

}  // namespace tepcvsr
