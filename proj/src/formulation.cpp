#include "tepcvsr/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "tepcvsr/error.hpp"

namespace tepcvsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string sfx(const StateKey& s) { return fmt::format("_c{}_b{}_t{}", s.outage, s.block, s.stage); }

VarKey key(Role r, int element, const StateKey& s) { return {r, element, s.outage, s.block, s.stage}; }
VarKey build_key(Role r, int element, int stage) { return {r, element, 0, 0, stage}; }

double value_of(const MilpModel& m, const std::vector<double>& x, const VarKey& k) {
  auto idx = m.find(k);
  return idx ? x.at(static_cast<std::size_t>(*idx)) : 0.0;
}

class Builder {
 public:
  Builder(const PlanningProblem& p, const BuildOptions& opt) : p_(p), opt_(opt), base_(p.network.base_mva) {}

  MilpModel build() {
    check_scope();
    for (int t : opt_.stages) add_build_vars(t);
    for (const auto& s : opt_.states) add_state(s);
    add_investment_objective();
    m_.check_consistency();
    return std::move(m_);
  }

 private:
  const PlanningProblem& p_;
  const BuildOptions& opt_;
  double base_;
  MilpModel m_;

  bool uses_cvsr() const { return opt_.allow_cvsr; }

  void check_scope() {
    if (opt_.stages.empty()) throw ModelError("model scope has no stages");
    for (std::size_t i = 0; i < opt_.stages.size(); ++i) {
      const int t = opt_.stages[i];
      if (t < 1 || t > static_cast<int>(p_.stages.size())) throw ModelError(fmt::format("stage {} does not exist", t));
      if (i > 0 && t != opt_.stages[i - 1] + 1) throw ModelError("model stages must be consecutive and ascending");
    }
    if (opt_.soft_thermal && !opt_.fixed) throw ModelError("soft thermal limits need fixed builds");
    if (!uses_cvsr() && (!opt_.prior.cvsrs.empty() || (opt_.fixed && !opt_.fixed->cvsrs.empty()))) {
      throw ModelError("CVSR builds given while CVSR sites are disabled");
    }
    auto check_set = [&](const BuildSet& b) {
      for (int k : b.lines) {
        if (!p_.find_candidate(k)) throw ModelError(fmt::format("unknown candidate line {}", k));
      }
      for (int k : b.cvsrs) {
        if (!p_.find_cvsr(k)) throw ModelError(fmt::format("unknown CVSR site {}", k));
      }
    };
    check_set(opt_.prior);
    if (opt_.fixed) check_set(*opt_.fixed);

    std::set<StateKey> seen;
    std::set<std::pair<int, int>> bt;
    for (const auto& s : opt_.states) {
      if (std::find(opt_.stages.begin(), opt_.stages.end(), s.stage) == opt_.stages.end()) {
        throw ModelError(fmt::format("state {} lies outside the model stages", sfx(s)));
      }
      if (s.block < 1 || s.block > p_.num_blocks(s.stage)) throw ModelError(fmt::format("state {} has no such block", sfx(s)));
      if (s.outage != 0 && (!p_.network.has_branch(s.outage) || !p_.network.branch(s.outage).in_service)) {
        throw ModelError(fmt::format("state {} outages a branch that is not in service", sfx(s)));
      }
      if (!seen.insert(s).second) throw ModelError(fmt::format("duplicate state {}", sfx(s)));
      bt.insert({s.block, s.stage});
    }
    // Generation adequacy per (block, stage); the network itself is read-only.
    for (const auto& [b, t] : bt) {
      double cap = 0.0;
      double pmin = 0.0;
      for (const auto& g : p_.network.generators) {
        if (!g.in_service) continue;
        cap += g.p_max;
        pmin += g.p_min;
      }
      const double demand = p_.total_demand(b, t);
      if (cap < demand - 1e-9) {
        throw ValidationError(fmt::format("generation capacity {} MW is below demand {} MW in block {} of stage {}", cap,
                                          demand, b, t));
      }
      if (pmin > demand + 1e-9) {
        throw ValidationError(fmt::format("minimum generation {} MW exceeds demand {} MW in block {} of stage {}", pmin,
                                          demand, b, t));
      }
    }
    if (opt_.fixed_dispatch) {
      for (const auto& [b, t] : bt) {
        if (!opt_.fixed_dispatch->has(b, t)) {
          throw ModelError(fmt::format("fixed dispatch lacks block {} of stage {}", b, t));
        }
      }
    } else if (!opt_.redispatch_all) {
      for (const auto& s : opt_.states) {
        if (s.outage != 0 && !seen.count({0, s.block, s.stage})) {
          throw ModelError(fmt::format("contingency state {} needs its base state in the model", sfx(s)));
        }
      }
    }
  }

  void add_build_vars(int t) {
    const bool first = t == opt_.stages.front();
    for (const auto& c : p_.candidates) {
      double lo = first && opt_.prior.lines.count(c.id) ? 1.0 : 0.0;
      double hi = 1.0;
      if (opt_.fixed) lo = hi = opt_.fixed->lines.count(c.id) ? 1.0 : 0.0;
      if (opt_.fixed && opt_.prior.lines.count(c.id) && lo == 0.0) {
        throw ModelError(fmt::format("fixed builds drop line {} committed earlier", c.id));
      }
      const int a = m_.add_variable(build_key(Role::BuildLine, c.id, t), VarKind::Binary, lo, hi);
      if (!first) {
        const int prev = m_.require(build_key(Role::BuildLine, c.id, t - 1));
        m_.add_constraint(fmt::format("mono_alpha_k{}_t{}", c.id, t), {{a, 1.0}, {prev, -1.0}}, Sense::GreaterEqual, 0.0);
      }
    }
    if (!uses_cvsr()) return;
    for (const auto& v : p_.cvsr_sites) {
      double lo = first && opt_.prior.cvsrs.count(v.branch) ? 1.0 : 0.0;
      double hi = 1.0;
      if (opt_.fixed) lo = hi = opt_.fixed->cvsrs.count(v.branch) ? 1.0 : 0.0;
      if (opt_.fixed && opt_.prior.cvsrs.count(v.branch) && lo == 0.0) {
        throw ModelError(fmt::format("fixed builds drop CVSR {} committed earlier", v.branch));
      }
      const int d = m_.add_variable(build_key(Role::BuildCvsr, v.branch, t), VarKind::Binary, lo, hi);
      if (!first) {
        const int prev = m_.require(build_key(Role::BuildCvsr, v.branch, t - 1));
        m_.add_constraint(fmt::format("mono_delta_k{}_t{}", v.branch, t), {{d, 1.0}, {prev, -1.0}}, Sense::GreaterEqual, 0.0);
      }
    }
  }

  void add_investment_objective() {
    if (opt_.objective != ObjectiveKind::Planning && opt_.objective != ObjectiveKind::RepairInvestment) return;
    // Incremental cost: C * (x_t - x_{t-1}) / (1+d)^(start_t - 1).
    for (int t : opt_.stages) {
      const double f = p_.discount(p_.stage(t).start_year);
      const bool first = t == opt_.stages.front();
      for (const auto& c : p_.candidates) {
        m_.add_objective_coef(m_.require(build_key(Role::BuildLine, c.id, t)), c.cost * f);
        if (!first) {
          m_.add_objective_coef(m_.require(build_key(Role::BuildLine, c.id, t - 1)), -c.cost * f);
        } else if (opt_.prior.lines.count(c.id)) {
          m_.add_objective_offset(-c.cost * f);
        }
      }
      if (!uses_cvsr()) continue;
      for (const auto& v : p_.cvsr_sites) {
        m_.add_objective_coef(m_.require(build_key(Role::BuildCvsr, v.branch, t)), v.cost * f);
        if (!first) {
          m_.add_objective_coef(m_.require(build_key(Role::BuildCvsr, v.branch, t - 1)), -v.cost * f);
        } else if (opt_.prior.cvsrs.count(v.branch)) {
          m_.add_objective_offset(-v.cost * f);
        }
      }
    }
  }

  double build_value(Role r, int element, int t) const {
    const auto& v = m_.variable(m_.require(build_key(r, element, t)));
    return v.lower == v.upper ? v.lower : -1.0;  // -1 = free
  }

  void add_state(const StateKey& s) {
    const auto& net = p_.network;
    const std::string tag = sfx(s);

    // Bus angles, slack fixed at zero.
    for (const auto& bus : net.buses) {
      const double lim = bus.is_slack ? 0.0 : kInf;
      m_.add_variable(key(Role::Angle, bus.id, s), VarKind::Continuous, -lim, lim);
    }
    auto theta = [&](int from, int to, double coef) {
      return std::vector<Term>{{m_.require(key(Role::Angle, from, s)), coef}, {m_.require(key(Role::Angle, to, s)), -coef}};
    };

    add_generation(s);

    // Nodal balance rows are assembled from the flow variables below.
    std::map<int, std::vector<Term>> balance;
    for (const auto& g : net.generators) {
      if (g.in_service) balance[g.bus].push_back({m_.require(key(Role::Generation, g.id, s)), 1.0});
    }

    for (const auto& br : net.branches) {
      if (!br.in_service) continue;
      const int n = PlanningProblem::in_service(br.id, s);
      const double rating = p_.rating(br, s);
      const double bcoef = base_ * br.susceptance;
      const double mp = base_ * big_m_values(br.susceptance, 0.0).m_prime;
      const CvsrSite* site = uses_cvsr() ? p_.find_cvsr(br.id) : nullptr;

      const int pe = add_existing_flow(br.id, s, n, rating);
      balance[br.from_bus].push_back({pe, -1.0});
      balance[br.to_bus].push_back({pe, 1.0});

      // P - b*theta (- w) = 0 when in service, relaxed by M' when outaged.
      std::vector<Term> row = theta(br.from_bus, br.to_bus, -bcoef);
      row.push_back({pe, 1.0});
      if (site) {
        const int w = m_.add_variable(key(Role::CvsrFlow, br.id, s), VarKind::Continuous, -kInf, kInf);
        const int z = m_.add_variable(key(Role::CvsrAngle, br.id, s), VarKind::Continuous, -kInf, kInf);
        const int delta = m_.require(build_key(Role::BuildCvsr, br.id, s.stage));
        // With the device certainly absent the sign binary carries no information.
        const double yh = build_value(Role::BuildCvsr, br.id, s.stage) == 0.0 ? 0.0 : 1.0;
        const int y = m_.add_variable(key(Role::CvsrSign, br.id, s), VarKind::Binary, 0.0, yh);
        row.push_back({w, -1.0});
        ReformulationVars rv{w, z, y, delta, theta(br.from_bus, br.to_bus, 1.0)};
        emit_reformulation(m_, *site, n, rv, cvsr_big_m_mw(p_, *site, opt_.override_m_k), base_, fmt::format("k{}{}", br.id, tag));
      }
      const std::string fam = site ? "fv" : "fe";
      if (n == 1) {
        m_.add_constraint(fmt::format("{}_k{}{}", fam, br.id, tag), row, Sense::Equal, 0.0);
      } else {
        m_.add_constraint(fmt::format("{}1_k{}{}", fam, br.id, tag), row, Sense::LessEqual, mp);
        m_.add_constraint(fmt::format("{}2_k{}{}", fam, br.id, tag), row, Sense::GreaterEqual, -mp);
      }
    }

    for (const auto& c : p_.candidates) {
      const int n = PlanningProblem::in_service(c.id, s);
      const double rating = p_.rating(c, s);
      const double bcoef = base_ * c.susceptance;
      const double mp = base_ * big_m_values(c.susceptance, 0.0).m_prime;
      const int alpha = m_.require(build_key(Role::BuildLine, c.id, s.stage));
      const double built = build_value(Role::BuildLine, c.id, s.stage);
      const bool soft = opt_.soft_thermal && built == 1.0 && n == 1;

      const int pc = m_.add_variable(key(Role::CandidateFlow, c.id, s), VarKind::Continuous, soft ? -kInf : -rating * n,
                                     soft ? kInf : rating * n);
      balance[c.from_bus].push_back({pc, -1.0});
      balance[c.to_bus].push_back({pc, 1.0});

      // P - b*theta within +-M'(2 - N - alpha).
      std::vector<Term> row = theta(c.from_bus, c.to_bus, -bcoef);
      row.push_back({pc, 1.0});
      auto up = row;
      up.push_back({alpha, mp});
      m_.add_constraint(fmt::format("fc1_k{}{}", c.id, tag), up, Sense::LessEqual, mp * (2 - n));
      auto lo = row;
      lo.push_back({alpha, -mp});
      m_.add_constraint(fmt::format("fc2_k{}{}", c.id, tag), lo, Sense::GreaterEqual, -mp * (2 - n));

      // |P| <= alpha * N * S, or soft when the line is known to be built.
      if (soft) {
        const int u1 = m_.add_variable(key(Role::SlackC1, c.id, s), VarKind::Continuous, 0.0, kInf,
                                       opt_.objective == ObjectiveKind::SlackSum ? 1.0 : 0.0);
        const int u2 = m_.add_variable(key(Role::SlackC2, c.id, s), VarKind::Continuous, 0.0, kInf,
                                       opt_.objective == ObjectiveKind::SlackSum ? 1.0 : 0.0);
        m_.add_constraint(fmt::format("sc1_k{}{}", c.id, tag), {{pc, 1.0}, {u1, 1.0}}, Sense::GreaterEqual, -rating);
        m_.add_constraint(fmt::format("sc2_k{}{}", c.id, tag), {{pc, 1.0}, {u2, -1.0}}, Sense::LessEqual, rating);
      } else {
        m_.add_constraint(fmt::format("tc1_k{}{}", c.id, tag), {{pc, 1.0}, {alpha, -rating * n}}, Sense::LessEqual, 0.0);
        m_.add_constraint(fmt::format("tc2_k{}{}", c.id, tag), {{pc, 1.0}, {alpha, rating * n}}, Sense::GreaterEqual, 0.0);
      }
    }

    for (const auto& bus : net.buses) {
      double demand = 0.0;
      for (const auto& l : net.loads) {
        if (l.bus == bus.id) demand += p_.demand(l, s.block, s.stage);
      }
      m_.add_constraint(fmt::format("bal_i{}{}", bus.id, tag), balance[bus.id], Sense::Equal, demand);
    }
  }

  int add_existing_flow(int k, const StateKey& s, int n, double rating) {
    if (n == 0) return m_.add_variable(key(Role::ExistingFlow, k, s), VarKind::Continuous, 0.0, 0.0);
    if (!opt_.soft_thermal || std::isinf(rating)) {
      return m_.add_variable(key(Role::ExistingFlow, k, s), VarKind::Continuous, -rating, rating);
    }
    const double w = opt_.objective == ObjectiveKind::SlackSum ? 1.0 : 0.0;
    const int pe = m_.add_variable(key(Role::ExistingFlow, k, s), VarKind::Continuous, -kInf, kInf);
    const int u1 = m_.add_variable(key(Role::SlackE1, k, s), VarKind::Continuous, 0.0, kInf, w);
    const int u2 = m_.add_variable(key(Role::SlackE2, k, s), VarKind::Continuous, 0.0, kInf, w);
    m_.add_constraint(fmt::format("se1_k{}{}", k, sfx(s)), {{pe, 1.0}, {u1, 1.0}}, Sense::GreaterEqual, -rating);
    m_.add_constraint(fmt::format("se2_k{}{}", k, sfx(s)), {{pe, 1.0}, {u2, -1.0}}, Sense::LessEqual, rating);
    return pe;
  }

  void add_generation(const StateKey& s) {
    const bool base_state = s.outage == 0;
    double op_weight = 0.0;
    if (opt_.objective == ObjectiveKind::Planning && base_state) op_weight = p_.operating_weight(s.block, s.stage);
    if (opt_.objective == ObjectiveKind::HourlyCost) op_weight = 1.0;
    for (const auto& g : p_.network.generators) {
      if (!g.in_service) continue;
      double lo = g.p_min;
      double hi = g.p_max;
      const bool free_move = opt_.redispatch_all || (!base_state && p_.is_redispatchable(g.id));
      if (opt_.fixed_dispatch && !free_move) {
        const double v = std::clamp(opt_.fixed_dispatch->at(s.block, s.stage, g.id), g.p_min, g.p_max);
        lo = hi = v;
      }
      const int pg = m_.add_variable(key(Role::Generation, g.id, s), VarKind::Continuous, lo, hi, op_weight * g.cost);
      if (!base_state && !free_move && !opt_.fixed_dispatch) {
        const int p0 = m_.require(key(Role::Generation, g.id, {0, s.block, s.stage}));
        m_.add_constraint(fmt::format("fix_n{}{}", g.id, sfx(s)), {{pg, 1.0}, {p0, -1.0}}, Sense::Equal, 0.0);
      }
    }
  }
};

}  // namespace

SusceptanceRange cvsr_susceptance_bounds(double x_k, double x_v_min, double x_v_max) {
  if (!(x_k > 0.0)) throw ValidationError(fmt::format("branch reactance {} must be > 0 for a CVSR", x_k));
  if (x_v_min < 0.0 || x_v_min > x_v_max) {
    throw ValidationError(fmt::format("CVSR reactance range [{}, {}] is invalid", x_v_min, x_v_max));
  }
  return {-x_v_max / (x_k * (x_k + x_v_max)), -x_v_min / (x_k * (x_k + x_v_min))};
}

BigM big_m_values(double b_k, double b_v_min, double theta_max) {
  return {std::abs(b_v_min) * theta_max, std::abs(b_k) * std::numbers::pi};
}

double discounted_cost(double cost, int year, double rate) { return cost / std::pow(1.0 + rate, year - 1); }

double discounted_annuity(int first_year, int years, double rate) {
  double sum = 0.0;
  for (int y = first_year; y < first_year + years; ++y) sum += discounted_cost(1.0, y, rate);
  return sum;
}

double DispatchSnapshot::at(int block, int stage, int gen) const {
  auto it = pg.find({block, stage});
  if (it == pg.end()) throw ModelError(fmt::format("no dispatch for block {} of stage {}", block, stage));
  auto g = it->second.find(gen);
  if (g == it->second.end()) throw ModelError(fmt::format("no dispatch for generator {}", gen));
  return g->second;
}

double flow_coefficient(const PlanningProblem& p, double susceptance_pu) { return p.network.base_mva * susceptance_pu; }

double cvsr_big_m_mw(const PlanningProblem& p, const CvsrSite& site, std::optional<double> override_pu) {
  const double mk = override_pu ? *override_pu : big_m_values(0.0, site.b_v_min).m_k;
  return p.network.base_mva * mk;
}

std::vector<ConstraintId> emit_reformulation(MilpModel& model, const CvsrSite& site, int n_kcbt,
                                             const ReformulationVars& v, double m_k_mw, double base_mva,
                                             const std::string& tag, double theta_max) {
  for (int idx : {v.w, v.z, v.y, v.delta}) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= model.variables().size()) {
      throw ModelError(fmt::format("reformulation of CVSR {} references an undeclared variable", site.branch));
    }
  }
  const double bmin = base_mva * site.b_v_min;
  const double bmax = base_mva * site.b_v_max;
  const double M = m_k_mw;
  const double nt = n_kcbt * theta_max;
  std::vector<ConstraintId> ids;
  // -M y + z bmin <= w <= z bmax + M y
  ids.push_back(model.add_constraint("ra1_" + tag, {{v.w, 1.0}, {v.z, -bmin}, {v.y, M}}, Sense::GreaterEqual, 0.0));
  ids.push_back(model.add_constraint("ra2_" + tag, {{v.w, 1.0}, {v.z, -bmax}, {v.y, -M}}, Sense::LessEqual, 0.0));
  // -M (1-y) + z bmax <= w <= z bmin + M (1-y)
  ids.push_back(model.add_constraint("rb1_" + tag, {{v.w, 1.0}, {v.z, -bmax}, {v.y, -M}}, Sense::GreaterEqual, -M));
  ids.push_back(model.add_constraint("rb2_" + tag, {{v.w, 1.0}, {v.z, -bmin}, {v.y, M}}, Sense::LessEqual, M));
  // -N delta theta_max <= z <= N delta theta_max
  ids.push_back(model.add_constraint("rz1_" + tag, {{v.z, 1.0}, {v.delta, -nt}}, Sense::LessEqual, 0.0));
  ids.push_back(model.add_constraint("rz2_" + tag, {{v.z, 1.0}, {v.delta, nt}}, Sense::GreaterEqual, 0.0));
  // N (theta - (1-delta) theta_max) <= z <= N (theta + (1-delta) theta_max)
  std::vector<Term> lo{{v.z, 1.0}, {v.delta, -nt}};
  std::vector<Term> hi{{v.z, 1.0}, {v.delta, nt}};
  for (const auto& t : v.theta) {
    lo.push_back({t.var, -n_kcbt * t.coef});
    hi.push_back({t.var, -n_kcbt * t.coef});
  }
  ids.push_back(model.add_constraint("rl1_" + tag, lo, Sense::GreaterEqual, -nt));
  ids.push_back(model.add_constraint("rl2_" + tag, hi, Sense::LessEqual, nt));
  return ids;
}

BuildOptions integrated_options(const PlanningProblem& p, bool allow_cvsr) {
  BuildOptions opt;
  for (const auto& st : p.stages) opt.stages.push_back(st.index);
  opt.states = p.all_states();
  opt.objective = ObjectiveKind::Planning;
  opt.allow_cvsr = allow_cvsr;
  return opt;
}

MilpModel build_model(const PlanningProblem& p, const BuildOptions& opt) { return Builder(p, opt).build(); }

MilpModel build_integrated_model(const PlanningProblem& p, bool allow_cvsr, std::optional<double> override_m_k) {
  auto opt = integrated_options(p, allow_cvsr);
  opt.override_m_k = override_m_k;
  return build_model(p, opt);
}

double hourly_cost(const PlanningProblem& p, const DispatchSnapshot& dispatch, int block, int stage) {
  double sum = 0.0;
  for (const auto& g : p.network.generators) {
    if (g.in_service) sum += g.cost * dispatch.at(block, stage, g.id);
  }
  return sum;
}

CostBreakdown compute_costs(const PlanningProblem& p, const std::vector<int>& stages,
                            const std::vector<BuildSet>& cumulative, const DispatchSnapshot& dispatch,
                            const BuildSet& before_first) {
  if (stages.size() != cumulative.size()) throw ModelError("cost breakdown needs one build set per stage");
  CostBreakdown out;
  const BuildSet* prev = &before_first;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const int t = stages[i];
    const double f = p.discount(p.stage(t).start_year);
    for (int k : cumulative[i].lines) {
      if (prev->lines.count(k)) continue;
      const auto* cand = p.find_candidate(k);
      if (!cand) throw ValidationError(fmt::format("plan builds unknown candidate line {}", k));
      const double c = cand->cost;
      out.items.push_back({fmt::format("line_{}", k), "line", t, c, c * f});
      out.line += c * f;
    }
    for (int k : cumulative[i].cvsrs) {
      if (prev->cvsrs.count(k)) continue;
      const auto* site = p.find_cvsr(k);
      if (!site) throw ValidationError(fmt::format("plan installs a CVSR on non-site branch {}", k));
      const double c = site->cost;
      out.items.push_back({fmt::format("cvsr_{}", k), "cvsr", t, c, c * f});
      out.cvsr += c * f;
    }
    double und = 0.0;
    double disc = 0.0;
    for (int b = 1; b <= p.num_blocks(t); ++b) {
      const double h = hourly_cost(p, dispatch, b, t);
      und += h * p.operating_weight_undiscounted(b, t);
      disc += h * p.operating_weight(b, t);
    }
    out.items.push_back({"operating", "operating", t, und, disc});
    out.operating += disc;
    prev = &cumulative[i];
  }
  return out;
}

LinearizationAudit audit_linearization(const MilpModel& model, const std::vector<double>& x, const PlanningProblem& p,
                                       const BuildOptions& opt) {
  LinearizationAudit a;
  const double S = p.network.base_mva;
  const auto& net = p.network;
  for (const auto& s : opt.states) {
    auto th = [&](int bus) { return value_of(model, x, key(Role::Angle, bus, s)); };
    if (opt.allow_cvsr) {
      for (const auto& site : p.cvsr_sites) {
        const auto& br = net.branch(site.branch);
        const int n = PlanningProblem::in_service(br.id, s);
        const double delta = std::round(value_of(model, x, build_key(Role::BuildCvsr, br.id, s.stage)));
        const double w = value_of(model, x, key(Role::CvsrFlow, br.id, s)) / S;
        const double theta = th(br.from_bus) - th(br.to_bus);
        ++a.tuples_checked;
        if (delta == 1.0 && n == 1) {
          if (std::abs(theta) <= 1e-9) continue;
          ++a.active_tuples;
          const double bv = w / theta;
          const double excess = std::max(site.b_v_min - bv, bv - site.b_v_max);
          a.worst_excess = std::max(a.worst_excess, excess);
          if (excess > 1e-6) {
            a.failures.push_back(fmt::format("CVSR {} state {}: w/theta = {} outside [{}, {}]", br.id, sfx(s), bv,
                                             site.b_v_min, site.b_v_max));
          }
        } else {
          a.worst_inactive_w = std::max(a.worst_inactive_w, std::abs(w));
          if (std::abs(w) > 1e-7) {
            a.failures.push_back(fmt::format("CVSR {} state {}: w = {} p.u. with delta = {}, N = {}", br.id, sfx(s), w,
                                             delta, n));
          }
        }
      }
    }
    // Nodal balance in per unit.
    std::map<int, double> mismatch;
    for (const auto& g : net.generators) {
      if (g.in_service) mismatch[g.bus] += value_of(model, x, key(Role::Generation, g.id, s));
    }
    for (const auto& l : net.loads) mismatch[l.bus] -= p.demand(l, s.block, s.stage);
    for (const auto& br : net.branches) {
      if (!br.in_service) continue;
      const double f = value_of(model, x, key(Role::ExistingFlow, br.id, s));
      mismatch[br.from_bus] -= f;
      mismatch[br.to_bus] += f;
    }
    for (const auto& c : p.candidates) {
      const double f = value_of(model, x, key(Role::CandidateFlow, c.id, s));
      mismatch[c.from_bus] -= f;
      mismatch[c.to_bus] += f;
    }
    for (const auto& [bus, mw] : mismatch) {
      const double pu = std::abs(mw) / S;
      a.worst_balance = std::max(a.worst_balance, pu);
      if (pu > 1e-6) a.failures.push_back(fmt::format("bus {} state {}: balance mismatch {} p.u.", bus, sfx(s), pu));
    }
  }
  return a;
}

BigMAudit audit_big_m(const MilpModel& model, const std::vector<double>& x, const PlanningProblem& p,
                      const BuildOptions& opt, double margin) {
  BigMAudit a;
  a.min_slack = kInf;
  const double S = p.network.base_mva;
  const auto& net = p.network;
  auto record = [&](double slack, const std::string& what) {
    ++a.constraints_checked;
    a.min_slack = std::min(a.min_slack, slack);
    if (slack < margin) a.failures.push_back(fmt::format("{}: slack {} below margin", what, slack));
  };
  for (const auto& s : opt.states) {
    auto th = [&](int bus) { return value_of(model, x, key(Role::Angle, bus, s)); };
    for (const auto& br : net.branches) {
      if (!br.in_service) continue;
      const bool has_site = opt.allow_cvsr && p.find_cvsr(br.id) != nullptr;
      const double theta = th(br.from_bus) - th(br.to_bus);
      const double w = has_site ? value_of(model, x, key(Role::CvsrFlow, br.id, s)) : 0.0;
      if (PlanningProblem::in_service(br.id, s) == 0) {
        const double mp = S * big_m_values(br.susceptance, 0.0).m_prime;
        const double active = value_of(model, x, key(Role::ExistingFlow, br.id, s)) - S * br.susceptance * theta - w;
        record(mp - std::abs(active), fmt::format("outaged flow k{}{}", br.id, sfx(s)));
      }
      if (!has_site) continue;
      const auto& site = *p.find_cvsr(br.id);
      const double M = cvsr_big_m_mw(p, site, opt.override_m_k);
      if (M == 0.0) continue;
      const double y = std::round(value_of(model, x, key(Role::CvsrSign, br.id, s)));
      const double z = value_of(model, x, key(Role::CvsrAngle, br.id, s));
      const double bmin = S * site.b_v_min;
      const double bmax = S * site.b_v_max;
      if (y == 1.0) {
        record(w - bmin * z + M, fmt::format("ra1 k{}{}", br.id, sfx(s)));
        record(bmax * z + M - w, fmt::format("ra2 k{}{}", br.id, sfx(s)));
      } else {
        record(w - bmax * z + M, fmt::format("rb1 k{}{}", br.id, sfx(s)));
        record(bmin * z + M - w, fmt::format("rb2 k{}{}", br.id, sfx(s)));
      }
    }
    for (const auto& c : p.candidates) {
      const int n = PlanningProblem::in_service(c.id, s);
      const double alpha = std::round(value_of(model, x, build_key(Role::BuildLine, c.id, s.stage)));
      const double gate = 2.0 - n - alpha;
      if (gate < 1.0) continue;
      const double mp = S * big_m_values(c.susceptance, 0.0).m_prime;
      const double theta = th(c.from_bus) - th(c.to_bus);
      const double active = value_of(model, x, key(Role::CandidateFlow, c.id, s)) - S * c.susceptance * theta;
      record(mp * gate - std::abs(active), fmt::format("candidate flow k{}{}", c.id, sfx(s)));
    }
  }
  if (a.constraints_checked == 0) a.min_slack = 0.0;
  return a;
}

ExpansionPlan extract_plan(const MilpModel& model, const std::vector<double>& x, const PlanningProblem& p,
                           const BuildOptions& opt) {
  if (x.size() != model.variables().size()) throw SolverError("solution size does not match the model");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& v = model.variables()[i];
    if (v.kind != VarKind::Binary) continue;
    if (std::abs(x[i] - std::round(x[i])) > 1e-4) {
      throw SolverError(fmt::format("binary {} = {} is not integral", v.name, x[i]));
    }
  }

  ExpansionPlan plan;
  BuildSet prev = opt.prior;
  std::vector<BuildSet> cumulative;
  for (int t : opt.stages) {
    BuildSet cur;
    for (const auto& c : p.candidates) {
      if (std::round(value_of(model, x, build_key(Role::BuildLine, c.id, t))) == 1.0) cur.lines.insert(c.id);
    }
    if (opt.allow_cvsr) {
      for (const auto& v : p.cvsr_sites) {
        if (std::round(value_of(model, x, build_key(Role::BuildCvsr, v.branch, t))) == 1.0) cur.cvsrs.insert(v.branch);
      }
    }
    if (!std::includes(cur.lines.begin(), cur.lines.end(), prev.lines.begin(), prev.lines.end()) ||
        !std::includes(cur.cvsrs.begin(), cur.cvsrs.end(), prev.cvsrs.begin(), prev.cvsrs.end())) {
      throw AuditError(fmt::format("stage {} drops a build made earlier", t));
    }
    StagePlan sp;
    sp.stage = t;
    sp.start_year = p.stage(t).start_year;
    std::set_difference(cur.lines.begin(), cur.lines.end(), prev.lines.begin(), prev.lines.end(),
                        std::back_inserter(sp.built_lines));
    std::set_difference(cur.cvsrs.begin(), cur.cvsrs.end(), prev.cvsrs.begin(), prev.cvsrs.end(),
                        std::back_inserter(sp.installed_cvsrs));
    sp.cumulative = cur;
    plan.stages.push_back(sp);
    cumulative.push_back(cur);
    prev = cur;
  }

  for (const auto& s : opt.states) {
    if (s.outage != 0) continue;
    auto& snap = plan.dispatch.pg[{s.block, s.stage}];
    for (const auto& g : p.network.generators) {
      if (g.in_service) snap[g.id] = value_of(model, x, key(Role::Generation, g.id, s));
    }
  }

  bool have_all_blocks = true;
  for (int t : opt.stages) {
    for (int b = 1; b <= p.num_blocks(t); ++b) have_all_blocks = have_all_blocks && plan.dispatch.has(b, t);
  }
  if (have_all_blocks) {
    auto costs = compute_costs(p, opt.stages, cumulative, plan.dispatch, opt.prior);
    plan.costs = costs.items;
    plan.line_investment = costs.line;
    plan.cvsr_investment = costs.cvsr;
    plan.operating = costs.operating;
    plan.total = costs.total();
    for (auto& sp : plan.stages) {
      for (const auto& it : costs.items) {
        if (it.stage != sp.stage) continue;
        if (it.type == "line") sp.line_cost += it.discounted;
        if (it.type == "cvsr") sp.cvsr_cost += it.discounted;
        if (it.type == "operating") sp.operating_cost += it.discounted;
      }
    }
  }

  plan.audit = audit_linearization(model, x, p, opt);
  if (!plan.audit.passed()) {
    throw AuditError("linearization audit failed: " + plan.audit.failures.front());
  }
  return plan;
}

}  // namespace tepcvsr
