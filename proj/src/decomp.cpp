#include "tepcvsr/decomp.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "tepcvsr/error.hpp"

namespace tepcvsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double value_at(const MilpModel& m, const std::vector<double>& x, const VarKey& k) {
  auto idx = m.find(k);
  return idx ? x.at(static_cast<std::size_t>(*idx)) : 0.0;
}

int peak_block(const PlanningProblem& p, int stage) {
  const auto& blocks = p.stage(stage).blocks;
  int best = 1;
  for (int b = 2; b <= static_cast<int>(blocks.size()); ++b) {
    if (blocks[static_cast<std::size_t>(b - 1)].scale > blocks[static_cast<std::size_t>(best - 1)].scale) best = b;
  }
  return best;
}

BuildSet strip_cvsr(BuildSet b, bool allow) {
  if (!allow) b.cvsrs.clear();
  return b;
}

void merge_audit(LinearizationAudit& into, const LinearizationAudit& a) {
  into.tuples_checked += a.tuples_checked;
  into.active_tuples += a.active_tuples;
  into.worst_excess = std::max(into.worst_excess, a.worst_excess);
  into.worst_inactive_w = std::max(into.worst_inactive_w, a.worst_inactive_w);
  into.worst_balance = std::max(into.worst_balance, a.worst_balance);
  into.failures.insert(into.failures.end(), a.failures.begin(), a.failures.end());
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure by index.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string describe(const BuildSet& added) {
  std::string out;
  for (int k : added.lines) out += fmt::format(" +line_{}", k);
  for (int k : added.cvsrs) out += fmt::format(" +cvsr_{}", k);
  return out;
}

}  // namespace

SolveResult PlannerOptions::run(const MilpModel& m) const {
  SolveRequest req;
  req.model = &m;
  req.time_limit = time_limit;
  req.relative_gap = relative_gap;
  req.threads = threads;
  return backend ? solve(req, *backend) : solve(req);
}

ContingencyRanking rank_contingencies(const PlanningProblem& p, const BuildSet& plan_so_far, const PlannerOptions& po,
                                      int stage) {
  ContingencyRanking out;
  out.stage = stage;
  out.block = peak_block(p, stage);
  out.islanding = p.islanding;
  const BuildSet builds = strip_cvsr(plan_so_far, po.allow_cvsr);
  std::vector<RankedContingency> entries(p.contingencies.size());
  parallel_for(p.contingencies.size(), po.jobs, [&](std::size_t i) {
    const int c = p.contingencies[i];
    BuildOptions o;
    o.stages = {stage};
    o.states = {{c, out.block, stage}};
    o.fixed = builds;
    o.objective = ObjectiveKind::HourlyCost;
    o.redispatch_all = true;
    o.allow_cvsr = po.allow_cvsr;
    const auto model = build_model(p, o);
    const auto res = po.run(model);
    RankedContingency rc{c, kInf, kInf};
    if (res.optimal()) {
      rc.cost = res.objective;
      rc.loading = 0.0;
      const StateKey s{c, out.block, stage};
      for (const auto& br : p.network.branches) {
        if (!br.in_service || br.id == c) continue;
        const double r = p.rating(br, s);
        if (std::isinf(r)) continue;
        const double f = value_at(model, res.values, {Role::ExistingFlow, br.id, c, out.block, stage});
        rc.loading = std::max(rc.loading, std::abs(f) / r);
      }
      for (const auto& cl : p.candidates) {
        if (!builds.lines.count(cl.id)) continue;
        const double f = value_at(model, res.values, {Role::CandidateFlow, cl.id, c, out.block, stage});
        rc.loading = std::max(rc.loading, std::abs(f) / p.rating(cl, s));
      }
    } else if (res.status != SolveStatus::Infeasible) {
      throw SolverError(fmt::format("ranking OPF for contingency {} ended with status {}", c, to_string(res.status)));
    }
    entries[i] = rc;
  });

  // Cost descending; near-equal costs (1e-6 relative) form a cluster ordered by loading, then id.
  std::sort(entries.begin(), entries.end(), [](const RankedContingency& a, const RankedContingency& b) {
    if (a.cost != b.cost) return a.cost > b.cost;
    return a.branch < b.branch;
  });
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i + 1;
    while (j < entries.size() &&
           (entries[j].cost == entries[i].cost ||
            std::abs(entries[j].cost - entries[j - 1].cost) <= 1e-6 * std::max(1.0, std::abs(entries[j - 1].cost)))) {
      ++j;
    }
    std::sort(entries.begin() + static_cast<std::ptrdiff_t>(i), entries.begin() + static_cast<std::ptrdiff_t>(j),
              [](const RankedContingency& a, const RankedContingency& b) {
                const double la = std::round(a.loading * 1e9);
                const double lb = std::round(b.loading * 1e9);
                if (la != lb) return la > lb;
                return a.branch < b.branch;
              });
    i = j;
  }
  out.entries = entries;
  return out;
}

std::vector<int> critical_contingencies(const PlanningProblem& p, const ContingencyRanking& ranking,
                                        const PlannerOptions& po) {
  const int count = po.cc_count.value_or(p.critical_count);
  std::vector<int> out;
  if (!p.critical_contingencies.empty() && !po.cc_count) {
    out = p.critical_contingencies;
  } else {
    for (const auto& e : ranking.entries) {
      if (static_cast<int>(out.size()) >= count) break;
      out.push_back(e.branch);
    }
  }
  return out;
}

BuildOptions master_options(const PlanningProblem& p, int stage, const BuildSet& prior, const std::vector<int>& cc,
                            const PlannerOptions& po) {
  BuildOptions o;
  o.stages = {stage};
  o.prior = strip_cvsr(prior, po.allow_cvsr);
  o.objective = ObjectiveKind::Planning;
  o.allow_cvsr = po.allow_cvsr;
  o.override_m_k = po.override_m_k;
  const auto& blocks = p.critical_blocks.at(static_cast<std::size_t>(stage - 1));
  for (int b = 1; b <= p.num_blocks(stage); ++b) {
    o.states.push_back({0, b, stage});
    if (std::find(blocks.begin(), blocks.end(), b) == blocks.end()) continue;
    std::vector<int> sorted = cc;
    std::sort(sorted.begin(), sorted.end());
    for (int c : sorted) o.states.push_back({c, b, stage});
  }
  return o;
}

MilpModel build_master(const PlanningProblem& p, int stage, const BuildSet& prior, const std::vector<int>& cc,
                       const PlannerOptions& po) {
  return build_model(p, master_options(p, stage, prior, cc, po));
}

BuildOptions security_options(const PlanningProblem& p, int stage, int block, int contingency, const BuildSet& builds,
                              const DispatchSnapshot& dispatch, const PlannerOptions& po) {
  (void)p;
  BuildOptions o;
  o.stages = {stage};
  o.states = {{contingency, block, stage}};
  o.fixed = strip_cvsr(builds, po.allow_cvsr);
  o.objective = ObjectiveKind::SlackSum;
  o.soft_thermal = true;
  o.allow_cvsr = po.allow_cvsr;
  o.override_m_k = po.override_m_k;
  DispatchSnapshot d;
  d.pg[{block, stage}] = dispatch.pg.at({block, stage});
  o.fixed_dispatch = d;
  return o;
}

MilpModel build_security_subproblem(const PlanningProblem& p, int stage, int block, int contingency,
                                    const BuildSet& builds, const DispatchSnapshot& dispatch, const PlannerOptions& po) {
  return build_model(p, security_options(p, stage, block, contingency, builds, dispatch, po));
}

SecurityReport check_security(const PlanningProblem& p, const std::vector<int>& stages,
                              const std::vector<BuildSet>& builds, const DispatchSnapshot& dispatch,
                              const PlannerOptions& po) {
  if (stages.size() != builds.size()) throw ModelError("security check needs one build set per stage");
  struct Task {
    std::size_t stage_pos;
    int block;
    int contingency;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    for (int b = 1; b <= p.num_blocks(stages[i]); ++b) {
      tasks.push_back({i, b, 0});
      for (int c : p.contingencies) tasks.push_back({i, b, c});
    }
  }
  std::vector<SecurityEntry> entries(tasks.size());
  std::vector<LinearizationAudit> audits(tasks.size());
  parallel_for(tasks.size(), po.jobs, [&](std::size_t i) {
    const auto& task = tasks[i];
    const int t = stages[task.stage_pos];
    const auto opt = security_options(p, t, task.block, task.contingency, builds[task.stage_pos], dispatch, po);
    const auto model = build_model(p, opt);
    const auto res = po.run(model);
    if (!res.optimal()) {
      throw ModelError(fmt::format(
          "security subproblem for contingency {} (block {}, stage {}) ended with status {}; the fixed dispatch or the "
          "angle limits on CVSR sites leave no feasible flow",
          task.contingency, task.block, t, to_string(res.status)));
    }
    SecurityEntry e;
    e.contingency = task.contingency;
    e.block = task.block;
    e.stage = t;
    double worst = 0.0;
    auto scan = [&](int id, bool cand, Role r1, Role r2) {
      const double u1 = value_at(model, res.values, {r1, id, task.contingency, task.block, t});
      const double u2 = value_at(model, res.values, {r2, id, task.contingency, task.block, t});
      const double u1c = u1 > 1e-9 ? u1 : 0.0;
      const double u2c = u2 > 1e-9 ? u2 : 0.0;
      e.total_slack += u1c + u2c;
      if (u1c + u2c > 0.0) {
        e.violations.push_back({id, cand, u1c, u2c});
        if (u1c + u2c > worst) {
          worst = u1c + u2c;
          e.worst_branch = id;
        }
      }
    };
    for (const auto& br : p.network.branches) {
      if (br.in_service) scan(br.id, false, Role::SlackE1, Role::SlackE2);
    }
    for (const auto& cl : p.candidates) scan(cl.id, true, Role::SlackC1, Role::SlackC2);
    entries[i] = e;
    audits[i] = audit_linearization(model, res.values, p, opt);
  });

  SecurityReport rep;
  rep.entries = entries;
  for (const auto& a : audits) merge_audit(rep.audit, a);
  for (const auto& e : rep.entries) {
    if (!rep.worst || e.total_slack > rep.worst->total_slack + 1e-9 ||
        (std::abs(e.total_slack - rep.worst->total_slack) <= 1e-9 && e.contingency < rep.worst->contingency)) {
      rep.worst = e;
    }
  }
  rep.max_slack = rep.worst ? rep.worst->total_slack : 0.0;
  return rep;
}

SecurityReport verify_plan(const PlanningProblem& p, const ExpansionPlan& plan, const PlannerOptions& po) {
  std::vector<int> stages;
  std::vector<BuildSet> builds;
  for (const auto& sp : plan.stages) {
    stages.push_back(sp.stage);
    builds.push_back(sp.cumulative);
  }
  return check_security(p, stages, builds, plan.dispatch, po);
}

DecompositionResult iterative_plan(const PlanningProblem& p, const PlannerOptions& po) {
  const auto t0 = Clock::now();
  DecompositionResult out;
  out.plan.mode = "decomposed";
  BuildSet committed;
  std::vector<int> stage_ids;
  std::vector<BuildSet> cumulative;
  LinearizationAudit audit;

  for (const auto& st : p.stages) {
    const int t = st.index;
    StageLog log;
    log.stage = t;
    ContingencyRanking ranking;
    if (p.critical_contingencies.empty() || po.cc_count) {
      ranking = rank_contingencies(p, committed, po, t);
      out.rankings.push_back(ranking);
    }
    log.critical = critical_contingencies(p, ranking, po);

    // Step 2: master over the base states and the critical contingencies.
    const auto mopt = master_options(p, t, committed, log.critical, po);
    const auto master = build_model(p, mopt);
    const auto mres = po.run(master);
    if (mres.status == SolveStatus::Infeasible) {
      throw ValidationError(fmt::format("master problem of stage {} is infeasible", t));
    }
    if (!mres.has_solution()) {
      if (mres.status == SolveStatus::TimeLimit) throw TimeLimitError(fmt::format("master of stage {} found no plan in time", t));
      throw SolverError(fmt::format("master of stage {} ended with status {}", t, to_string(mres.status)));
    }
    if (!mres.optimal()) out.plan.optimal = false;
    const auto mplan = extract_plan(master, mres.values, p, mopt);
    merge_audit(audit, mplan.audit);
    BuildSet builds = mplan.stages.front().cumulative;
    DispatchSnapshot dispatch;
    for (int b = 1; b <= p.num_blocks(t); ++b) dispatch.pg[{b, t}] = mplan.dispatch.pg.at({b, t});

    // Steps 3-4: check every state, repair the worst one, repeat.
    for (int iter = 0;; ++iter) {
      auto rep = check_security(p, {t}, {builds}, dispatch, po);
      merge_audit(audit, rep.audit);
      const bool secure = rep.secure(po.slack_tolerance);
      const auto worst = rep.worst;
      out.history.push_back(std::move(rep));
      if (secure) break;
      if (iter >= p.max_repair_iterations) {
        throw ModelError(fmt::format("stage {}: still insecure after {} repair iterations", t, iter));
      }
      BuildOptions ropt;
      ropt.stages = {t};
      ropt.prior = builds;
      ropt.objective = ObjectiveKind::RepairInvestment;
      ropt.allow_cvsr = po.allow_cvsr;
      ropt.override_m_k = po.override_m_k;
      ropt.states.push_back({0, worst->block, t});
      if (worst->contingency != 0) ropt.states.push_back({worst->contingency, worst->block, t});
      DispatchSnapshot d;
      d.pg[{worst->block, t}] = dispatch.pg.at({worst->block, t});
      ropt.fixed_dispatch = d;
      const auto repair = build_model(p, ropt);
      const auto rres = po.run(repair);
      if (rres.status == SolveStatus::Infeasible) {
        throw ValidationError(fmt::format(
            "contingency {} in block {} of stage {} cannot be repaired by any candidate line or CVSR (slack {} MW)",
            worst->contingency, worst->block, t, worst->total_slack));
      }
      if (!rres.has_solution()) {
        if (rres.status == SolveStatus::TimeLimit) throw TimeLimitError(fmt::format("repair in stage {} found no plan in time", t));
        throw SolverError(fmt::format("repair in stage {} ended with status {}", t, to_string(rres.status)));
      }
      if (!rres.optimal()) out.plan.optimal = false;
      const auto rplan = extract_plan(repair, rres.values, p, ropt);
      merge_audit(audit, rplan.audit);
      const auto& next = rplan.stages.front().cumulative;
      BuildSet added;
      std::set_difference(next.lines.begin(), next.lines.end(), builds.lines.begin(), builds.lines.end(),
                          std::inserter(added.lines, added.lines.end()));
      std::set_difference(next.cvsrs.begin(), next.cvsrs.end(), builds.cvsrs.begin(), builds.cvsrs.end(),
                          std::inserter(added.cvsrs, added.cvsrs.end()));
      if (added.empty()) {
        throw ModelError(fmt::format("repair of contingency {} (block {}, stage {}) added nothing although {} MW remain",
                                     worst->contingency, worst->block, t, worst->total_slack));
      }
      log.repairs.push_back(fmt::format("contingency {} block {}:{}", worst->contingency, worst->block, describe(added)));
      ++log.repair_iterations;
      builds = next;
    }

    committed = builds;
    stage_ids.push_back(t);
    cumulative.push_back(builds);
    for (const auto& [key, gens] : dispatch.pg) out.plan.dispatch.pg[key] = gens;
    out.log.push_back(log);
  }

  BuildSet prev;
  for (std::size_t i = 0; i < stage_ids.size(); ++i) {
    StagePlan sp;
    sp.stage = stage_ids[i];
    sp.start_year = p.stage(sp.stage).start_year;
    sp.cumulative = cumulative[i];
    std::set_difference(cumulative[i].lines.begin(), cumulative[i].lines.end(), prev.lines.begin(), prev.lines.end(),
                        std::back_inserter(sp.built_lines));
    std::set_difference(cumulative[i].cvsrs.begin(), cumulative[i].cvsrs.end(), prev.cvsrs.begin(), prev.cvsrs.end(),
                        std::back_inserter(sp.installed_cvsrs));
    out.plan.stages.push_back(sp);
    prev = cumulative[i];
  }
  const auto costs = compute_costs(p, stage_ids, cumulative, out.plan.dispatch);
  out.plan.costs = costs.items;
  out.plan.line_investment = costs.line;
  out.plan.cvsr_investment = costs.cvsr;
  out.plan.operating = costs.operating;
  out.plan.total = costs.total();
  for (auto& sp : out.plan.stages) {
    for (const auto& it : costs.items) {
      if (it.stage != sp.stage) continue;
      if (it.type == "line") sp.line_cost += it.discounted;
      if (it.type == "cvsr") sp.cvsr_cost += it.discounted;
      if (it.type == "operating") sp.operating_cost += it.discounted;
    }
  }
  out.plan.audit = audit;
  out.wall_time = seconds_since(t0);
  return out;
}

IntegratedResult integrated_plan(const PlanningProblem& p, const PlannerOptions& po) {
  const auto t0 = Clock::now();
  IntegratedResult out;
  auto opt = integrated_options(p, po.allow_cvsr);
  opt.override_m_k = po.override_m_k;
  const auto model = build_model(p, opt);
  out.solve = po.run(model);
  if (out.solve.status == SolveStatus::Infeasible) throw ValidationError("the integrated planning problem is infeasible");
  if (!out.solve.has_solution()) {
    if (out.solve.status == SolveStatus::TimeLimit) throw TimeLimitError("integrated model found no plan in time");
    throw SolverError(fmt::format("integrated model ended with status {} {}", to_string(out.solve.status), out.solve.message));
  }
  out.plan = extract_plan(model, out.solve.values, p, opt);
  out.plan.mode = "integrated";
  out.plan.optimal = out.solve.optimal();
  out.big_m = audit_big_m(model, out.solve.values, p, opt);
  out.wall_time = seconds_since(t0);
  return out;
}

namespace {

struct OracleItem {
  bool line = true;
  int id = 0;
  double cost = 0.0;
};

/// Plain DC dispatch LP for one build trajectory and one sign pattern on the active CVSR tuples.
/// Returns the discounted operating cost, or nullopt when infeasible.
std::optional<double> oracle_lp(const PlanningProblem& p, const std::vector<BuildSet>& cum,
                                const std::vector<StateKey>& states, const std::vector<std::pair<StateKey, int>>& active,
                                unsigned long signs, const PlannerOptions& po, long& lp_count) {
  const auto& net = p.network;
  const double S = net.base_mva;
  MilpModel m;
  std::map<std::pair<StateKey, int>, int> angle;
  std::map<std::pair<StateKey, int>, int> gen;
  std::map<std::pair<StateKey, int>, int> sign_of;
  for (std::size_t i = 0; i < active.size(); ++i) sign_of[active[i]] = (signs >> i) & 1UL ? -1 : 1;

  int counter = 0;
  auto fresh = [&](double lo, double hi, double obj) {
    return m.add_variable(Variable{fmt::format("v{}", counter++), VarKind::Continuous, lo, hi, obj});
  };
  for (const auto& s : states) {
    const auto& built = cum.at(static_cast<std::size_t>(s.stage - 1));
    for (const auto& b : net.buses) angle[{s, b.id}] = fresh(b.is_slack ? 0.0 : -kInf, b.is_slack ? 0.0 : kInf, 0.0);
    std::map<int, std::vector<Term>> bal;
    for (const auto& g : net.generators) {
      if (!g.in_service) continue;
      const double w = s.outage == 0 ? p.operating_weight(s.block, s.stage) * g.cost : 0.0;
      const int v = fresh(g.p_min, g.p_max, w);
      gen[{s, g.id}] = v;
      bal[g.bus].push_back({v, 1.0});
      if (s.outage != 0 && !p.is_redispatchable(g.id)) {
        m.add_constraint("fix", {{v, 1.0}, {gen.at({{0, s.block, s.stage}, g.id}), -1.0}}, Sense::Equal, 0.0);
      }
    }
    auto add_line = [&](int id, int from, int to, double b, double rating, const CvsrSite* site) {
      const int f = fresh(-rating, rating, 0.0);
      bal[from].push_back({f, -1.0});
      bal[to].push_back({f, 1.0});
      const int af = angle.at({s, from});
      const int at = angle.at({s, to});
      std::vector<Term> row{{f, 1.0}, {af, -S * b}, {at, S * b}};
      if (site) {
        // Angle limit holds on every candidate CVSR site in service.
        m.add_constraint("ang1", {{af, 1.0}, {at, -1.0}}, Sense::LessEqual, kThetaMax);
        m.add_constraint("ang2", {{af, 1.0}, {at, -1.0}}, Sense::GreaterEqual, -kThetaMax);
        auto it = sign_of.find({s, id});
        if (it != sign_of.end()) {
          const int sg = it->second;
          const int w = fresh(-kInf, kInf, 0.0);
          row.push_back({w, -1.0});
          // sg * theta >= 0 and w between b_min*theta and b_max*theta on that side.
          m.add_constraint("sgn", {{af, sg * 1.0}, {at, -sg * 1.0}}, Sense::GreaterEqual, 0.0);
          m.add_constraint("wlo", {{w, sg * 1.0}, {af, -sg * S * site->b_v_min}, {at, sg * S * site->b_v_min}},
                           Sense::GreaterEqual, 0.0);
          m.add_constraint("whi", {{w, sg * 1.0}, {af, -sg * S * site->b_v_max}, {at, sg * S * site->b_v_max}},
                           Sense::LessEqual, 0.0);
        }
      }
      m.add_constraint("flow", row, Sense::Equal, 0.0);
    };
    for (const auto& br : net.branches) {
      if (!br.in_service || br.id == s.outage) continue;
      const CvsrSite* site = po.allow_cvsr ? p.find_cvsr(br.id) : nullptr;
      add_line(br.id, br.from_bus, br.to_bus, br.susceptance, p.rating(br, s), site);
    }
    for (const auto& cl : p.candidates) {
      if (built.lines.count(cl.id)) add_line(cl.id, cl.from_bus, cl.to_bus, cl.susceptance, p.rating(cl, s), nullptr);
    }
    for (const auto& b : net.buses) {
      double d = 0.0;
      for (const auto& l : net.loads) {
        if (l.bus == b.id) d += p.demand(l, s.block, s.stage);
      }
      m.add_constraint("bal", bal[b.id], Sense::Equal, d);
    }
  }
  ++lp_count;
  const auto res = po.run(m);
  if (res.status == SolveStatus::Infeasible) return std::nullopt;
  if (!res.optimal()) throw SolverError(fmt::format("oracle LP ended with status {}", to_string(res.status)));
  return res.objective;
}

}  // namespace

OracleResult enumerate_plans_oracle(const PlanningProblem& p, const PlannerOptions& po) {
  const int T = static_cast<int>(p.stages.size());
  if (T > kOracleMaxStages) {
    throw ValidationError(fmt::format("oracle handles at most {} stages; the problem has {}", kOracleMaxStages, T));
  }
  std::vector<OracleItem> items;
  for (const auto& c : p.candidates) items.push_back({true, c.id, c.cost});
  if (po.allow_cvsr) {
    for (const auto& v : p.cvsr_sites) items.push_back({false, v.branch, v.cost});
  }
  if (static_cast<int>(items.size()) > kOracleMaxBuildBinaries) {
    throw ValidationError(fmt::format("oracle handles at most {} build binaries per stage; the problem has {}. Shrink the "
                                      "fixture.",
                                      kOracleMaxBuildBinaries, items.size()));
  }
  const auto states = p.all_states();
  // Trajectory = build stage per item (0 = never).
  const std::size_t n = items.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= static_cast<std::size_t>(T + 1);

  auto decode = [&](std::size_t code) {
    std::vector<int> when(n);
    for (std::size_t i = 0; i < n; ++i) {
      when[i] = static_cast<int>(code % static_cast<std::size_t>(T + 1));
      code /= static_cast<std::size_t>(T + 1);
    }
    return when;
  };
  // States of one (block, stage) share dispatch variables; different groups share nothing, so
  // each group is enumerated on its own and memoised by the builds in service at its stage.
  struct GroupKey {
    int stage = 1;
    int block = 1;
    BuildSet built;
    auto operator<=>(const GroupKey& o) const {
      if (auto c = std::tie(stage, block) <=> std::tie(o.stage, o.block); c != 0) return c;
      if (auto c = built.lines <=> o.built.lines; c != 0) return c;
      return built.cvsrs <=> o.built.cvsrs;
    }
    bool operator==(const GroupKey&) const = default;
  };
  auto group_states = [&](int stage, int block) {
    std::vector<StateKey> out;
    for (const auto& s : states) {
      if (s.stage == stage && s.block == block) out.push_back(s);
    }
    return out;
  };
  auto active_tuples = [&](const std::vector<StateKey>& group, const BuildSet& built) {
    std::vector<std::pair<StateKey, int>> act;
    for (const auto& s : group) {
      for (int k : built.cvsrs) {
        if (PlanningProblem::in_service(k, s) == 1) act.push_back({s, k});
      }
    }
    return act;
  };

  std::vector<std::vector<BuildSet>> trajectories;
  std::map<GroupKey, std::size_t> group_index;
  std::vector<GroupKey> groups;
  long total_lps = 0;
  for (std::size_t code = 0; code < combos; ++code) {
    const auto when = decode(code);
    std::vector<BuildSet> cum(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        if (when[i] == 0 || when[i] > t) continue;
        (items[i].line ? cum[static_cast<std::size_t>(t - 1)].lines : cum[static_cast<std::size_t>(t - 1)].cvsrs)
            .insert(items[i].id);
      }
    }
    for (int t = 1; t <= T; ++t) {
      for (int b = 1; b <= p.num_blocks(t); ++b) {
        GroupKey key{t, b, cum[static_cast<std::size_t>(t - 1)]};
        if (group_index.count(key)) continue;
        const auto act = active_tuples(group_states(t, b), key.built);
        if (act.size() > 20) throw ValidationError("oracle sign enumeration exceeds 2^20 patterns for one state group");
        total_lps += 1L << act.size();
        if (total_lps > kOracleMaxLps) {
          throw ValidationError(fmt::format("oracle search exceeds {} LPs; shrink the fixture", kOracleMaxLps));
        }
        group_index.emplace(key, groups.size());
        groups.push_back(key);
      }
    }
    trajectories.push_back(std::move(cum));
  }

  std::vector<std::optional<double>> group_cost(groups.size());
  std::vector<long> counts(groups.size(), 0);
  parallel_for(groups.size(), po.jobs, [&](std::size_t gi) {
    const auto& key = groups[gi];
    std::vector<BuildSet> cum(static_cast<std::size_t>(T));
    cum[static_cast<std::size_t>(key.stage - 1)] = key.built;
    const auto group = group_states(key.stage, key.block);
    const auto act = active_tuples(group, key.built);
    std::optional<double> best;
    for (unsigned long signs = 0; signs < (1UL << act.size()); ++signs) {
      auto v = oracle_lp(p, cum, group, act, signs, po, counts[gi]);
      if (v && (!best || *v < *best)) best = v;
    }
    group_cost[gi] = best;
  });

  OracleResult out;
  out.trajectories.resize(trajectories.size());
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const auto& cum = trajectories[ti];
    OracleTrajectory tr;
    tr.cumulative = cum;
    const BuildSet none;
    tr.feasible = true;
    for (int t = 1; t <= T; ++t) {
      const auto& cur = cum[static_cast<std::size_t>(t - 1)];
      const auto& prev = t == 1 ? none : cum[static_cast<std::size_t>(t - 2)];
      const double f = p.discount(p.stage(t).start_year);
      for (int k : cur.lines) {
        if (!prev.lines.count(k)) tr.investment += p.find_candidate(k)->cost * f;
      }
      for (int k : cur.cvsrs) {
        if (!prev.cvsrs.count(k)) tr.investment += p.find_cvsr(k)->cost * f;
      }
      for (int b = 1; b <= p.num_blocks(t); ++b) {
        const auto& c = group_cost[group_index.at(GroupKey{t, b, cur})];
        if (!c) tr.feasible = false;
        tr.operating += c.value_or(0.0);
      }
    }
    if (!tr.feasible) tr.operating = 0.0;
    tr.objective = tr.investment + tr.operating;
    out.trajectories[ti] = tr;
  }
  for (long c : counts) out.lp_solves += c;
  for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
    const auto& tr = out.trajectories[i];
    if (tr.feasible && (!out.best || tr.objective < out.trajectories[*out.best].objective)) out.best = i;
  }
  if (out.best) out.best_objective = out.trajectories[*out.best].objective;
  return out;
}

}  // namespace tepcvsr
