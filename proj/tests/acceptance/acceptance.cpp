// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

#include <fmt/format.h>

#include "../test_support.hpp"
#include "tepcvsr/error.hpp"
#include "tepcvsr/report.hpp"

using namespace tepcvsr;
using nlohmann::json;

namespace {

// Tolerances.
constexpr double kOracleRelTol = 1e-6;
constexpr double kOracleBudgetS = 30.0;
constexpr double kRatioTol = 1e-6;          // on w/theta, per unit
constexpr double kInactiveWTol = 1e-7;      // |w| per unit
constexpr double kThetaTiny = 1e-9;
constexpr int kRandomFixtures = 100;
constexpr double kBigMMargin = 1e-6;        // MW
constexpr double kSlackTol = 1e-4;          // MW
constexpr double kSecurityBudgetS = 300.0;
constexpr double kCostTolMusd = 1e-6;       // M$
constexpr double kMaxDecompGap = 0.02;
constexpr double kDiscount2 = 0.783526;
constexpr double kDiscountPrint = 5e-7;     // the figure is printed to 6 decimals
constexpr double kRecomputeRelTol = 1e-9;
constexpr double kSusceptanceTol = 1e-9;
constexpr int kSusceptanceSamples = 1000;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Fixture {
  std::string name, case_name, config;
};

const std::vector<Fixture> kOracleFixtures = {
    {"case3", "case3", "case3"}, {"case3-n1", "case3", "case3_n1"}, {"corridor4", "corridor4", "corridor4"},
    {"ring3", "ring3", "ring3"}, {"garver6c", "garver6c", "garver6c"}};
const Fixture kRts{"case24", "case24_rts", "case24_rts"};

std::vector<Fixture> all_fixtures() {
  auto v = kOracleFixtures;
  v.push_back({"radial3", "radial3", "radial3"});
  v.push_back(kRts);
  return v;
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!ok) ++failures;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, fmt::format("exception: {}", e.what()));
  }
}

struct Solved {
  MilpModel model;
  BuildOptions opt;
  SolveResult res;
};

Solved solve_integrated(const PlanningProblem& p, const PlannerOptions& po, bool allow_cvsr = true) {
  Solved s;
  s.opt = integrated_options(p, allow_cvsr);
  s.opt.override_m_k = po.override_m_k;
  s.model = build_model(p, s.opt);
  s.res = po.run(s.model);
  return s;
}

// Direct check on the raw solution vector, without the library's audit.
struct Fidelity {
  int active = 0, inactive = 0;
  double worst_ratio = 0.0, worst_w = 0.0;
  bool ok() const { return worst_ratio <= kRatioTol && worst_w <= kInactiveWTol; }
};

void check_fidelity(const PlanningProblem& p, const Solved& s, Fidelity& f) {
  if (!s.opt.allow_cvsr) return;
  const double S = p.network.base_mva;
  auto val = [&](const VarKey& k) { return s.res.values[static_cast<std::size_t>(s.model.require(k))]; };
  for (const auto& st : s.opt.states) {
    for (const auto& site : p.cvsr_sites) {
      const auto& br = p.network.branch(site.branch);
      const int n = br.id == st.outage ? 0 : 1;
      const double delta = std::round(val({Role::BuildCvsr, br.id, 0, 0, st.stage}));
      const double w = val({Role::CvsrFlow, br.id, st.outage, st.block, st.stage}) / S;
      const double th = val({Role::Angle, br.from_bus, st.outage, st.block, st.stage}) -
                        val({Role::Angle, br.to_bus, st.outage, st.block, st.stage});
      if (delta == 1.0 && n == 1) {
        if (std::abs(th) <= kThetaTiny) continue;
        ++f.active;
        const double r = w / th;
        f.worst_ratio = std::max({f.worst_ratio, site.b_v_min - r, r - site.b_v_max});
      } else {
        ++f.inactive;
        f.worst_w = std::max(f.worst_w, std::abs(w));
      }
    }
  }
}

bool monotone_raw(const PlanningProblem& p, const Solved& s) {
  auto val = [&](const VarKey& k) { return s.res.values[static_cast<std::size_t>(s.model.require(k))]; };
  for (std::size_t t = 1; t < p.stages.size(); ++t) {
    const int a = p.stages[t - 1].index, b = p.stages[t].index;
    for (const auto& c : p.candidates) {
      if (std::round(val({Role::BuildLine, c.id, 0, 0, b})) < std::round(val({Role::BuildLine, c.id, 0, 0, a})))
        return false;
    }
    if (!s.opt.allow_cvsr) continue;
    for (const auto& v : p.cvsr_sites) {
      if (std::round(val({Role::BuildCvsr, v.branch, 0, 0, b})) < std::round(val({Role::BuildCvsr, v.branch, 0, 0, a})))
        return false;
    }
  }
  return true;
}

bool nested(const ExpansionPlan& plan) {
  for (std::size_t t = 1; t < plan.stages.size(); ++t) {
    const auto& a = plan.stages[t - 1].cumulative;
    const auto& b = plan.stages[t].cumulative;
    if (!std::includes(b.lines.begin(), b.lines.end(), a.lines.begin(), a.lines.end())) return false;
    if (!std::includes(b.cvsrs.begin(), b.cvsrs.end(), a.cvsrs.begin(), a.cvsrs.end())) return false;
  }
  return true;
}

}  // namespace

int main() {
  PlannerOptions po;  // threads = 1, gap 1e-8
  std::map<std::string, PlanningProblem> probs;
  for (const auto& f : all_fixtures()) probs.emplace(f.name, testing::fixture(f.case_name, f.config));

  // Shared runs on the 24-bus fixture.
  std::optional<DecompositionResult> rts_dec, rts_dec_nocvsr;
  std::optional<IntegratedResult> rts_int, rts_int_nocvsr;
  std::optional<SecurityReport> rts_sec;
  double rts_dec_time = 0.0, rts_int_time = 0.0, rts_verify_time = 0.0;
  std::string rts_error;
  try {
    const auto& p = probs.at(kRts.name);
    auto t0 = Clock::now();
    rts_dec = iterative_plan(p, po);
    rts_dec_time = since(t0);
    t0 = Clock::now();
    rts_sec = verify_plan(p, rts_dec->plan, po);
    rts_verify_time = since(t0);
    t0 = Clock::now();
    rts_int = integrated_plan(p, po);
    rts_int_time = since(t0);
    auto off = po;
    off.allow_cvsr = false;
    rts_int_nocvsr = integrated_plan(p, off);
    rts_dec_nocvsr = iterative_plan(p, off);
  } catch (const std::exception& e) {
    rts_error = e.what();
  }

  // 1. Oracle equivalence.
  guarded(1, [&] {
    const auto t0 = Clock::now();
    int matched = 0;
    std::string detail;
    for (const auto& f : kOracleFixtures) {
      const auto& p = probs.at(f.name);
      const auto oracle = enumerate_plans_oracle(p, po);
      const auto s = solve_integrated(p, po);
      const bool ok = oracle.best && s.res.optimal() &&
                      testing::rel_close(s.res.objective, oracle.best_objective, kOracleRelTol);
      matched += ok;
      detail += fmt::format(" {}={}", f.name, ok ? "match" : "MISMATCH");
    }
    const double secs = since(t0);
    report(1, matched == static_cast<int>(kOracleFixtures.size()) && matched >= 3 && secs < kOracleBudgetS,
           fmt::format("{}/{} fixtures match within {} rel;{}; {:.2f} s (limit {} s)", matched, kOracleFixtures.size(),
                       kOracleRelTol, detail, secs, kOracleBudgetS));
  });

  // 2. Linearization fidelity on the fixtures, the decomposed runs and random instances.
  guarded(2, [&] {
    Fidelity f;
    bool audits = true;
    for (const auto& fx : all_fixtures()) {
      const auto& p = probs.at(fx.name);
      if (fx.name == kRts.name) continue;  // covered by the shared runs below
      const auto s = solve_integrated(p, po);
      if (s.res.optimal()) check_fidelity(p, s, f);
      const auto dec = iterative_plan(p, po);
      audits = audits && dec.plan.audit.passed();
      for (const auto& h : dec.history) audits = audits && h.audit.passed();
    }
    if (rts_int) audits = audits && rts_int->plan.audit.passed();
    if (rts_dec) {
      audits = audits && rts_dec->plan.audit.passed();
      for (const auto& h : rts_dec->history) audits = audits && h.audit.passed();
    }
    if (rts_sec) audits = audits && rts_sec->audit.passed();

    std::mt19937 rng(424242);
    int solved = 0, tried = 0;
    while (solved < kRandomFixtures && tried < 20 * kRandomFixtures) {
      ++tried;
      const int n = 4 + static_cast<int>(rng() % 4);
      json cfg{{"blocks", json::array({json{{"name", "a"}, {"scale", 1.0}, {"hours", 2760}},
                                       json{{"name", "b"}, {"scale", 0.55}, {"hours", 6000}}})},
               {"contingencies", tried % 2 ? "auto" : "none"},
               {"redispatchable_generators", "all"},
               {"cvsr_sites", "all_lines"},
               {"candidate_lines", json::array({json{{"parallel_to", 1}, {"cost", 4e7}}})}};
      PlanningProblem p;
      Solved s;
      try {
        p = load_problem(parse_matpower(testing::random_case_text(rng, n)), cfg);
        for (auto& site : p.cvsr_sites) site.cost = 1e5 + 1e6 * static_cast<double>(rng() % 5);
        s = solve_integrated(p, po);
      } catch (const ValidationError&) {
        continue;
      }
      if (!s.res.optimal()) continue;
      ++solved;
      check_fidelity(p, s, f);
    }
    report(2, f.ok() && audits && solved >= kRandomFixtures && f.active > 0,
           fmt::format("{} random + {} fixture instances; {} active tuples, worst ratio excess {:.3g} (tol {}); "
                       "{} inactive, worst |w| {:.3g} pu (tol {}); library audits {}",
                       solved, all_fixtures().size(), f.active, f.worst_ratio, kRatioTol, f.inactive, f.worst_w,
                       kInactiveWTol, audits ? "clean" : "FAILED"));
  });

  // 3. Big-M audit, and the corrupted constant must break criterion 1.
  guarded(3, [&] {
    bool ok = true;
    int checked = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& fx : all_fixtures()) {
      const auto& p = probs.at(fx.name);
      if (fx.name == kRts.name) {
        if (!rts_int) {
          ok = false;
          continue;
        }
        ok = ok && rts_int->big_m.passed();
        checked += rts_int->big_m.constraints_checked;
        min_slack = std::min(min_slack, rts_int->big_m.min_slack);
        continue;
      }
      const auto s = solve_integrated(p, po);
      const auto a = audit_big_m(s.model, s.res.values, p, s.opt, kBigMMargin);
      ok = ok && a.passed();
      checked += a.constraints_checked;
      if (a.constraints_checked) min_slack = std::min(min_slack, a.min_slack);
    }
    const auto& p3 = probs.at("case3");
    auto bad = po;
    bad.override_m_k = 0.01;
    const auto corrupted = solve_integrated(p3, bad);
    const auto oracle = enumerate_plans_oracle(p3, po);
    const bool flipped = !corrupted.res.optimal() ||
                         !testing::rel_close(corrupted.res.objective, oracle.best_objective, kOracleRelTol);
    report(3, ok && flipped && checked > 0,
           fmt::format("{} deactivated rows, min slack {:.4g} MW (margin {}); override 0.01 pu gives {:.6f} M$ vs "
                       "oracle {:.6f} M$: {}",
                       checked, min_slack, kBigMMargin, corrupted.res.objective / 1e6, oracle.best_objective / 1e6,
                       flipped ? "mismatch detected" : "NOT detected"));
  });

  // 4. Security soundness on the 24-bus fixture.
  guarded(4, [&] {
    if (!rts_dec || !rts_sec) throw Error(rts_error);
    const auto& p = probs.at(kRts.name);
    std::set<int> expected;
    for (const auto& br : p.network.branches)
      if (br.in_service && !testing::bridges_by_removal(p.network).count(br.id)) expected.insert(br.id);
    const bool full = std::set<int>(p.contingencies.begin(), p.contingencies.end()) == expected;
    const double secs = rts_dec_time + rts_verify_time;
    report(4, full && rts_sec->max_slack <= kSlackTol && secs < kSecurityBudgetS,
           fmt::format("{} contingencies (all lines minus {} islanding), {} states; max total slack {:.3g} MW "
                       "(tol {}); plan + verify {:.1f} s (limit {} s)",
                       p.contingencies.size(), p.islanding.size(), rts_sec->entries.size(), rts_sec->max_slack,
                       kSlackTol, secs, kSecurityBudgetS));
  });

  // 5. CVSR benefit direction and investment substitution.
  guarded(5, [&] {
    if (!rts_int || !rts_int_nocvsr) throw Error(rts_error);
    const double with = rts_int->plan.total / 1e6, without = rts_int_nocvsr->plan.total / 1e6;
    const bool direction = with <= without + kCostTolMusd;
    bool strict = with < without - kCostTolMusd;
    bool fewer = rts_int->plan.final_builds().lines.size() < rts_int_nocvsr->plan.final_builds().lines.size();
    std::string where = strict ? "case24" : "";
    std::string sub = fewer ? "case24" : "";
    for (const auto& f : kOracleFixtures) {
      const auto& p = probs.at(f.name);
      auto off = po;
      off.allow_cvsr = false;
      const auto a = integrated_plan(p, po), b = integrated_plan(p, off);
      if (a.plan.total / 1e6 < b.plan.total / 1e6 - kCostTolMusd) {
        strict = true;
        where += (where.empty() ? "" : ",") + f.name;
      }
      if (a.plan.final_builds().lines.size() < b.plan.final_builds().lines.size()) {
        fewer = true;
        sub += (sub.empty() ? "" : ",") + f.name;
      }
    }
    report(5, direction && strict && fewer,
           fmt::format("case24 (rating x{}) total {:.4f} M$ with CVSR vs {:.4f} M$ without ({} vs {} lines); "
                       "strict gain on [{}]; fewer lines on [{}]",
                       probs.at(kRts.name).rating_multiplier, with, without, rts_int->plan.final_builds().lines.size(),
                       rts_int_nocvsr->plan.final_builds().lines.size(), where, sub));
  });

  // 6. Decomposition quality.
  guarded(6, [&] {
    if (!rts_dec || !rts_int || !rts_dec_nocvsr || !rts_int_nocvsr) throw Error(rts_error);
    bool bound = true;
    std::string detail;
    for (const auto& f : kOracleFixtures) {
      const auto& p = probs.at(f.name);
      const double in = integrated_plan(p, po).plan.total / 1e6;
      const double de = iterative_plan(p, po).plan.total / 1e6;
      bound = bound && de >= in - kCostTolMusd;
      detail += fmt::format(" {}:{:.3g}%", f.name, 100.0 * (de - in) / in);
    }
    const double in = rts_int->plan.total / 1e6, de = rts_dec->plan.total / 1e6;
    bound = bound && de >= in - kCostTolMusd;
    bound = bound && rts_dec_nocvsr->plan.total / 1e6 >= rts_int_nocvsr->plan.total / 1e6 - kCostTolMusd;
    const double gap = (de - in) / in;
    const bool proven = rts_int->plan.optimal && rts_dec->plan.optimal;
    report(6, proven && bound && gap < kMaxDecompGap && rts_dec_time < rts_int_time,
           fmt::format("case24: decomposed {:.4f} M$ vs integrated {:.4f} M${}, gap {:.4f}% (limit {}%); "
                       "wall {:.2f} s vs {:.2f} s ({:.1f}x); gaps on small fixtures:{}",
                       de, in, proven ? " (both proven optimal)" : " (NOT proven optimal)", 100 * gap, 100 * kMaxDecompGap, rts_dec_time, rts_int_time,
                       rts_int_time / std::max(rts_dec_time, 1e-9), detail));
  });

  // 7. Monotone builds and discounting.
  guarded(7, [&] {
    bool mono = true, recompute = true;
    double worst_rel = 0.0;
    double factor = 0.0;
    int plans = 0;
    auto check_plan = [&](const PlanningProblem& p, const ExpansionPlan& plan) {
      ++plans;
      mono = mono && nested(plan);
      const auto doc = json::parse(plan_to_json(p, plan).dump(2));
      const double rel = std::abs(recompute_total(doc) - plan.total) / std::max(1.0, std::abs(plan.total));
      worst_rel = std::max(worst_rel, rel);
      recompute = recompute && rel <= kRecomputeRelTol;
      if (doc.at("stages").size() >= 2) factor = doc.at("stages")[1].at("discount_factor").get<double>();
    };
    for (const auto& f : all_fixtures()) {
      const auto& p = probs.at(f.name);
      if (f.name == kRts.name) {
        if (!rts_int || !rts_dec) throw Error(rts_error);
        check_plan(p, rts_int->plan);
        check_plan(p, rts_dec->plan);
        continue;
      }
      const auto s = solve_integrated(p, po);
      mono = mono && monotone_raw(p, s);
      check_plan(p, extract_plan(s.model, s.res.values, p, s.opt));
      check_plan(p, iterative_plan(p, po).plan);
    }
    const bool disc = std::abs(factor - kDiscount2) <= kDiscountPrint &&
                      std::abs(factor - 1.0 / std::pow(1.05, 5)) <= 1e-15;
    report(7, mono && recompute && disc,
           fmt::format("{} plans nested stage to stage: {}; stage-2 factor {:.9f}; plan.json recompute worst rel "
                       "error {:.3g} (tol {})",
                       plans, mono ? "yes" : "NO", factor, worst_rel, kRecomputeRelTol));
  });

  // 8. Susceptance bounds.
  guarded(8, [&] {
    const auto r = cvsr_susceptance_bounds(0.1, 0.0, 0.02);
    const bool hand = std::abs(r.b_min - (-0.02 / (0.1 * 0.12))) <= kSusceptanceTol &&
                      std::abs(r.b_min - (-1.66667)) <= 1e-5 && std::abs(r.b_max) <= kSusceptanceTol;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> xk(0.005, 2.0), frac(0.0, 0.5);
    double worst = 0.0;
    for (int i = 0; i < kSusceptanceSamples; ++i) {
      const double x = xk(rng);
      double a = frac(rng) * x, b = frac(rng) * x;
      if (a > b) std::swap(a, b);
      const auto s = cvsr_susceptance_bounds(x, a, b);
      worst = std::max({worst, std::abs(1.0 / x + s.b_min - 1.0 / (x + b)), std::abs(1.0 / x + s.b_max - 1.0 / (x + a))});
    }
    report(8, hand && worst <= kSusceptanceTol,
           fmt::format("x=0.1, x_v_max=0.02: b_v_min={:.6f}, b_v_max={:.3g}; identity over {} samples, worst {:.3g} "
                       "(tol {})",
                       r.b_min, r.b_max, kSusceptanceSamples, worst, kSusceptanceTol));
  });

  // 9. Screening.
  guarded(9, [&] {
    bool all = true;
    std::string detail;
    for (const auto& f : all_fixtures()) {
      const auto& p = probs.at(f.name);
      const auto want = testing::bridges_by_removal(p.network);
      const bool ok = islanding_contingencies(p.network) == want && p.islanding == want;
      all = all && ok;
      detail += fmt::format(" {}:{}", f.name, want.size());
    }
    const auto& rts = probs.at(kRts.name).network;
    bool has78 = false;
    for (int id : islanding_contingencies(rts)) {
      const auto& br = rts.branch(id);
      has78 = has78 || (std::min(br.from_bus, br.to_bus) == 7 && std::max(br.from_bus, br.to_bus) == 8);
    }
    report(9, all && has78,
           fmt::format("islanding sets equal brute-force bridges (counts{}); case24 contains 7-8: {}", detail,
                       has78 ? "yes" : "NO"));
  });

  std::cout << fmt::format("{} of 9 criteria failed", failures) << std::endl;
  return failures;
}
