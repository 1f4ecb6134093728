#include "tepcvsr/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "tepcvsr/decomp.hpp"
#include "tepcvsr/error.hpp"
#include "tepcvsr/report.hpp"

namespace tepcvsr {

namespace fs = std::filesystem;

namespace {

struct Args {
  std::string case_path;
  std::string config_path;
  std::string out_dir = "out";
  std::string mode = "decomposed";
  std::string backend = "highs";
  std::string plan_path;
  std::optional<int> cc;
  double gap = 1e-8;
  double time_limit = 600.0;
  int jobs = 1;
  int threads = 1;
  bool no_cvsr = false;
  bool plots = false;
  std::optional<double> override_bigm;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
  out << text;
}

PlanningProblem load(const Args& a) {
  auto net = read_matpower_file(a.case_path);
  if (a.config_path.empty()) return load_problem(net, nlohmann::json::object());
  if (!fs::exists(a.config_path)) throw ValidationError(fmt::format("config file '{}' does not exist", a.config_path));
  return load_problem_file(net, a.config_path);
}

struct Session {
  std::unique_ptr<SolverBackend> backend;
  PlannerOptions po;
};

Session session(const Args& a) {
  Session s;
  s.backend = make_backend(a.backend);
  s.po.backend = s.backend.get();
  s.po.relative_gap = a.gap;
  s.po.time_limit = a.time_limit;
  s.po.jobs = std::max(1, a.jobs);
  s.po.threads = std::max(1, a.threads);
  s.po.allow_cvsr = !a.no_cvsr;
  s.po.cc_count = a.cc;
  s.po.override_m_k = a.override_bigm;
  return s;
}

fs::path out_dir(const Args& a) {
  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_screen(const Args& a, std::ostream& out) {
  const auto p = load(a);
  auto s = session(a);
  const auto ranking = rank_contingencies(p, {}, s.po, 1);
  const auto dir = out_dir(a);
  write_file(dir / "islanding.csv", islanding_csv(p.network, p.islanding));
  write_file(dir / "ranking.csv", ranking_csv(p, ranking));
  out << fmt::format("{} islanding branches, {} contingencies ranked (block {})\n", p.islanding.size(),
                     ranking.entries.size(), ranking.block);
  int shown = 0;
  for (const auto& e : ranking.entries) {
    if (++shown > 10) break;
    const auto& br = p.network.branch(e.branch);
    out << fmt::format("  {:>3}  branch {:>3} ({}-{})  cost {:>12.2f} $/h  loading {:.3f}\n", shown, e.branch,
                       br.from_bus, br.to_bus, e.cost, e.loading);
  }
  return kExitOk;
}

int cmd_plan(const Args& a, std::ostream& out, std::ostream& err) {
  const auto p = load(a);
  auto s = session(a);
  ExpansionPlan plan;
  std::optional<BigMAudit> big_m;
  double wall = 0.0;
  if (a.mode == "integrated") {
    auto r = integrated_plan(p, s.po);
    plan = r.plan;
    big_m = r.big_m;
    wall = r.wall_time;
  } else if (a.mode == "decomposed") {
    auto r = iterative_plan(p, s.po);
    plan = r.plan;
    wall = r.wall_time;
    for (const auto& log : r.log) {
      std::string cc;
      for (int c : log.critical) cc += fmt::format(" {}", c);
      out << fmt::format("stage {}: critical contingencies{}; {} repair iteration(s)\n", log.stage,
                         cc.empty() ? " none" : cc, log.repair_iterations);
      for (const auto& rep : log.repairs) out << "  repair " << rep << '\n';
    }
  } else {
    throw ValidationError(fmt::format("unknown mode '{}' (expected integrated or decomposed)", a.mode));
  }
  const auto security = verify_plan(p, plan, s.po);
  const auto dir = out_dir(a);
  write_file(dir / "plan.json", plan_to_json(p, plan, security, big_m).dump(2) + "\n");
  write_file(dir / "costs.csv", costs_csv(plan));
  write_file(dir / "security.csv", security_csv(security));
  const auto summary = summary_text(p, plan, wall);
  write_file(dir / "summary.txt", summary);
  if (a.plots) {
    write_file(dir / "costs.svg", cost_chart_svg(plan));
    write_file(dir / "slack.svg", slack_chart_svg(security));
  }
  out << summary;
  out << fmt::format("N-1 check: max total slack {:.3g} MW over {} states\n", security.max_slack, security.entries.size());
  if (big_m && !big_m->passed()) {
    err << "big-M audit failed: " << big_m->failures.front() << '\n';
    return kExitCheckFailed;
  }
  if (!plan.optimal) {
    err << "time limit reached; the plan written is the best found and is not proven optimal\n";
    return kExitTimeLimit;
  }
  if (!security.secure()) {
    err << fmt::format("plan is not N-1 secure (max slack {} MW)\n", security.max_slack);
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_verify(const Args& a, std::ostream& out, std::ostream& err) {
  const auto p = load(a);
  auto s = session(a);
  std::ifstream in(a.plan_path);
  if (!in) throw ValidationError(fmt::format("cannot open plan file '{}'", a.plan_path));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", a.plan_path, e.what()));
  }
  const auto plan = plan_from_json(p, doc);
  const auto rep = verify_plan(p, plan, s.po);
  const auto dir = out_dir(a);
  write_file(dir / "security.csv", security_csv(rep));
  if (a.plots) write_file(dir / "slack.svg", slack_chart_svg(rep));
  out << fmt::format("{} states checked, max total slack {:.6g} MW", rep.entries.size(), rep.max_slack);
  if (rep.worst && rep.max_slack > 0.0) {
    out << fmt::format(" (contingency {}, block {}, stage {})", rep.worst->contingency, rep.worst->block,
                       rep.worst->stage);
  }
  out << '\n';
  if (!rep.secure()) {
    err << "plan is not N-1 secure\n";
    return kExitCheckFailed;
  }
  out << "plan is N-1 secure\n";
  return kExitOk;
}

int cmd_oracle(const Args& a, std::ostream& out, std::ostream& err) {
  const auto p = load(a);
  auto s = session(a);
  // The oracle never sees the big-M constants; only the MILP does.
  auto oracle_po = s.po;
  oracle_po.override_m_k.reset();
  const auto oracle = enumerate_plans_oracle(p, oracle_po);

  auto opt = integrated_options(p, s.po.allow_cvsr);
  opt.override_m_k = s.po.override_m_k;
  const auto model = build_model(p, opt);
  const auto res = s.po.run(model);

  std::string table = "trajectory,builds,feasible,investment,operating,objective\n";
  out << fmt::format("{:>4}  {:<40} {:>9} {:>18}\n", "#", "builds per stage", "feasible", "objective");
  for (std::size_t i = 0; i < oracle.trajectories.size(); ++i) {
    const auto& tr = oracle.trajectories[i];
    std::string builds;
    for (std::size_t t = 0; t < tr.cumulative.size(); ++t) {
      if (t) builds += " | ";
      std::string items;
      for (int k : tr.cumulative[t].lines) items += fmt::format("L{} ", k);
      for (int k : tr.cumulative[t].cvsrs) items += fmt::format("V{} ", k);
      builds += items.empty() ? "-" : items.substr(0, items.size() - 1);
    }
    out << fmt::format("{:>4}  {:<40} {:>9} {:>18.6f}\n", i + 1, builds, tr.feasible ? "yes" : "no",
                       tr.feasible ? tr.objective : 0.0);
    table += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}\n", i + 1, builds, tr.feasible ? 1 : 0, tr.investment,
                         tr.operating, tr.objective);
  }
  write_file(out_dir(a) / "oracle.csv", table);

  const bool milp_ok = res.optimal();
  if (!oracle.best) {
    out << "oracle: no feasible trajectory\n";
    out << fmt::format("MILP: status {}\n", to_string(res.status));
    if (res.status == SolveStatus::Infeasible) return kExitOk;
    err << "mismatch: the MILP found a plan the oracle considers infeasible\n";
    return kExitCheckFailed;
  }
  out << fmt::format("oracle objective {:.10f}  ({} LPs)\n", oracle.best_objective, oracle.lp_solves);
  if (!milp_ok) {
    out << fmt::format("MILP status {}\n", to_string(res.status));
    err << "mismatch: the MILP has no optimal solution\n";
    return kExitCheckFailed;
  }
  const double rel = std::abs(res.objective - oracle.best_objective) / std::max(1.0, std::abs(oracle.best_objective));
  out << fmt::format("MILP objective   {:.10f}  relative difference {:.3g}\n", res.objective, rel);
  if (rel > 1e-6) {
    err << "mismatch between MILP and enumeration oracle\n";
    return kExitCheckFailed;
  }
  out << "match\n";
  return kExitOk;
}

int cmd_export(const Args& a, std::ostream& out) {
  const auto p = load(a);
  auto opt = integrated_options(p, !a.no_cvsr);
  opt.override_m_k = a.override_bigm;
  const auto model = build_model(p, opt);
  const auto dir = out_dir(a);
  write_file(dir / "model.lp", to_lp_string(model));
  write_file(dir / "model.mps", to_mps_string(model));
  out << fmt::format("{} variables ({} binary), {} constraints\n", model.variables().size(), model.num_binaries(),
                     model.constraints().size());
  return kExitOk;
}

void common_options(CLI::App* sub, Args& a, bool planning) {
  sub->add_option("--case", a.case_path, "MATPOWER case file")->required();
  sub->add_option("--config", a.config_path, "planning config (JSON)");
  sub->add_option("--out", a.out_dir, "output directory");
  sub->add_option("--backend", a.backend, "highs, subprocess or subprocess:<command template>");
  sub->add_option("--gap", a.gap, "relative MIP gap");
  sub->add_option("--time-limit", a.time_limit, "time limit per solve, seconds")->check(CLI::PositiveNumber);
  sub->add_option("--jobs", a.jobs, "parallel subproblems")->check(CLI::PositiveNumber);
  sub->add_option("--threads", a.threads, "solver threads")->check(CLI::PositiveNumber);
  sub->add_flag("--no-cvsr", a.no_cvsr, "ignore all CVSR sites");
  sub->add_flag("--plots", a.plots, "write SVG charts");
  if (planning) {
    sub->add_option("--cc", a.cc, "number of critical contingencies in the master");
    sub->add_option("--override-bigm", a.override_bigm, "replace every M_k (per unit); testing only");
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Transmission expansion planning with series reactors"};
  app.name("tepcvsr");
  app.require_subcommand(1);
  auto* screen = app.add_subcommand("screen", "islanding detection and contingency ranking");
  common_options(screen, a, false);
  auto* plan = app.add_subcommand("plan", "solve the planning problem");
  common_options(plan, a, true);
  plan->add_option("--mode", a.mode, "integrated or decomposed")
      ->check(CLI::IsMember({"integrated", "decomposed"}));
  auto* verify = app.add_subcommand("verify", "N-1 check of a plan.json");
  common_options(verify, a, false);
  verify->add_option("--plan", a.plan_path, "plan document")->required();
  auto* oracle = app.add_subcommand("oracle", "compare the MILP with brute-force enumeration");
  common_options(oracle, a, true);
  auto* exporter = app.add_subcommand("export", "write the integrated model as LP and MPS files");
  common_options(exporter, a, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (screen->parsed()) return cmd_screen(a, out);
    if (plan->parsed()) return cmd_plan(a, out, err);
    if (verify->parsed()) return cmd_verify(a, out, err);
    if (oracle->parsed()) return cmd_oracle(a, out, err);
    if (exporter->parsed()) return cmd_export(a, out);
  } catch (const TimeLimitError& e) {
    err << "time limit: " << e.what() << '\n';
    return kExitTimeLimit;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const AuditError& e) {
    err << "audit failed: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace tepcvsr
