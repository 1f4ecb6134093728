#include "tepcvsr/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tepcvsr/error.hpp"

namespace tepcvsr {

using nlohmann::json;

namespace {

std::string csv_num(double v) { return fmt::format("{:.10g}", v); }

json audit_json(const LinearizationAudit& a) {
  return {{"tuples_checked", a.tuples_checked},
          {"active_tuples", a.active_tuples},
          {"worst_excess_pu", a.worst_excess},
          {"worst_inactive_w_pu", a.worst_inactive_w},
          {"worst_balance_pu", a.worst_balance},
          {"passed", a.passed()},
          {"failures", a.failures}};
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Bar {
  std::string label;
  std::vector<double> parts;
};

std::string bar_chart(const std::string& title, const std::string& unit, const std::vector<Bar>& bars,
                      const std::vector<std::string>& legend) {
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};
  const int width = std::max(320, 80 + 60 * static_cast<int>(bars.size()));
  const int height = 300;
  const int left = 60;
  const int bottom = 250;
  const int top = 40;
  double vmax = 0.0;
  for (const auto& b : bars) {
    double s = 0.0;
    for (double v : b.parts) s += std::max(0.0, v);
    vmax = std::max(vmax, s);
  }
  if (vmax <= 0.0) vmax = 1.0;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<text x=\"{}\" y=\"20\" font-size=\"14\">{}</text>\n",
      width, height, left, svg_escape(title));
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, bottom);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, bottom, width - 10);
  out += fmt::format("<text x=\"5\" y=\"{}\">{}</text>\n<text x=\"5\" y=\"{}\">0</text>\n", top + 4,
                     fmt::format("{:.3g} {}", vmax, unit), bottom);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const int x = left + 20 + 60 * static_cast<int>(i);
    double y = bottom;
    for (std::size_t j = 0; j < bars[i].parts.size(); ++j) {
      const double h = std::max(0.0, bars[i].parts[j]) / vmax * (bottom - top);
      y -= h;
      out += fmt::format("<rect x=\"{}\" y=\"{:.2f}\" width=\"40\" height=\"{:.2f}\" fill=\"{}\"/>\n", x, y, h,
                         colors[j % 4]);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", x, bottom + 15, svg_escape(bars[i].label));
  }
  for (std::size_t j = 0; j < legend.size(); ++j) {
    const int y = bottom + 30;
    const int x = left + 110 * static_cast<int>(j);
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{}</text>\n",
                       x, y - 9, colors[j % 4], x + 14, y, svg_escape(legend[j]));
  }
  return out + "</svg>\n";
}

}  // namespace

json plan_to_json(const PlanningProblem& p, const ExpansionPlan& plan, const std::optional<SecurityReport>& security,
                  const std::optional<BigMAudit>& big_m) {
  json doc;
  doc["mode"] = plan.mode;
  doc["optimal"] = plan.optimal;
  doc["discount_rate"] = p.discount_rate;
  doc["operating_cost_mode"] = p.operating_mode == OperatingCostMode::Literal ? "literal" : "per_year";
  doc["objective"] = {{"line_investment", plan.line_investment},
                      {"cvsr_investment", plan.cvsr_investment},
                      {"operating", plan.operating},
                      {"total", plan.total}};
  json stages = json::array();
  for (const auto& sp : plan.stages) {
    const auto& st = p.stage(sp.stage);
    json s;
    s["stage"] = sp.stage;
    s["start_year"] = sp.start_year;
    s["years"] = st.years;
    s["discount_factor"] = p.discount(sp.start_year);
    json lines = json::array();
    for (int k : sp.built_lines) {
      const auto& c = *p.find_candidate(k);
      lines.push_back({{"id", k}, {"from", c.from_bus}, {"to", c.to_bus}, {"cost", c.cost}});
    }
    json cvsrs = json::array();
    for (int k : sp.installed_cvsrs) {
      const auto& v = *p.find_cvsr(k);
      const auto& br = p.network.branch(k);
      cvsrs.push_back({{"branch", k},
                       {"from", br.from_bus},
                       {"to", br.to_bus},
                       {"cost", v.cost},
                       {"range_fraction", v.range_fraction},
                       {"b_v_min", v.b_v_min},
                       {"b_v_max", v.b_v_max}});
    }
    s["built_lines"] = lines;
    s["installed_cvsrs"] = cvsrs;
    s["lines_in_service"] = std::vector<int>(sp.cumulative.lines.begin(), sp.cumulative.lines.end());
    s["cvsrs_in_service"] = std::vector<int>(sp.cumulative.cvsrs.begin(), sp.cumulative.cvsrs.end());
    s["costs"] = {{"line", sp.line_cost}, {"cvsr", sp.cvsr_cost}, {"operating", sp.operating_cost}};
    json blocks = json::array();
    for (int b = 1; b <= p.num_blocks(sp.stage); ++b) {
      if (!plan.dispatch.has(b, sp.stage)) continue;
      const auto& blk = st.blocks[static_cast<std::size_t>(b - 1)];
      json gens = json::array();
      for (const auto& [g, mw] : plan.dispatch.pg.at({b, sp.stage})) {
        gens.push_back({{"id", g}, {"mw", mw}, {"cost", p.network.generator(g).cost}});
      }
      blocks.push_back({{"block", b},
                        {"name", blk.name},
                        {"hours", blk.hours},
                        {"scale", blk.scale},
                        {"weight", p.operating_weight(b, sp.stage)},
                        {"generators", gens}});
    }
    s["dispatch"] = blocks;
    stages.push_back(s);
  }
  doc["stages"] = stages;
  json items = json::array();
  for (const auto& it : plan.costs) {
    items.push_back({{"item", it.item},
                     {"type", it.type},
                     {"stage", it.stage},
                     {"undiscounted", it.undiscounted},
                     {"discounted", it.discounted}});
  }
  doc["cost_items"] = items;
  json audit;
  audit["linearization"] = audit_json(plan.audit);
  if (big_m) {
    audit["big_m"] = {{"constraints_checked", big_m->constraints_checked},
                      {"min_slack_mw", big_m->min_slack},
                      {"passed", big_m->passed()},
                      {"failures", big_m->failures}};
  }
  if (security) {
    audit["security"] = {{"max_slack_mw", security->max_slack},
                         {"secure", security->secure()},
                         {"states_checked", security->entries.size()}};
  }
  doc["audit"] = audit;
  return doc;
}

ExpansionPlan plan_from_json(const PlanningProblem& p, const json& doc) {
  ExpansionPlan plan;
  try {
    plan.mode = doc.value("mode", std::string("unknown"));
    BuildSet prev;
    std::vector<int> ids;
    std::vector<BuildSet> cum;
    for (const auto& s : doc.at("stages")) {
      StagePlan sp;
      sp.stage = s.at("stage").get<int>();
      if (sp.stage < 1 || sp.stage > static_cast<int>(p.stages.size())) {
        throw ValidationError(fmt::format("plan refers to stage {} which the config lacks", sp.stage));
      }
      sp.start_year = p.stage(sp.stage).start_year;
      for (int k : s.at("lines_in_service").get<std::vector<int>>()) {
        if (!p.find_candidate(k)) throw ValidationError(fmt::format("plan builds unknown candidate line {}", k));
        sp.cumulative.lines.insert(k);
      }
      for (int k : s.at("cvsrs_in_service").get<std::vector<int>>()) {
        if (!p.find_cvsr(k)) throw ValidationError(fmt::format("plan installs a CVSR on non-site branch {}", k));
        sp.cumulative.cvsrs.insert(k);
      }
      std::set_difference(sp.cumulative.lines.begin(), sp.cumulative.lines.end(), prev.lines.begin(), prev.lines.end(),
                          std::back_inserter(sp.built_lines));
      std::set_difference(sp.cumulative.cvsrs.begin(), sp.cumulative.cvsrs.end(), prev.cvsrs.begin(), prev.cvsrs.end(),
                          std::back_inserter(sp.installed_cvsrs));
      for (const auto& blk : s.at("dispatch")) {
        auto& snap = plan.dispatch.pg[{blk.at("block").get<int>(), sp.stage}];
        for (const auto& g : blk.at("generators")) snap[g.at("id").get<int>()] = g.at("mw").get<double>();
      }
      prev = sp.cumulative;
      ids.push_back(sp.stage);
      cum.push_back(sp.cumulative);
      plan.stages.push_back(sp);
    }
    const auto costs = compute_costs(p, ids, cum, plan.dispatch);
    plan.costs = costs.items;
    plan.line_investment = costs.line;
    plan.cvsr_investment = costs.cvsr;
    plan.operating = costs.operating;
    plan.total = costs.total();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed plan document: {}", e.what()));
  } catch (const ModelError& e) {
    throw ValidationError(fmt::format("plan does not match the problem: {}", e.what()));
  }
  return plan;
}

double recompute_total(const json& doc) {
  const double d = doc.at("discount_rate").get<double>();
  const bool literal = doc.at("operating_cost_mode").get<std::string>() == "literal";
  double total = 0.0;
  for (const auto& s : doc.at("stages")) {
    const int start = s.at("start_year").get<int>();
    const int years = s.at("years").get<int>();
    const double f = 1.0 / std::pow(1.0 + d, start - 1);
    for (const auto& l : s.at("built_lines")) total += l.at("cost").get<double>() * f;
    for (const auto& v : s.at("installed_cvsrs")) total += v.at("cost").get<double>() * f;
    double yearly = 0.0;
    for (int y = start; y < start + years; ++y) yearly += 1.0 / std::pow(1.0 + d, y - 1);
    for (const auto& blk : s.at("dispatch")) {
      double hourly = 0.0;
      for (const auto& g : blk.at("generators")) hourly += g.at("mw").get<double>() * g.at("cost").get<double>();
      const double hours = blk.at("hours").get<double>();
      total += hourly * hours * (literal ? years * f : yearly);
    }
  }
  return total;
}

std::string costs_csv(const ExpansionPlan& plan) {
  std::string out = "item,type,stage,undiscounted,discounted\n";
  for (const auto& it : plan.costs) {
    out += fmt::format("{},{},{},{},{}\n", it.item, it.type, it.stage, csv_num(it.undiscounted), csv_num(it.discounted));
  }
  return out;
}

std::string security_csv(const SecurityReport& rep) {
  std::string out = "contingency,block,stage,total_slack_MW,worst_branch\n";
  for (const auto& e : rep.entries) {
    out += fmt::format("{},{},{},{},{}\n", e.contingency, e.block, e.stage, csv_num(e.total_slack),
                       e.worst_branch == 0 ? std::string() : std::to_string(e.worst_branch));
  }
  return out;
}

std::string ranking_csv(const PlanningProblem& p, const ContingencyRanking& r) {
  std::string out = "rank,branch,from,to,operating_cost_per_h,circuit_loading\n";
  int rank = 0;
  for (const auto& e : r.entries) {
    const auto& br = p.network.branch(e.branch);
    out += fmt::format("{},{},{},{},{},{}\n", ++rank, e.branch, br.from_bus, br.to_bus,
                       std::isinf(e.cost) ? std::string("inf") : csv_num(e.cost),
                       std::isinf(e.loading) ? std::string("inf") : csv_num(e.loading));
  }
  return out;
}

std::string islanding_csv(const NetworkCase& c, const std::set<int>& islanding) {
  std::string out = "branch,from,to\n";
  for (int k : islanding) {
    const auto& br = c.branch(k);
    out += fmt::format("{},{},{}\n", k, br.from_bus, br.to_bus);
  }
  return out;
}

std::string cost_chart_svg(const ExpansionPlan& plan) {
  std::vector<Bar> bars;
  for (const auto& sp : plan.stages) {
    bars.push_back({fmt::format("stage {}", sp.stage), {sp.line_cost / 1e6, sp.cvsr_cost / 1e6, sp.operating_cost / 1e6}});
  }
  return bar_chart("Discounted cost per stage", "M$", bars, {"lines", "CVSR", "operating"});
}

std::string slack_chart_svg(const SecurityReport& rep) {
  std::map<int, double> worst;
  for (const auto& e : rep.entries) worst[e.contingency] = std::max(worst[e.contingency], e.total_slack);
  std::vector<Bar> bars;
  for (const auto& [c, v] : worst) bars.push_back({c == 0 ? std::string("base") : std::to_string(c), {v}});
  return bar_chart("Largest total slack per contingency", "MW", bars, {"slack"});
}

std::string summary_text(const PlanningProblem& p, const ExpansionPlan& plan, double wall_time) {
  std::string out = fmt::format("mode              {}\nstatus            {}\n", plan.mode, plan.optimal ? "optimal" : "non-optimal");
  for (const auto& sp : plan.stages) {
    std::string lines;
    for (int k : sp.built_lines) {
      const auto& c = *p.find_candidate(k);
      lines += fmt::format(" {}({}-{})", k, c.from_bus, c.to_bus);
    }
    std::string cvsrs;
    for (int k : sp.installed_cvsrs) {
      const auto& br = p.network.branch(k);
      cvsrs += fmt::format(" {}({}-{})", k, br.from_bus, br.to_bus);
    }
    out += fmt::format("stage {} (year {}) lines:{}  cvsr:{}\n", sp.stage, sp.start_year, lines.empty() ? " none" : lines,
                       cvsrs.empty() ? " none" : cvsrs);
  }
  out += fmt::format("Investment cost (M$)  {:.2f}  (lines {:.2f}, CVSR {:.2f})\n",
                     (plan.line_investment + plan.cvsr_investment) / 1e6, plan.line_investment / 1e6,
                     plan.cvsr_investment / 1e6);
  out += fmt::format("Operating cost (M$)   {:.2f}\n", plan.operating / 1e6);
  out += fmt::format("Total cost (M$)       {:.2f}\n", plan.total / 1e6);
  out += fmt::format("Wall time (s)         {:.2f}\n", wall_time);
  return out;
}

}  // namespace tepcvsr
