#pragma once

#include <optional>
#include <set>
#include <string>

#include "json.hpp"

#include "tepcvsr/decomp.hpp"

namespace tepcvsr {

/// Deterministic plan document: sorted keys, full precision, no timings.
nlohmann::json plan_to_json(const PlanningProblem& p, const ExpansionPlan& plan,
                            const std::optional<SecurityReport>& security = std::nullopt,
                            const std::optional<BigMAudit>& big_m = std::nullopt);

/// Reads back the builds and dispatch of a plan document written by plan_to_json.
ExpansionPlan plan_from_json(const PlanningProblem& p, const nlohmann::json& doc);

/// Recomputes the discounted total of a plan document from its own build costs, start years,
/// dispatch and the discount rate it records.
double recompute_total(const nlohmann::json& doc);

std::string costs_csv(const ExpansionPlan& plan);
std::string security_csv(const SecurityReport& rep);
std::string ranking_csv(const PlanningProblem& p, const ContingencyRanking& r);
std::string islanding_csv(const NetworkCase& c, const std::set<int>& islanding);

std::string cost_chart_svg(const ExpansionPlan& plan);
std::string slack_chart_svg(const SecurityReport& rep);

/// Human summary; money in M$ with two decimals.
std::string summary_text(const PlanningProblem& p, const ExpansionPlan& plan, double wall_time);

}  // namespace tepcvsr
