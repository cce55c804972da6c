#pragma once

#include "commitgate/survival.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace commitgate {

enum class TableFormat { kCsv, kMarkdown };

// "***" p < 0.001, "**" p < 0.01, "*" p < 0.05, otherwise empty.
std::string significance_stars(double p);

// "<stat> on <df> df, p=<p>", e.g. "570.2 on 15 df, p=<2e-16".
std::string format_test(const TestStatistic& test);

std::string render_coefficient_table(const CoxFit& fit, TableFormat format);

struct CoefficientRow {
  std::string name;
  double coef = 0;
  double exp_coef = 0;
  double se = 0;
  double z = 0;
  double p = 0;
  std::string stars;
};

// Reads the CSV form of render_coefficient_table; footer comments are ignored.
std::vector<CoefficientRow> read_coefficient_csv(std::string_view text);

nlohmann::json fit_to_json(const CoxFit& fit);
CoxFit fit_from_json(const nlohmann::json& j);

std::string write_hazard_csv(const std::vector<HazardPoint>& curve);
std::vector<HazardPoint> read_hazard_csv(std::string_view text);

// Preprocessing trace: one row per action.
struct ScreeningEntry {
  std::string step;       // "zscore", "near_zero_variance", "vif_drop", "vif_keep", "incomplete"
  std::string covariate;  // empty for row-level summaries
  double value = 0;       // rows removed, VIF, ...
};

std::string write_screening_csv(const std::vector<ScreeningEntry>& entries);
std::vector<ScreeningEntry> read_screening_csv(std::string_view text);

}  // namespace commitgate
