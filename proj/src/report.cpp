#include "commitgate/report.hpp"

#include "commitgate/csv.hpp"
#include "commitgate/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <limits>

namespace commitgate {

using nlohmann::json;

namespace {

constexpr double kSmallestPrintedP = 2.2e-16;

std::string format_statistic(double x) {
  if (!std::isfinite(x)) return csv::format_double(x);
  if (std::abs(x) >= 1e4) return fmt::format("{:.0f}", x);
  return fmt::format("{:.4g}", x);
}

std::string format_p(double p) {
  if (std::isnan(p)) return "nan";
  if (p < kSmallestPrintedP) return "<2e-16";
  return fmt::format("{:.2g}", p);
}

// Two decimals; avoids printing "-0.00".
std::string fixed2(double x) {
  if (!std::isfinite(x)) return csv::format_double(x);
  std::string s = fmt::format("{:.2f}", x);
  if (s == "-0.00") s = "0.00";
  return s;
}

double parse_number(const std::string& field, std::string_view what) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw InputError(fmt::format("{}: '{}' is not a number", what, field));
  }
  return v;
}

json number(double x) {
  if (std::isfinite(x)) return x;
  return csv::format_double(x);
}

double number_of(const json& j) {
  if (j.is_string()) return parse_number(j.get<std::string>(), "fit json");
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Eigen::VectorXd vector_of(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_of(j[i]);
  return v;
}

json test_json(const TestStatistic& t) {
  return {{"statistic", number(t.statistic)}, {"df", t.df}, {"p", number(t.p)}};
}

TestStatistic test_of(const json& j) {
  return {number_of(j.at("statistic")), j.at("df").get<int>(), number_of(j.at("p"))};
}

}  // namespace

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::string format_test(const TestStatistic& test) {
  return fmt::format("{} on {} df, p={}", format_statistic(test.statistic), test.df,
                     format_p(test.p));
}

std::string render_coefficient_table(const CoxFit& fit, TableFormat format) {
  const auto n = fit.covariate_names.size();
  std::string out;
  if (format == TableFormat::kCsv) {
    if (!fit.converged) out += "# NONCONVERGED: " + fit.diagnostic + "\n";
    out += csv::format_row({"name", "coef", "exp_coef", "se", "z", "p", "stars"});
    for (std::size_t j = 0; j < n; ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      out += csv::format_row({fit.covariate_names[j], csv::format_double(fit.beta(i)),
                              csv::format_double(fit.exp_beta(i)), csv::format_double(fit.se(i)),
                              csv::format_double(fit.z(i)), csv::format_double(fit.p(i)),
                              fit.converged ? significance_stars(fit.p(i)) : ""});
    }
    if (fit.converged) {
      out += "# Likelihood ratio test: " + format_test(fit.lr) + "\n";
      out += "# Wald test: " + format_test(fit.wald) + "\n";
      out += "# Score (logrank) test: " + format_test(fit.score) + "\n";
    }
    return out;
  }

  if (!fit.converged) out += "**NONCONVERGED**: " + fit.diagnostic + "\n\n";
  out += "| Covariate | Coef | EXP(Coef) | SE(Coef) | Z |\n";
  out += "|---|---:|---:|---:|---:|\n";
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    const std::string stars = fit.converged ? significance_stars(fit.p(i)) : "";
    out += fmt::format("| {} | {}{} | {} | {} | {} |\n", fit.covariate_names[j], fixed2(fit.beta(i)),
                       stars, fixed2(fit.exp_beta(i)), fixed2(fit.se(i)), fixed2(fit.z(i)));
  }
  out += "\n";
  if (fit.converged) {
    out += "Likelihood ratio test: " + format_test(fit.lr) + "  \n";
    out += "Wald test: " + format_test(fit.wald) + "  \n";
    out += "Score (logrank) test: " + format_test(fit.score) + "  \n";
    out += "\n***p < 0.001, **p < 0.01, *p < 0.05\n";
  } else {
    out += "Global tests not reported for a nonconverged fit.\n";
  }
  return out;
}

std::vector<CoefficientRow> read_coefficient_csv(std::string_view text) {
  const csv::Table t =
      csv::parse_table(text, {"name", "coef", "exp_coef", "se", "z", "p", "stars"});
  std::vector<CoefficientRow> out;
  for (const auto& r : t.rows) {
    out.push_back({r[0], parse_number(r[1], "coef"), parse_number(r[2], "exp_coef"),
                   parse_number(r[3], "se"), parse_number(r[4], "z"), parse_number(r[5], "p"),
                   r[6]});
  }
  return out;
}

json fit_to_json(const CoxFit& fit) {
  json baseline = json::array();
  for (const auto& b : fit.baseline) {
    baseline.push_back(
        {{"lower", number(b.lower)}, {"upper", number(b.upper)}, {"log_hazard", number(b.log_hazard)}});
  }
  return {{"covariates", fit.covariate_names},
          {"beta", vector_json(fit.beta)},
          {"exp_beta", vector_json(fit.exp_beta)},
          {"se", vector_json(fit.se)},
          {"z", vector_json(fit.z)},
          {"p", vector_json(fit.p)},
          {"loglik_null", number(fit.loglik_null)},
          {"loglik_fit", number(fit.loglik_fit)},
          {"tests",
           {{"likelihood_ratio", test_json(fit.lr)},
            {"wald", test_json(fit.wald)},
            {"score", test_json(fit.score)}}},
          {"baseline", baseline},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"ties", fit.ties == Ties::kEfron ? "efron" : "breslow"},
          {"diagnostic", fit.diagnostic},
          {"warnings", fit.warnings}};
}

CoxFit fit_from_json(const json& j) {
  try {
    CoxFit fit;
    fit.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    fit.beta = vector_of(j.at("beta"));
    fit.exp_beta = vector_of(j.at("exp_beta"));
    fit.se = vector_of(j.at("se"));
    fit.z = vector_of(j.at("z"));
    fit.p = vector_of(j.at("p"));
    fit.loglik_null = number_of(j.at("loglik_null"));
    fit.loglik_fit = number_of(j.at("loglik_fit"));
    fit.lr = test_of(j.at("tests").at("likelihood_ratio"));
    fit.wald = test_of(j.at("tests").at("wald"));
    fit.score = test_of(j.at("tests").at("score"));
    for (const json& b : j.at("baseline")) {
      fit.baseline.push_back(
          {number_of(b.at("lower")), number_of(b.at("upper")), number_of(b.at("log_hazard"))});
    }
    fit.converged = j.at("converged").get<bool>();
    fit.iterations = j.at("iterations").get<int>();
    fit.ties = j.at("ties").get<std::string>() == "breslow" ? Ties::kBreslow : Ties::kEfron;
    fit.diagnostic = j.at("diagnostic").get<std::string>();
    fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    const auto n = static_cast<Eigen::Index>(fit.covariate_names.size());
    if (fit.beta.size() != n || fit.se.size() != n || fit.z.size() != n || fit.p.size() != n ||
        fit.exp_beta.size() != n) {
      throw InputError("fit json: coefficient vectors do not match covariate count");
    }
    return fit;
  } catch (const json::exception& e) {
    throw InputError(std::string("fit json: ") + e.what());
  }
}

std::string write_hazard_csv(const std::vector<HazardPoint>& curve) {
  std::string out = csv::format_row({"t", "hazard"});
  for (const auto& p : curve) out += csv::format_row({csv::format_double(p.t), csv::format_double(p.hazard)});
  return out;
}

std::vector<HazardPoint> read_hazard_csv(std::string_view text) {
  const csv::Table t = csv::parse_table(text, {"t", "hazard"});
  std::vector<HazardPoint> out;
  for (const auto& r : t.rows) out.push_back({parse_number(r[0], "t"), parse_number(r[1], "hazard")});
  return out;
}

std::string write_screening_csv(const std::vector<ScreeningEntry>& entries) {
  std::string out = csv::format_row({"step", "covariate", "value"});
  for (const auto& e : entries) out += csv::format_row({e.step, e.covariate, csv::format_double(e.value)});
  return out;
}

std::vector<ScreeningEntry> read_screening_csv(std::string_view text) {
  const csv::Table t = csv::parse_table(text, {"step", "covariate", "value"});
  std::vector<ScreeningEntry> out;
  for (const auto& r : t.rows) out.push_back({r[0], r[1], parse_number(r[2], "value")});
  return out;
}

}  // namespace commitgate
