#include "commitgate/survival.hpp"

#include "commitgate/chisq.hpp"
#include "commitgate/error.hpp"
#include "commitgate/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace commitgate {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

// Throws when the information matrix is not positive definite, naming the
// covariates that load on the degenerate directions.
void check_information(const MatrixXd& info, const std::vector<std::string>& names) {
  if (info.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info);
  const VectorXd& values = eig.eigenvalues();
  const double scale = std::max(std::abs(values.maxCoeff()), 1e-300);
  std::vector<std::string> involved;
  for (Index k = 0; k < values.size(); ++k) {
    if (values(k) > 1e-10 * scale && values(k) > 1e-14) continue;
    const VectorXd v = eig.eigenvectors().col(k);
    for (Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) > 0.1 &&
          std::find(involved.begin(), involved.end(), names[j]) == involved.end()) {
        involved.push_back(names[j]);
      }
    }
  }
  if (!involved.empty()) {
    throw DataError("singular information matrix; no usable contrast in: " + join(involved));
  }
}

double quantile_type7(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double epanechnikov(double u) { return std::abs(u) <= 1 ? 0.75 * (1 - u * u) : 0.0; }

}  // namespace

// ---- data --------------------------------------------------------------------

void SurvivalData::validate() const {
  const Index n = x.rows();
  if (start.size() != n || stop.size() != n || event.size() != n) {
    throw InputError("survival data: inconsistent row counts");
  }
  if (static_cast<Index>(names.size()) != x.cols()) {
    throw InputError("survival data: covariate names do not match columns");
  }
  for (Index i = 0; i < n; ++i) {
    if (!(start(i) < stop(i))) {
      throw InputError(fmt::format("survival data: row {} has start >= stop", i));
    }
    if (event(i) != 0 && event(i) != 1) {
      throw InputError(fmt::format("survival data: row {} has event not in {{0,1}}", i));
    }
  }
  if (!x.allFinite()) throw InputError("survival data: non-finite covariate value");
}

SurvivalData SurvivalData::select_rows(const std::vector<Index>& keep) const {
  SurvivalData out;
  out.names = names;
  out.x.resize(static_cast<Index>(keep.size()), x.cols());
  out.start.resize(static_cast<Index>(keep.size()));
  out.stop.resize(static_cast<Index>(keep.size()));
  out.event.resize(static_cast<Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const Index i = keep[r];
    out.x.row(static_cast<Index>(r)) = x.row(i);
    out.start(static_cast<Index>(r)) = start(i);
    out.stop(static_cast<Index>(r)) = stop(i);
    out.event(static_cast<Index>(r)) = event(i);
  }
  return out;
}

SurvivalData SurvivalData::select_columns(const std::vector<Index>& keep) const {
  SurvivalData out;
  out.x.resize(x.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.x.col(static_cast<Index>(c)) = x.col(keep[c]);
    out.names.push_back(names[static_cast<std::size_t>(keep[c])]);
  }
  out.start = start;
  out.stop = stop;
  out.event = event;
  return out;
}

std::vector<int> complete_columns(const std::vector<PanelRow>& rows) {
  std::vector<int> out;
  for (int c = 0; c < kNumCovariates; ++c) {
    const bool complete = std::all_of(rows.begin(), rows.end(),
                                      [&](const PanelRow& r) { return r.x[c].has_value(); });
    if (complete) out.push_back(c);
  }
  return out;
}

SurvivalData design_from_panel(const std::vector<PanelRow>& rows,
                               const std::vector<int>& columns) {
  SurvivalData d;
  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(columns.size());
  d.x.resize(n, p);
  d.start.resize(n);
  d.stop.resize(n);
  d.event.resize(n);
  for (int c : columns) d.names.emplace_back(kCovariateNames[static_cast<std::size_t>(c)]);
  for (Index i = 0; i < n; ++i) {
    const PanelRow& r = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < p; ++j) {
      const auto& v = r.x[static_cast<std::size_t>(columns[static_cast<std::size_t>(j)])];
      if (!v) {
        throw InputError(fmt::format("panel row {} ({}, month {}) lacks {}", i, r.dev, r.month,
                                     d.names[static_cast<std::size_t>(j)]));
      }
      d.x(i, j) = *v;
    }
    d.start(i) = r.start;
    d.stop(i) = r.stop;
    d.event(i) = r.event;
  }
  return d;
}

// ---- preprocessing -----------------------------------------------------------

SurvivalData zscore_filter(const SurvivalData& data, double threshold, ZScoreReport* report,
                           const std::vector<bool>& screened) {
  if (!(threshold > 0)) throw InputError("zscore_filter: threshold must be positive");
  const Index n = data.rows();
  if (n == 0) throw InputError("zscore_filter: empty panel");
  std::vector<bool> drop(static_cast<std::size_t>(n), false);
  ZScoreReport local;
  for (Index j = 0; j < data.cols(); ++j) {
    if (!screened.empty() && !screened[static_cast<std::size_t>(j)]) continue;
    const auto col = data.x.col(j);
    const double mean = col.mean();
    if (n < 2) continue;
    const double sd =
        std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
    if (!(sd > 0)) continue;
    std::size_t flagged = 0;
    for (Index i = 0; i < n; ++i) {
      if (std::abs(col(i) - mean) / sd > threshold) {
        drop[static_cast<std::size_t>(i)] = true;
        ++flagged;
      }
    }
    if (flagged) local.flagged_by_covariate[data.names[static_cast<std::size_t>(j)]] = flagged;
  }
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i) {
    if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  local.removed = static_cast<std::size_t>(n) - keep.size();
  if (report) *report = local;
  return data.select_rows(keep);
}

std::vector<std::string> near_zero_variance(const SurvivalData& data, int min_nonzero) {
  std::vector<std::string> out;
  const Index n = data.rows();
  for (Index j = 0; j < data.cols(); ++j) {
    const auto col = data.x.col(j);
    const double mean = n ? col.mean() : 0.0;
    const double var =
        n > 1 ? (col.array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
    const auto nonzero = (col.array() != 0.0).count();
    if (var < 1e-10 || nonzero < min_nonzero) out.push_back(data.names[static_cast<std::size_t>(j)]);
  }
  return out;
}

VectorXd variance_inflation(const MatrixXd& x) {
  const Index n = x.rows(), p = x.cols();
  VectorXd vif(p);
  for (Index j = 0; j < p; ++j) {
    const VectorXd y = x.col(j);
    MatrixXd a(n, p);
    a.col(0).setOnes();
    for (Index k = 0, c = 1; k < p; ++k) {
      if (k != j) a.col(c++) = x.col(k);
    }
    const VectorXd coef = a.colPivHouseholderQr().solve(y);
    const double rss = (y - a * coef).squaredNorm();
    const double tss = (y.array() - y.mean()).square().sum();
    if (!(tss > 0)) {
      vif(j) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double one_minus_r2 = rss / tss;
    vif(j) = one_minus_r2 < 1e-12 ? kInf : 1.0 / one_minus_r2;
  }
  return vif;
}

VifResult vif_screen(const SurvivalData& data, double threshold) {
  if (!(threshold > 1)) throw InputError("vif_screen: threshold must exceed 1");
  if (data.cols() < 2) throw InputError("vif_screen: need at least two covariates");
  std::vector<Index> cols(static_cast<std::size_t>(data.cols()));
  std::iota(cols.begin(), cols.end(), Index{0});
  VifResult result;
  bool first = true;
  for (;;) {
    MatrixXd x(data.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) x.col(static_cast<Index>(c)) = data.x.col(cols[c]);
    const VectorXd vif = cols.size() > 1 ? variance_inflation(x) : VectorXd::Ones(1);

    std::vector<std::string> constant;
    for (Index c = 0; c < vif.size(); ++c) {
      if (std::isnan(vif(c))) constant.push_back(data.names[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])]);
    }
    if (!constant.empty()) {
      throw DataError("vif_screen: singular design, constant covariates: " + join(constant));
    }
    if (first) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        result.initial_vif[data.names[static_cast<std::size_t>(cols[c])]] = vif(static_cast<Index>(c));
      }
      first = false;
    }
    const double worst = vif.maxCoeff();
    if (worst <= threshold || cols.size() == 1) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::string& name = data.names[static_cast<std::size_t>(cols[c])];
        result.kept.push_back(name);
        result.vif[name] = vif(static_cast<Index>(c));
      }
      return result;
    }
    Index victim = 0;
    for (Index c = 0; c < vif.size(); ++c) {
      const bool tie = std::isinf(worst) ? std::isinf(vif(c))
                                         : vif(c) >= worst * (1 - 1e-9);
      if (tie) victim = c;  // last of the tied set
    }
    result.dropped.push_back(
        {data.names[static_cast<std::size_t>(cols[static_cast<std::size_t>(victim)])], vif(victim)});
    cols.erase(cols.begin() + victim);
  }
}

// ---- Cox partial likelihood --------------------------------------------------

CoxDerivatives cox_derivatives(const SurvivalData& data, const VectorXd& beta, Ties ties) {
  const Index n = data.rows(), p = data.cols();
  if (beta.size() != p) throw InputError("cox: beta has wrong dimension");
  if (data.events() == 0) throw DataError("cox: no events");

  const VectorXd center = n ? VectorXd(data.x.colwise().mean().transpose()) : VectorXd::Zero(p);
  const MatrixXd xc = data.x.rowwise() - center.transpose();
  const VectorXd eta = xc * beta;
  const double eta_max = eta.maxCoeff();
  const VectorXd w = (eta.array() - eta_max).exp();

  std::vector<Index> by_stop(static_cast<std::size_t>(n)), by_start(static_cast<std::size_t>(n));
  std::iota(by_stop.begin(), by_stop.end(), Index{0});
  std::iota(by_start.begin(), by_start.end(), Index{0});
  std::sort(by_stop.begin(), by_stop.end(),
            [&](Index a, Index b) { return data.stop(a) > data.stop(b); });
  std::sort(by_start.begin(), by_start.end(),
            [&](Index a, Index b) { return data.start(a) > data.start(b); });
  std::vector<Index> event_rows;
  for (Index i : by_stop) {
    if (data.event(i)) event_rows.push_back(i);
  }

  CoxDerivatives out;
  out.score = VectorXd::Zero(p);
  out.information = MatrixXd::Zero(p, p);

  double s0 = 0, added = 0;
  VectorXd s1 = VectorXd::Zero(p);
  MatrixXd s2 = MatrixXd::Zero(p, p);
  std::vector<char> at_risk(static_cast<std::size_t>(n), 0);
  std::size_t next_add = 0, next_remove = 0, next_event = 0;

  while (next_event < event_rows.size()) {
    const double t = data.stop(event_rows[next_event]);
    while (next_add < by_stop.size() && data.stop(by_stop[next_add]) >= t) {
      const Index i = by_stop[next_add++];
      at_risk[static_cast<std::size_t>(i)] = 1;
      s0 += w(i);
      added += w(i);
      s1.noalias() += w(i) * xc.row(i).transpose();
      s2.noalias() += w(i) * xc.row(i).transpose() * xc.row(i);
    }
    while (next_remove < by_start.size() && data.start(by_start[next_remove]) >= t) {
      const Index i = by_start[next_remove++];
      if (!at_risk[static_cast<std::size_t>(i)]) continue;
      at_risk[static_cast<std::size_t>(i)] = 0;
      s0 -= w(i);
      s1.noalias() -= w(i) * xc.row(i).transpose();
      s2.noalias() -= w(i) * xc.row(i).transpose() * xc.row(i);
    }
    if (s0 < 1e-8 * added) {
      // Too much cancellation; rebuild the sums from the current risk set.
      s0 = 0;
      s1.setZero();
      s2.setZero();
      for (Index i = 0; i < n; ++i) {
        if (!at_risk[static_cast<std::size_t>(i)]) continue;
        s0 += w(i);
        s1.noalias() += w(i) * xc.row(i).transpose();
        s2.noalias() += w(i) * xc.row(i).transpose() * xc.row(i);
      }
      added = s0;
    }

    double e0 = 0;
    VectorXd e1 = VectorXd::Zero(p);
    MatrixXd e2 = MatrixXd::Zero(p, p);
    int d = 0;
    while (next_event < event_rows.size() && data.stop(event_rows[next_event]) == t) {
      const Index i = event_rows[next_event++];
      ++d;
      out.loglik += eta(i);
      out.score.noalias() += xc.row(i).transpose();
      e0 += w(i);
      e1.noalias() += w(i) * xc.row(i).transpose();
      e2.noalias() += w(i) * xc.row(i).transpose() * xc.row(i);
    }
    for (int r = 0; r < d; ++r) {
      const double f = ties == Ties::kEfron ? static_cast<double>(r) / d : 0.0;
      const double den = s0 - f * e0;
      const VectorXd a = (s1 - f * e1) / den;
      out.loglik -= std::log(den) + eta_max;
      out.score -= a;
      out.information.noalias() += (s2 - f * e2) / den - a * a.transpose();
    }
  }
  out.information = 0.5 * (out.information + out.information.transpose()).eval();
  return out;
}

double log_partial_likelihood(const SurvivalData& data, const VectorXd& beta, Ties ties) {
  return cox_derivatives(data, beta, ties).loglik;
}

std::vector<double> default_cuts(const SurvivalData& data) {
  if (data.rows() == 0) throw InputError("default_cuts: empty data");
  const double lo = data.start.minCoeff();
  const double hi = data.stop.maxCoeff();
  std::vector<double> times;
  for (Index i = 0; i < data.rows(); ++i) {
    if (data.event(i)) times.push_back(data.stop(i));
  }
  std::vector<double> cuts = {lo};
  if (!times.empty()) {
    std::sort(times.begin(), times.end());
    for (int q = 1; q <= 9; ++q) {
      const double c = quantile_type7(times, q / 10.0);
      if (c > cuts.back() && c < hi) cuts.push_back(c);
    }
  }
  cuts.push_back(hi);
  return cuts;
}

namespace {

void validate_cuts(const SurvivalData& data, const std::vector<double>& cuts) {
  if (cuts.size() < 2) throw InputError("cuts: need at least two boundaries");
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    if (!(cuts[k] > cuts[k - 1])) throw InputError("cuts: must be strictly increasing");
  }
  if (data.rows() && (data.start.minCoeff() < cuts.front() || data.stop.maxCoeff() > cuts.back())) {
    throw InputError(fmt::format("cuts: [{}, {}] do not cover the observed range [{}, {}]",
                                 cuts.front(), cuts.back(), data.start.minCoeff(),
                                 data.stop.maxCoeff()));
  }
}

// Breslow increments at beta-hat summed over each interval and divided by
// its width.
std::vector<BaselineInterval> cox_baseline(const SurvivalData& data, const VectorXd& beta,
                                           const std::vector<double>& cuts) {
  const VectorXd eta = data.x * beta;
  std::vector<double> times;
  for (Index i = 0; i < data.rows(); ++i) {
    if (data.event(i)) times.push_back(data.stop(i));
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<double> mass(cuts.size() - 1, 0.0);
  for (double t : times) {
    double max_eta = -kInf;
    int d = 0;
    for (Index i = 0; i < data.rows(); ++i) {
      if (data.start(i) < t && t <= data.stop(i)) max_eta = std::max(max_eta, eta(i));
      if (data.event(i) && data.stop(i) == t) ++d;
    }
    double s = 0;
    for (Index i = 0; i < data.rows(); ++i) {
      if (data.start(i) < t && t <= data.stop(i)) s += std::exp(eta(i) - max_eta);
    }
    const double increment = d / s * std::exp(-max_eta);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (t > cuts[k] && t <= cuts[k + 1]) {
        mass[k] += increment;
        break;
      }
    }
  }
  std::vector<BaselineInterval> out;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    out.push_back({cuts[k], cuts[k + 1], std::log(mass[k] / (cuts[k + 1] - cuts[k]))});
  }
  return out;
}

}  // namespace

CoxFit fit_cox_tvc(const SurvivalData& data, const CoxOptions& options) {
  data.validate();
  const Index p = data.cols();
  if (p == 0) throw InputError("fit_cox_tvc: no covariates");
  if (data.events() == 0) throw DataError("fit_cox_tvc: no events");

  CoxFit fit;
  fit.covariate_names = data.names;
  fit.ties = options.ties;

  VectorXd beta = VectorXd::Zero(p);
  CoxDerivatives cur = cox_derivatives(data, beta, options.ties);
  if (!std::isfinite(cur.loglik)) throw DataError("fit_cox_tvc: non-finite log-likelihood at beta = 0");
  check_information(cur.information, data.names);
  fit.loglik_null = cur.loglik;
  {
    const VectorXd u0 = cur.score;
    const double s = u0.dot(cur.information.ldlt().solve(u0));
    fit.score = {s, static_cast<int>(p), chisq_upper_tail(s, static_cast<double>(p))};
  }

  const double events_per_covariate = static_cast<double>(data.events()) / static_cast<double>(p);
  if (events_per_covariate < 10) {
    fit.warnings.push_back(fmt::format(
        "only {:.1f} events per covariate (< 10); estimates may be unstable", events_per_covariate));
  }

  bool converged = false;
  int iter = 0;
  while (iter < options.max_iter) {
    ++iter;
    const auto ldlt = cur.information.ldlt();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      check_information(cur.information, data.names);
      throw DataError("fit_cox_tvc: information matrix not positive definite");
    }
    const VectorXd step = ldlt.solve(cur.score);
    double scale = 1;
    CoxDerivatives next;
    VectorXd candidate;
    for (int halvings = 0;; ++halvings) {
      candidate = beta + scale * step;
      next = cox_derivatives(data, candidate, options.ties);
      if (std::isfinite(next.loglik) &&
          next.loglik >= cur.loglik - 1e-12 * (1 + std::abs(cur.loglik))) {
        break;
      }
      if (halvings >= 40) {
        fit.diagnostic = "step halving failed to improve the log-likelihood";
        candidate = beta;
        next = cur;
        break;
      }
      scale /= 2;
    }
    const double change = std::abs(next.loglik - cur.loglik);
    beta = candidate;
    cur = next;
    if (beta.cwiseAbs().maxCoeff() > options.separation_bound) {
      std::vector<std::string> offenders;
      for (Index j = 0; j < p; ++j) {
        if (std::abs(beta(j)) > options.separation_bound) offenders.push_back(data.names[static_cast<std::size_t>(j)]);
      }
      fit.diagnostic = fmt::format("monotone likelihood / separation suspected: |coef| > {} for {}",
                                   options.separation_bound, join(offenders));
      break;
    }
    if (change < options.tol) {
      converged = true;
      break;
    }
    if (!fit.diagnostic.empty()) break;
  }
  if (!converged && fit.diagnostic.empty()) {
    fit.diagnostic = fmt::format("no convergence within {} iterations", options.max_iter);
  }

  fit.converged = converged;
  fit.iterations = iter;
  fit.beta = beta;
  fit.exp_beta = beta.array().exp();
  fit.loglik_fit = cur.loglik;
  fit.information = cur.information;

  const auto ldlt = cur.information.ldlt();
  const bool invertible = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (converged) check_information(cur.information, data.names);
  const MatrixXd cov = invertible ? MatrixXd(ldlt.solve(MatrixXd::Identity(p, p)))
                                  : MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.z = VectorXd(p);
  fit.p = VectorXd(p);
  for (Index j = 0; j < p; ++j) {
    fit.z(j) = fit.se(j) > 0 ? beta(j) / fit.se(j) : std::numeric_limits<double>::quiet_NaN();
    fit.p(j) = std::isfinite(fit.z(j)) ? 2 * normal_upper_tail(std::abs(fit.z(j)))
                                       : std::numeric_limits<double>::quiet_NaN();
  }
  const double lr = 2 * (fit.loglik_fit - fit.loglik_null);
  fit.lr = {lr, static_cast<int>(p), chisq_upper_tail(lr, static_cast<double>(p))};
  const double wald = beta.dot(cur.information * beta);
  fit.wald = {wald, static_cast<int>(p), chisq_upper_tail(wald, static_cast<double>(p))};

  std::vector<double> cuts = options.baseline_cuts.empty() ? default_cuts(data) : options.baseline_cuts;
  validate_cuts(data, cuts);
  fit.baseline = cox_baseline(data, beta, cuts);
  return fit;
}

ModelTests model_tests(const CoxFit& fit) {
  if (!fit.converged) {
    throw NonConvergenceError("model tests need a converged fit: " + fit.diagnostic);
  }
  return {fit.lr, fit.wald, fit.score};
}

// ---- piecewise exponential ---------------------------------------------------

namespace {

struct Episodes {
  std::vector<Index> row;
  std::vector<int> interval;
  std::vector<double> exposure;
  std::vector<int> event;
};

Episodes split_episodes(const SurvivalData& data, const std::vector<double>& cuts) {
  Episodes ep;
  for (Index i = 0; i < data.rows(); ++i) {
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double lo = std::max(data.start(i), cuts[k]);
      const double hi = std::min(data.stop(i), cuts[k + 1]);
      if (hi <= lo) continue;
      ep.row.push_back(i);
      ep.interval.push_back(static_cast<int>(k));
      ep.exposure.push_back(hi - lo);
      const bool ends_here = data.stop(i) > cuts[k] && data.stop(i) <= cuts[k + 1];
      ep.event.push_back(data.event(i) && ends_here ? 1 : 0);
    }
  }
  return ep;
}

}  // namespace

double pwe_log_likelihood(const SurvivalData& data, const std::vector<double>& cuts,
                          const VectorXd& log_hazard, const VectorXd& beta) {
  validate_cuts(data, cuts);
  const Episodes ep = split_episodes(data, cuts);
  const VectorXd eta = data.x * beta;
  double ll = 0;
  for (std::size_t m = 0; m < ep.row.size(); ++m) {
    const double a = log_hazard(ep.interval[m]);
    if (std::isinf(a) && a < 0) {
      if (ep.event[m]) return -kInf;
      continue;
    }
    const double lin = a + eta(ep.row[m]);
    ll += ep.event[m] * lin - ep.exposure[m] * std::exp(lin);
  }
  return ll;
}

PweFit fit_piecewise_exponential(const SurvivalData& data, const std::vector<double>& cuts,
                                 const PweOptions& options) {
  data.validate();
  validate_cuts(data, cuts);
  const Index p = data.cols();
  const int K = static_cast<int>(cuts.size()) - 1;
  const Episodes ep = split_episodes(data, cuts);

  PweFit fit;
  fit.covariate_names = data.names;
  fit.cuts = cuts;
  fit.events = VectorXd::Zero(K);
  fit.exposure = VectorXd::Zero(K);
  for (std::size_t m = 0; m < ep.row.size(); ++m) {
    fit.events(ep.interval[m]) += ep.event[m];
    fit.exposure(ep.interval[m]) += ep.exposure[m];
  }
  for (int k = 0; k < K; ++k) {
    if (!(fit.exposure(k) > 0)) {
      throw DataError(fmt::format("piecewise exponential: interval ({}, {}] has zero exposure",
                                  cuts[static_cast<std::size_t>(k)], cuts[static_cast<std::size_t>(k) + 1]));
    }
  }

  // Intervals without events have a = -inf; they drop out of the problem.
  std::vector<int> active_index(static_cast<std::size_t>(K), -1);
  int n_active = 0;
  for (int k = 0; k < K; ++k) {
    if (fit.events(k) > 0) active_index[static_cast<std::size_t>(k)] = n_active++;
  }
  const Index dim = n_active + p;

  const VectorXd center = data.rows() ? VectorXd(data.x.colwise().mean().transpose()) : VectorXd::Zero(p);
  const MatrixXd xc = data.x.rowwise() - center.transpose();

  VectorXd theta(dim);
  for (int k = 0; k < K; ++k) {
    const int a = active_index[static_cast<std::size_t>(k)];
    if (a >= 0) theta(a) = std::log(fit.events(k) / fit.exposure(k));
  }
  theta.tail(p).setZero();

  const auto evaluate = [&](const VectorXd& th, VectorXd* grad, MatrixXd* info) {
    double ll = 0;
    if (grad) grad->setZero(dim);
    if (info) info->setZero(dim, dim);
    VectorXd z(dim);
    for (std::size_t m = 0; m < ep.row.size(); ++m) {
      const int a = active_index[static_cast<std::size_t>(ep.interval[m])];
      if (a < 0) continue;
      const auto xrow = xc.row(ep.row[m]).transpose();
      const double lin = th(a) + (p ? xrow.dot(th.tail(p)) : 0.0);
      const double mu = ep.exposure[m] * std::exp(lin);
      ll += ep.event[m] * lin - mu;
      if (!grad) continue;
      z.setZero();
      z(a) = 1;
      if (p) z.tail(p) = xrow;
      grad->noalias() += (ep.event[m] - mu) * z;
      info->noalias() += mu * z * z.transpose();
    }
    return ll;
  };

  VectorXd grad;
  MatrixXd info;
  double ll = evaluate(theta, &grad, &info);
  bool converged = false;
  int iter = 0;
  while (iter < options.max_iter) {
    ++iter;
    const auto ldlt = info.ldlt();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      std::vector<std::string> names;
      for (int k = 0; k < n_active; ++k) names.push_back(fmt::format("interval {}", k + 1));
      for (const auto& nm : data.names) names.push_back(nm);
      check_information(info, names);
      throw DataError("piecewise exponential: information matrix not positive definite");
    }
    const VectorXd step = ldlt.solve(grad);
    double scale = 1;
    VectorXd candidate;
    double next_ll = ll;
    for (int halvings = 0; halvings <= 40; ++halvings) {
      candidate = theta + scale * step;
      next_ll = evaluate(candidate, nullptr, nullptr);
      if (std::isfinite(next_ll) && next_ll >= ll - 1e-12 * (1 + std::abs(ll))) break;
      scale /= 2;
    }
    const double change = std::abs(next_ll - ll);
    theta = candidate;
    ll = evaluate(theta, &grad, &info);
    if (p && theta.tail(p).cwiseAbs().maxCoeff() > options.separation_bound) {
      fit.diagnostic = fmt::format("separation suspected: |coef| > {}", options.separation_bound);
      break;
    }
    if (change < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged && fit.diagnostic.empty()) {
    fit.diagnostic = fmt::format("no convergence within {} iterations", options.max_iter);
  }

  // Covariance of the centered parameters, then map a_k back to x = 0.
  const auto ldlt = info.ldlt();
  MatrixXd cov = ldlt.info() == Eigen::Success && ldlt.isPositive()
                     ? MatrixXd(ldlt.solve(MatrixXd::Identity(dim, dim)))
                     : MatrixXd::Constant(dim, dim, std::numeric_limits<double>::quiet_NaN());
  MatrixXd transform = MatrixXd::Identity(dim, dim);
  for (int a = 0; a < n_active; ++a) transform.block(a, n_active, 1, p) = -center.transpose();
  const VectorXd theta_x0 = transform * theta;
  const MatrixXd cov_x0 = transform * cov * transform.transpose();

  fit.beta = theta.tail(p);
  fit.se_beta = cov_x0.diagonal().tail(p).cwiseMax(0.0).cwiseSqrt();
  fit.log_hazard = VectorXd::Constant(K, -kInf);
  fit.se_log_hazard = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < K; ++k) {
    const int a = active_index[static_cast<std::size_t>(k)];
    if (a < 0) continue;
    fit.log_hazard(k) = theta_x0(a);
    fit.se_log_hazard(k) = std::sqrt(std::max(cov_x0(a, a), 0.0));
  }
  fit.loglik = ll;
  fit.converged = converged;
  fit.iterations = iter;
  return fit;
}

// ---- hazard curve ------------------------------------------------------------

std::vector<NelsonAalenStep> nelson_aalen(const SurvivalData& data) {
  const Index n = data.rows();
  std::vector<double> starts(data.start.data(), data.start.data() + n);
  std::vector<double> stops(data.stop.data(), data.stop.data() + n);
  std::sort(starts.begin(), starts.end());
  std::sort(stops.begin(), stops.end());
  std::map<double, int> events;
  for (Index i = 0; i < n; ++i) {
    if (data.event(i)) ++events[data.stop(i)];
  }
  std::vector<NelsonAalenStep> out;
  for (const auto& [t, d] : events) {
    // start < t <= stop  <=>  #{stop >= t} - #{start >= t}
    const auto stop_ge = stops.end() - std::lower_bound(stops.begin(), stops.end(), t);
    const auto start_ge = starts.end() - std::lower_bound(starts.begin(), starts.end(), t);
    const int at_risk = static_cast<int>(stop_ge - start_ge);
    out.push_back({t, d, at_risk, static_cast<double>(d) / at_risk});
  }
  return out;
}

double default_bandwidth(const std::vector<NelsonAalenStep>& steps) {
  if (steps.size() < 2) return 1.0;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < steps.size(); ++i) gaps.push_back(steps[i].time - steps[i - 1].time);
  std::sort(gaps.begin(), gaps.end());
  const std::size_t m = gaps.size();
  const double median = m % 2 ? gaps[m / 2] : 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]);
  return 1.5 * median;
}

std::vector<HazardPoint> smoothed_hazard(const SurvivalData& data,
                                         std::optional<double> bandwidth, double grid_step) {
  const auto steps = nelson_aalen(data);
  if (steps.empty()) return {};
  if (!(grid_step > 0)) throw InputError("smoothed_hazard: grid step must be positive");
  const double b = bandwidth.value_or(default_bandwidth(steps));
  if (!(b > 0)) throw InputError("smoothed_hazard: bandwidth must be positive");
  const double end = data.stop.maxCoeff();
  std::vector<HazardPoint> curve;
  const auto n_points = static_cast<long>(std::floor(end / grid_step + 1e-9)) + 1;
  for (long g = 0; g < n_points; ++g) {
    const double t = static_cast<double>(g) * grid_step;
    double h = 0;
    for (const auto& s : steps) {
      h += s.increment * (epanechnikov((t - s.time) / b) + epanechnikov((t + s.time) / b)) / b;
    }
    curve.push_back({t, h});
  }
  return curve;
}

}  // namespace commitgate
