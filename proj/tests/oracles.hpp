// Test-only reference implementations. Each one takes the slow, direct
// route so that it shares no code path with the library.
#pragma once

#include "commitgate/survival.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <set>
#include <vector>

namespace oracle {

using commitgate::SurvivalData;
using commitgate::Ties;

struct Dominance {
  double greater = 0;
  double ties = 0;
  double less = 0;
};

inline Dominance dominance(const std::vector<double>& a, const std::vector<double>& b) {
  Dominance d;
  for (double x : a) {
    for (double y : b) {
      if (x > y) ++d.greater;
      else if (x < y) ++d.less;
      else ++d.ties;
    }
  }
  return d;
}

// U statistic of sample a: pairs where a wins plus half the ties.
inline double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  const Dominance d = dominance(a, b);
  return d.greater + 0.5 * d.ties;
}

inline double cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
  const Dominance d = dominance(a, b);
  return (d.greater - d.less) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// VIF from the diagonal of the inverse correlation matrix.
inline Eigen::VectorXd vif(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  const Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  return corr.inverse().diagonal();
}

// R^2 of column j on the others via normal equations.
inline double r_squared(const Eigen::MatrixXd& x, Eigen::Index j) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::MatrixXd a(n, p);
  a.col(0).setOnes();
  for (Eigen::Index k = 0, c = 1; k < p; ++k) {
    if (k != j) a.col(c++) = x.col(k);
  }
  const Eigen::VectorXd y = x.col(j);
  const Eigen::VectorXd coef = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  const double rss = (y - a * coef).squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  return 1 - rss / tss;
}

inline bool at_risk(const SurvivalData& d, Eigen::Index i, double t) {
  return d.start(i) < t && t <= d.stop(i);
}

// Log partial likelihood written out term by term on the raw scale.
inline double log_pl(const SurvivalData& d, const Eigen::VectorXd& beta, Ties ties) {
  std::set<double> times;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d.event(i)) times.insert(d.stop(i));
  }
  double ll = 0;
  for (double t : times) {
    double risk = 0, tied = 0;
    int m = 0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      const double r = std::exp(d.x.row(i).dot(beta));
      if (at_risk(d, i, t)) risk += r;
      if (d.event(i) && d.stop(i) == t) {
        ll += d.x.row(i).dot(beta);
        tied += r;
        ++m;
      }
    }
    for (int k = 0; k < m; ++k) {
      const double f = ties == Ties::kEfron ? static_cast<double>(k) / m : 0.0;
      ll -= std::log(risk - f * tied);
    }
  }
  return ll;
}

inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& at, double h = 1e-5) {
  Eigen::VectorXd g(at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    Eigen::VectorXd up = at, down = at;
    up(j) += h;
    down(j) -= h;
    g(j) = (f(up) - f(down)) / (2 * h);
  }
  return g;
}

// Maximizer of a concave 1-d function on [lo, hi] by golden-section search.
inline double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  while (b - a > tol) {
    if (f(c) > f(d)) b = d;
    else a = c;
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return (a + b) / 2;
}

// Brute-force grid search, refined once around the best cell.
inline double grid_max(const std::function<double(double)>& f, double lo, double hi, int steps) {
  double best = lo, best_value = f(lo);
  for (int round = 0; round < 3; ++round) {
    const double step = (hi - lo) / steps;
    for (int k = 0; k <= steps; ++k) {
      const double b = lo + k * step;
      const double v = f(b);
      if (v > best_value) {
        best_value = v;
        best = b;
      }
    }
    lo = best - step;
    hi = best + step;
  }
  return best;
}

// Events and at-risk count at each distinct event time, by direct counting.
struct RiskCount {
  double time;
  int events;
  int at_risk;
};

inline std::vector<RiskCount> risk_counts(const SurvivalData& d) {
  std::set<double> times;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d.event(i)) times.insert(d.stop(i));
  }
  std::vector<RiskCount> out;
  for (double t : times) {
    RiskCount rc{t, 0, 0};
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (at_risk(d, i, t)) ++rc.at_risk;
      if (d.event(i) && d.stop(i) == t) ++rc.events;
    }
    out.push_back(rc);
  }
  return out;
}

}  // namespace oracle
