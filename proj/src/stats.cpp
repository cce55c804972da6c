#include "commitgate/stats.hpp"

#include "commitgate/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace commitgate {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("mann_whitney_u: empty sample");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double x : a) pooled.emplace_back(x, 0);
  for (double y : b) pooled.emplace_back(y, 1);
  std::sort(pooled.begin(), pooled.end());

  double rank_sum_a = 0;
  double tie_term = 0;  // sum of t^3 - t over tie groups
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    i = j;
  }

  MannWhitneyResult r;
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  r.u_a = rank_sum_a - dna * (dna + 1) / 2;
  r.u_b = dna * dnb - r.u_a;

  const double mean = dna * dnb / 2;
  const double var = dna * dnb / 12 * ((dn + 1) - tie_term / (dn * (dn - 1)));
  if (!(var > 0)) {
    r.z = 0;
    r.p_two_sided = 1;
    return r;
  }
  const double diff = std::max(std::abs(r.u_a - mean) - 0.5, 0.0);
  r.z = diff / std::sqrt(var);
  r.p_two_sided = std::min(1.0, 2 * normal_upper_tail(r.z));
  return r;
}

double cliffs_delta(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("cliffs_delta: empty sample");
  std::vector<double> sorted_b(b.begin(), b.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  long long dominance = 0;
  for (double x : a) {
    const auto lo = std::lower_bound(sorted_b.begin(), sorted_b.end(), x);
    const auto hi = std::upper_bound(lo, sorted_b.end(), x);
    const long long less = lo - sorted_b.begin();      // y < x
    const long long greater = sorted_b.end() - hi;      // y > x
    dominance += less - greater;
  }
  return static_cast<double>(dominance) /
         (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace commitgate
