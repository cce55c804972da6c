#pragma once

#include <span>

namespace commitgate {

struct MannWhitneyResult {
  double u_a = 0;  // pairs (x in a, y in b) with x > y, ties counted 1/2
  double u_b = 0;
  double p_two_sided = 1;
  double z = 0;
};

// U from midranks; p from the normal approximation with tie-corrected
// variance and continuity correction. Throws InputError on an empty sample.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// (#{x > y} - #{x < y}) / (|a| |b|) over all pairs. O((n + m) log(n + m)).
double cliffs_delta(std::span<const double> a, std::span<const double> b);

double normal_upper_tail(double z);

}  // namespace commitgate
