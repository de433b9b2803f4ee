#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace besovnet::testing {

/// Central difference of f along coordinate i of x.
template <class F>
double central_difference(F&& f, std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero entries from
/// dominating through rounding alone.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace besovnet::testing
