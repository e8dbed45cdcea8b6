#pragma once

// Central finite differences, independent of every backward implementation under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace vlcest::testing {

inline std::vector<double> central_differences(const std::function<double()>& loss, std::span<double> x,
                                               double step = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = loss();
    x[i] = saved - step;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i| + |b_i|, floor)
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]) + std::abs(b[i]), floor));
  }
  return worst;
}

}  // namespace vlcest::testing
