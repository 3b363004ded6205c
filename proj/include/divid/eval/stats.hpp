#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "divid/core/error.hpp"

namespace divid::eval {

struct RankTest {
  double u = 0.0;  // Mann-Whitney U of the first sample
  double z = 0.0;
  double p_less = 1.0;  // one-sided p-value for "first sample tends to be smaller"
};

// Mann-Whitney U test with midranks for ties and the tie-corrected normal approximation.
inline RankTest mann_whitney_less(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw UsageError("rank test needs two non-empty samples");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());
  double rank_sum_a = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) rank_sum_a += mid;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  RankTest r;
  r.u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
  const double n = n1 + n2;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return r;
  r.z = (r.u - n1 * n2 / 2.0) / std::sqrt(var);
  r.p_less = 0.5 * std::erfc(-r.z / std::sqrt(2.0));
  return r;
}

}  // namespace divid::eval
