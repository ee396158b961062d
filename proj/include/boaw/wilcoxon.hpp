#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "boaw/error.hpp"

namespace boaw {

enum class WilcoxonMethod { kAuto, kExact, kNormal };

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;  // pairs with a nonzero difference
  double p_value = 1.0;
  bool exact = true;
};

/// Samples up to this size use the exact null distribution under kAuto.
inline constexpr std::size_t kWilcoxonExactMaxN = 25;

namespace detail {

/// Midranks of |d| (1-based), doubled so that tied ranks stay integral.
inline std::vector<std::int64_t> doubled_midranks(std::span<const double> abs_diffs) {
  const std::size_t n = abs_diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return abs_diffs[a] < abs_diffs[b]; });
  std::vector<std::int64_t> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]]) ++j;
    // positions i..j (0-based) share rank ((i+1)+(j+1))/2; doubled: i+j+2
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = static_cast<std::int64_t>(i + j + 2);
    i = j + 1;
  }
  return ranks;
}

/// P(T <= t) for T = sum of a random subset of `weights`, each included with
/// probability 1/2. Counts subsets by dynamic programming over the sum.
inline double subset_sum_cdf(std::span<const std::int64_t> weights, std::int64_t t) {
  const std::int64_t total = std::accumulate(weights.begin(), weights.end(), std::int64_t{0});
  if (t < 0) return 0.0;
  if (t >= total) return 1.0;
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  std::int64_t reach = 0;
  for (auto w : weights) {
    for (std::int64_t s = reach; s >= 0; --s)
      if (count[s] != 0.0) count[s + w] += count[s];
    reach += w;
  }
  double below = 0.0;
  for (std::int64_t s = 0; s <= t; ++s) below += count[s];
  return below / std::ldexp(1.0, static_cast<int>(weights.size()));
}

}  // namespace detail

/// Two-sided Wilcoxon signed-rank test on paired samples a[i], b[i].
///
/// Zero differences are dropped and ties get midranks. The exact null
/// distribution (which accounts for tied ranks) is used for n <= 25 under
/// kAuto; otherwise a normal approximation with tie-corrected variance and a
/// 0.5 continuity correction.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           WilcoxonMethod method = WilcoxonMethod::kAuto) {
  if (a.size() != b.size()) throw ArgumentError("wilcoxon_signed_rank needs paired samples of equal length");
  std::vector<double> abs_d;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    abs_d.push_back(std::fabs(d));
    positive.push_back(d > 0);
  }
  WilcoxonResult r;
  r.n = abs_d.size();
  if (r.n == 0) return r;  // every difference is zero: p = 1 by convention

  const auto ranks2 = detail::doubled_midranks(abs_d);
  std::int64_t plus2 = 0, minus2 = 0;
  for (std::size_t i = 0; i < r.n; ++i) (positive[i] ? plus2 : minus2) += ranks2[i];
  r.w_plus = static_cast<double>(plus2) / 2.0;
  r.w_minus = static_cast<double>(minus2) / 2.0;
  r.statistic = std::min(r.w_plus, r.w_minus);

  r.exact = method == WilcoxonMethod::kExact || (method == WilcoxonMethod::kAuto && r.n <= kWilcoxonExactMaxN);
  if (r.exact) {
    if (r.n > 60) throw ArgumentError("exact Wilcoxon distribution limited to n <= 60");
    r.p_value = std::min(1.0, 2.0 * detail::subset_sum_cdf(ranks2, std::min(plus2, minus2)));
    return r;
  }

  const double n = static_cast<double>(r.n);
  const double mean = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<std::int64_t> sorted(ranks2);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return r;
  const double z = std::max(0.0, std::fabs(r.statistic - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

}  // namespace boaw
