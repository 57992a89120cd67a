#include "hlsgo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hlsgo::stats {

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty sample");
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  const double m = mean(values);
  double total = 0.0;
  for (double v : values) total += (v - m) * (v - m);
  return std::sqrt(total / static_cast<double>(values.size()));
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double wilcoxon_ranksum_p(std::span<const double> a, std::span<const double> b) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("rank-sum: empty sample");

  struct Entry {
    double value;
    int group;
  };
  std::vector<Entry> pooled;
  pooled.reserve(n1 + n2);
  for (double v : a) pooled.push_back({v, 0});
  for (double v : b) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& x, const Entry& y) { return x.value < y.value; });

  // mean ranks over ties, accumulating the tie correction
  const std::size_t n = pooled.size();
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[j + 1].value == pooled[i].value) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) {
      if (pooled[k].group == 0) rank_sum_a += avg_rank;
    }
    i = j + 1;
  }

  const double fn1 = static_cast<double>(n1);
  const double fn2 = static_cast<double>(n2);
  const double fn = static_cast<double>(n);
  const double u = rank_sum_a - fn1 * (fn1 + 1.0) / 2.0;
  const double mu = fn1 * fn2 / 2.0;
  double sigma_sq = fn1 * fn2 / 12.0 * ((fn + 1.0) - tie_term / (fn * (fn - 1.0)));
  if (sigma_sq <= 0.0) return 1.0;  // all values tied
  const double sigma = std::sqrt(sigma_sq);
  double z = u - mu;
  // continuity correction toward zero
  if (z > 0.5) z -= 0.5;
  else if (z < -0.5) z += 0.5;
  else z = 0.0;
  z /= sigma;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

std::string significance_mark(std::span<const double> baseline,
                              std::span<const double> reference, double alpha) {
  const double p = wilcoxon_ranksum_p(baseline, reference);
  if (p >= alpha) return kComparableMark;
  return median(reference) < median(baseline) ? "+" : "-";
}

}  // namespace hlsgo::stats
