#ifndef HLSGO_STATS_HPP
#define HLSGO_STATS_HPP

#include <span>
#include <string>
#include <vector>

namespace hlsgo::stats {

double mean(std::span<const double> values);
double stddev(std::span<const double> values);  // population form
double median(std::span<const double> values);

// Two-sided Mann-Whitney/Wilcoxon rank-sum p-value via the normal
// approximation with tie correction and continuity correction.
double wilcoxon_ranksum_p(std::span<const double> a, std::span<const double> b);

// Mark for a baseline sample against the reference sample (costs, lower is
// better): "+" reference significantly superior, "-" significantly inferior,
// the tilde-approximation mark otherwise.
std::string significance_mark(std::span<const double> baseline,
                              std::span<const double> reference, double alpha = 0.05);

inline const char* kComparableMark = "≈";

}  // namespace hlsgo::stats

#endif  // HLSGO_STATS_HPP
