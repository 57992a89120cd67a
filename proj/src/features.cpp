#include "hlsgo/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hlsgo::features {

double dimension_feature(int dims) {
  return std::pow(static_cast<double>(dims) / 500.0, 0.4);
}

std::array<double, 3> problem_features(int k, const DecompositionResult& decomposition,
                                       int full_dim) {
  const auto& groups = decomposition.groups;
  const int dk = static_cast<int>(groups[static_cast<std::size_t>(k)].size());

  // Indices appearing in more than one group are the shared variables.
  std::vector<int> multiplicity(static_cast<std::size_t>(full_dim), 0);
  for (const auto& group : groups) {
    for (int idx : group) ++multiplicity[static_cast<std::size_t>(idx)];
  }
  int shared = 0;
  for (int m : multiplicity) {
    if (m > 1) ++shared;
  }

  return {dimension_feature(dk),
          decomposition.dsm.is_identity() ? 1.0 : 0.0,
          static_cast<double>(shared) / static_cast<double>(full_dim)};
}

std::array<double, 5> population_features(const VectorXd& costs,
                                          const MatrixXd& positions,
                                          const MatrixXd& probe_costs,
                                          double epsilon, bool* degenerate) {
  const int n = static_cast<int>(costs.size());
  if (degenerate) *degenerate = false;
  if (n < 2) {
    if (degenerate) *degenerate = true;
    return {0.0, 0.0, 0.0, 0.0, 0.0};
  }

  auto mean_pairwise = [&](const std::vector<int>& idx) {
    const int m = static_cast<int>(idx.size());
    double sum = 0.0;
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        sum += (positions.row(idx[static_cast<std::size_t>(a)]) -
                positions.row(idx[static_cast<std::size_t>(b)]))
                   .norm();
      }
    }
    return 2.0 * sum / (static_cast<double>(m) * (m - 1));
  };

  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  const double d = mean_pairwise(all);

  // top 10% by cost, rounded up, at least two members
  std::vector<int> order = all;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return costs[a] < costs[b]; });
  const int n_top = std::max(2, static_cast<int>(std::ceil(0.1 * n)));
  std::vector<int> top(order.begin(), order.begin() + n_top);
  const double d_top = mean_pairwise(top);

  const int s = static_cast<int>(probe_costs.rows());
  double anr = 1.0, ni = 1.0, nw = 1.0;
  if (s > 0) {
    int neutral = 0;
    int never_improved = 0;
    int not_always_worse = 0;
    for (int i = 0; i < n; ++i) {
      int improved = 0, worse = 0;
      for (int row = 0; row < s; ++row) {
        const double sampled = probe_costs(row, i);
        if (std::abs(costs[i] - sampled) < epsilon) ++neutral;
        if (sampled < costs[i]) ++improved;
        if (sampled > costs[i]) ++worse;
      }
      if (improved == 0) ++never_improved;
      if (worse < s) ++not_always_worse;
    }
    anr = static_cast<double>(neutral) / (static_cast<double>(n) * s);
    ni = static_cast<double>(never_improved) / n;
    nw = static_cast<double>(not_always_worse) / n;
  }
  return {d, d_top - d, anr, ni, nw};
}

ProbeResult probe_population(const pool::ContextMemory& memory,
                             const pool::PoolConfig& pool_config, int k, int dims,
                             const pool::Bounds& bounds,
                             const PopulationSnapshot& snapshot, int samples,
                             const pool::Objective& objective, Rng& rng,
                             const std::function<long long()>& remaining_budget,
                             bool low_tier_masked) {
  const int n = snapshot.size();
  ProbeResult result;
  result.costs.resize(0, n);

  std::vector<int> allowed;
  for (int l = 0; l < pool_config.size(); ++l) {
    if (!low_tier_masked || pool_config.is_high_tier(l)) allowed.push_back(l);
  }

  std::vector<VectorXd> rows;
  for (int s = 0; s < samples; ++s) {
    if (remaining_budget() < n) {
      result.truncated = true;
      break;
    }
    const int l = allowed[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(allowed.size())))];
    const std::uint64_t probe_seed = rng.next_u64();

    // Clone, never touch the live memory.
    std::unique_ptr<pool::Optimizer> clone;
    if (auto blob = memory.context(k, l)) {
      clone = pool::Optimizer::deserialize(*blob);
    } else {
      clone = pool::Optimizer::create(pool_config.kinds[static_cast<std::size_t>(l)],
                                      dims, bounds, probe_seed);
      if (auto common = memory.common(k)) {
        if (common->mean.size() == dims) {
          clone->overlay(common->mean, common->sigma, VectorXd());
        }
      }
    }
    if (clone->population_size() != n || clone->dim() != dims) {
      // geometry drifted; skip this sample
      result.truncated = true;
      break;
    }
    MatrixXd candidates = clone->ask();
    VectorXd row(n);
    for (int i = 0; i < n; ++i) row[i] = objective(candidates.row(i).transpose());
    rows.push_back(std::move(row));
  }

  result.costs.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    result.costs.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  return result;
}

std::vector<double> progress_features(const RunTelemetry& telemetry, int k,
                                      int pool_size) {
  const double c0 = clamp_cost(telemetry.c0_star);
  const double ct = clamp_cost(telemetry.ct_star);

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(4 + 2 * pool_size));
  out.push_back(static_cast<double>(telemetry.fes_used) /
                static_cast<double>(std::max<long long>(1, telemetry.max_fes)));

  // normalized log-cost with the shared offset transformation
  const double delta_f = std::max({1.5 - ct, 1.5 - c0, 0.0});
  out.push_back(std::pow(std::log10(ct + delta_f) / std::log10(c0 + delta_f), 2.0));

  auto ratio_feature = [](double now, double before) {
    if (before <= 0.0) return 1.0;  // converged plateau
    return std::pow(clamp_cost(now) / clamp_cost(before), 8.0);
  };
  out.push_back(ratio_feature(telemetry.ct_star, telemetry.c_prev_star));

  auto it_now = telemetry.ck_star.find(k);
  auto it_prev = telemetry.ck_prev_star.find(k);
  if (it_now == telemetry.ck_star.end() || it_prev == telemetry.ck_prev_star.end()) {
    out.push_back(1.0);  // first visit: no history yet
  } else {
    out.push_back(ratio_feature(it_now->second, it_prev->second));
  }

  long long total_fes = 0;
  for (int l = 0; l < pool_size; ++l) {
    long long f = l < static_cast<int>(telemetry.fes_per_optimizer.size())
                      ? telemetry.fes_per_optimizer[static_cast<std::size_t>(l)]
                      : 0;
    total_fes += f;
  }
  for (int l = 0; l < pool_size; ++l) {
    long long f = l < static_cast<int>(telemetry.fes_per_optimizer.size())
                      ? telemetry.fes_per_optimizer[static_cast<std::size_t>(l)]
                      : 0;
    out.push_back(static_cast<double>(f) /
                  static_cast<double>(std::max<long long>(1, total_fes)));
  }
  const double improvement_scale = std::max(std::log10(c0) - std::log10(ct), 0.1);
  for (int l = 0; l < pool_size; ++l) {
    double dlog = l < static_cast<int>(telemetry.dlog_per_optimizer.size())
                      ? telemetry.dlog_per_optimizer[static_cast<std::size_t>(l)]
                      : 0.0;
    out.push_back(dlog / improvement_scale);
  }
  return out;
}

VectorXd assemble_state(const std::array<double, 3>& problem,
                        const std::array<double, 5>& population,
                        const std::vector<double>& progress) {
  VectorXd state(static_cast<Eigen::Index>(3 + 5 + progress.size()));
  Eigen::Index pos = 0;
  for (double v : problem) state[pos++] = v;
  for (double v : population) state[pos++] = v;
  for (double v : progress) state[pos++] = v;
  return state;
}

}  // namespace hlsgo::features
