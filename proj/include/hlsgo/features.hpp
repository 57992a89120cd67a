#ifndef HLSGO_FEATURES_HPP
#define HLSGO_FEATURES_HPP

#include <array>
#include <functional>
#include <map>
#include <vector>

#include "hlsgo/decompose.hpp"
#include "hlsgo/pool.hpp"

namespace hlsgo::features {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Costs below this are clamped before any log/ratio math.
inline constexpr double kCostFloor = 1e-20;

inline double clamp_cost(double c) { return c < kCostFloor ? kCostFloor : c; }

inline int state_dim(int pool_size) { return 12 + 2 * pool_size; }

// Run-level counters feeding the progress features.
struct RunTelemetry {
  long long fes_used = 0;
  long long max_fes = 1;
  double c0_star = kCostFloor;      // best cost of the initial sample
  double ct_star = kCostFloor;      // current global best
  double c_prev_star = kCostFloor;  // global best at the previous decision step
  std::map<int, double> ck_star;       // per-subproblem best
  std::map<int, double> ck_prev_star;  // per-subproblem best at its previous visit
  std::vector<long long> fes_per_optimizer;
  std::vector<double> dlog_per_optimizer;  // cumulative log10 improvement
};

// Last evaluated population of a subproblem plus the full-dimension context
// its costs were computed against.
struct PopulationSnapshot {
  MatrixXd positions;  // rows are individuals (subproblem coordinates)
  VectorXd costs;
  VectorXd context;    // full solution vector the rows were patched into

  int size() const { return static_cast<int>(positions.rows()); }
};

// [ (D_k/500)^0.4 ; fully-separable indicator ; shared-variable ratio ]
std::array<double, 3> problem_features(int k, const DecompositionResult& decomposition,
                                       int full_dim);

// [ d ; d_top - d ; ANR ; NI ; NW ] with the probe matrix holding one row of
// sampled costs per probe. A population smaller than 2 yields zeros with the
// degenerate flag; an empty probe matrix yields the neutral (1, 1, 1).
std::array<double, 5> population_features(const VectorXd& costs,
                                          const MatrixXd& positions,
                                          const MatrixXd& probe_costs,
                                          double epsilon = 1.0,
                                          bool* degenerate = nullptr);

struct ProbeResult {
  MatrixXd costs;  // up to S rows of population-size sampled costs
  bool truncated = false;
};

// Advances cloned optimizer states one generation per sample, never mutating
// the live context memory. Each sample draws one mask-allowed optimizer
// uniformly. Evaluations go through `objective` (which charges the budget);
// sampling stops early when `remaining_budget` cannot fund a generation.
ProbeResult probe_population(const pool::ContextMemory& memory,
                             const pool::PoolConfig& pool_config, int k, int dims,
                             const pool::Bounds& bounds,
                             const PopulationSnapshot& snapshot, int samples,
                             const pool::Objective& objective, Rng& rng,
                             const std::function<long long()>& remaining_budget,
                             bool low_tier_masked);

// The (4 + 2L)-entry progress block.
std::vector<double> progress_features(const RunTelemetry& telemetry, int k,
                                      int pool_size);

// Concatenates the three blocks in table order.
VectorXd assemble_state(const std::array<double, 3>& problem,
                        const std::array<double, 5>& population,
                        const std::vector<double>& progress);

// The dimension feature doubles as the masking signal.
double dimension_feature(int dims);

}  // namespace hlsgo::features

#endif  // HLSGO_FEATURES_HPP
