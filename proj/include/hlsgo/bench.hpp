#ifndef HLSGO_BENCH_HPP
#define HLSGO_BENCH_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace hlsgo::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cost ceiling; anything non-finite or larger saturates to this value.
inline constexpr double kCostCeiling = 1e300;

enum class BasicFunction : int {
  kSphere = 1,
  kElliptic = 2,
  kRastrigin = 3,
  kAckley = 4,
  kSchwefel12 = 5,
  kKatsuura = 6,
  kAttractiveSector = 7,
};

const char* function_name(BasicFunction fn);
BasicFunction function_from_id(int id);

// Per-subproblem decision-space transform: y = R * perm(x - shift), followed
// by the basic function's own oscillation / asymmetry / scaling composition.
struct TransformChain {
  VectorXd shift;               // length D
  std::vector<int> permutation; // bijection on 0..D-1
  MatrixXd rotation;            // D x D, or empty when absent
  bool use_osz = true;
  bool use_asy = true;
  bool use_lambda = true;
  double asy_beta = 0.2;
  double lambda_alpha = 10.0;
  VectorXd lambda_cache;  // optional precomputed diagonal scaling

  void prepare() { lambda_cache = precomputed_lambda_scales(); }
  VectorXd precomputed_lambda_scales() const;

  int dim() const { return static_cast<int>(shift.size()); }
  bool has_rotation() const { return rotation.size() > 0; }

  // Throws std::invalid_argument when an invariant is broken (non-bijective
  // permutation, non-orthogonal rotation, bad parameters).
  void validate() const;
};

VectorXd apply_osz(const VectorXd& z);
VectorXd apply_asy(const VectorXd& z, double beta);
VectorXd apply_lambda(const VectorXd& z, double alpha);

// Which of T_osz / T_asy / Lambda the function's definition composes.
struct InternalChain {
  bool osz, asy, lambda;
};
InternalChain internal_chain(BasicFunction fn);

// Evaluates a basic function on an already fully transformed vector. All
// seven return 0 at z' = 0 (Katsuura is shifted by -1 to share that
// convention). Saturation at kCostCeiling is reported through `saturated`.
double eval_basic(BasicFunction fn, const VectorXd& z_prime,
                  bool* saturated = nullptr);

// Full per-subproblem evaluation: shift, permutation, optional rotation,
// the function's internal transform composition, then the basic function.
double eval_subproblem(BasicFunction fn, const TransformChain& chain,
                       const VectorXd& x_sub, bool* saturated = nullptr);

}  // namespace hlsgo::bench

#endif  // HLSGO_BENCH_HPP
