#ifndef HLSGO_AGENT_HPP
#define HLSGO_AGENT_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlsgo/rng.hpp"

namespace hlsgo::agent {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kMaskSurrogate = -1e9;
inline constexpr int kEmbedDim = 64;
inline constexpr int kHeadDim = 16;

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// The trainable tensors; also the shape of a gradient set.
struct TensorSet {
  MatrixXd w_embed;   // 64 x (12+2L)
  VectorXd b_embed;   // 64
  MatrixXd w_actor1;  // 16 x 64
  VectorXd b_actor1;  // 16
  MatrixXd w_actor2;  // L x 16
  VectorXd b_actor2;  // L
  MatrixXd w_critic1; // 16 x 64
  VectorXd b_critic1; // 16
  MatrixXd w_critic2; // 1 x 16
  VectorXd b_critic2; // 1

  static TensorSet zeros(int pool_size);

  std::array<MatrixXd*, 5> matrices();
  std::array<const MatrixXd*, 5> matrices() const;
  std::array<VectorXd*, 5> vectors();
  std::array<const VectorXd*, 5> vectors() const;

  std::size_t parameter_count() const;
  VectorXd flatten() const;
  void unflatten(const VectorXd& flat);
  double squared_norm() const;
  void scale(double factor);
  bool all_finite() const;
};

struct AgentParameters {
  int pool_size = 0;   // L
  int high_count = 0;  // leading high-tier entries of the pool
  TensorSet tensors;

  int input_dim() const { return 12 + 2 * pool_size; }

  // Orthogonal initialization, 0.01 gain on the actor output head.
  static AgentParameters init(int pool_size, int high_count, std::uint64_t seed);
};

// Mask over actions: 0 for available, the -1e9 surrogate for unavailable.
// Low-tier actions are unavailable when the dimension feature exceeds 0.5.
VectorXd action_mask(double s_dim, int pool_size, int high_count);

struct ForwardResult {
  VectorXd embedding;  // 64
  VectorXd h_actor;    // 16
  VectorXd logits;     // L
  VectorXd policy;     // L, exactly 0 on masked actions
  VectorXd h_critic;   // 16
  double value = 0.0;
};

ForwardResult forward(const AgentParameters& params, const VectorXd& state,
                      const VectorXd& mask);

struct ActionSample {
  int action = -1;
  double log_prob = 0.0;
  double value = 0.0;
};

// Categorical draw from the masked policy; greedy picks the argmax with ties
// broken by the lowest index.
ActionSample sample_action(const AgentParameters& params, const VectorXd& state,
                           const VectorXd& mask, Rng& rng, bool greedy = false);

double policy_entropy(const VectorXd& policy);

struct PpoSample {
  VectorXd state;
  VectorXd mask;
  int action = 0;
  double advantage = 0.0;
  double ret = 0.0;       // bootstrapped return target
  double old_log_prob = 0.0;
  double old_value = 0.0;
};

struct PpoHyper {
  double clip_epsilon = 0.2;
  double value_coef = 0.5;    // alpha
  double entropy_coef = 0.01; // beta
};

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

struct GradResult {
  TensorSet gradients;
  LossStats stats;
};

// Mean gradients of L_policy + alpha * L_value - beta * H over the batch.
// Throws std::runtime_error naming the batch index on a non-finite loss.
GradResult gradients(const AgentParameters& params, std::span<const PpoSample> batch,
                     const PpoHyper& hyper);

// Scalar total loss on a batch (finite-difference oracle hook).
double batch_loss(const AgentParameters& params, std::span<const PpoSample> batch,
                  const PpoHyper& hyper);

class AdamOptimizer {
 public:
  AdamOptimizer(int pool_size, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void apply(AgentParameters& params, const TensorSet& gradients, double lr);

 private:
  TensorSet m_;
  TensorSet v_;
  long long t_ = 0;
  double beta1_, beta2_, epsilon_;
};

// Returns the pre-clip global gradient norm; rescales in place when above.
double clip_gradient_norm(TensorSet& gradients, double max_norm);

// Versioned binary container, little-endian 64-bit floats, shape header with
// the pool size embedded; loading refuses a pool-size mismatch.
void save_checkpoint(const AgentParameters& params, const std::string& path);
AgentParameters load_checkpoint(const std::string& path,
                                int expected_pool_size = -1);

}  // namespace hlsgo::agent

#endif  // HLSGO_AGENT_HPP
