#ifndef HLSGO_RUNNER_HPP
#define HLSGO_RUNNER_HPP

#include <memory>
#include <optional>
#include <vector>

#include "hlsgo/agent.hpp"
#include "hlsgo/decompose.hpp"
#include "hlsgo/features.hpp"
#include "hlsgo/instance.hpp"
#include "hlsgo/pool.hpp"

namespace hlsgo::runner {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EpisodeConfig {
  long long max_fes = 100000;
  long long step_fes = 2500;
  double target_cost = 1e-20;
  int init_pop_size = 100;
  int probe_samples = 3;
  void validate() const;
};

// r = sqrt((dlog + delta_r) / (log10 c0 + delta_r)) with
// delta_r = max(1.5 - dlog, 1.5 - log10 c0, 0); all costs clamped at 1e-20.
double compute_reward(double c_prev_star, double c_t_star, double c0_star);

enum class PolicyMode { kLearnedSample, kLearnedGreedy, kRandom, kFixed };

struct Policy {
  PolicyMode mode = PolicyMode::kLearnedSample;
  int fixed_action = 0;
  const agent::AgentParameters* params = nullptr;  // learned modes only
};

const char* policy_mode_name(PolicyMode mode);

struct Transition {
  VectorXd state;
  VectorXd mask;
  int k = 0;
  int action = 0;
  double reward = 0.0;
  double log_prob = 0.0;
  double value = 0.0;
  bool done = false;
  long long fes_after = 0;
  double c_star_after = 0.0;
};

struct FeLedger {
  long long init = 0;
  long long step = 0;
  long long probe = 0;
  long long total() const { return init + step + probe; }
};

struct EpisodeResult {
  VectorXd best_solution;
  double best_cost = 0.0;
  std::vector<Transition> trajectory;
  features::RunTelemetry telemetry;
  FeLedger ledger;
  long long fe_count = 0;
  bool reached_target = false;
};

struct Decision {
  VectorXd state;
  VectorXd mask;
  int k = 0;
  bool low_tier_masked = false;
};

// One run of the optimization loop over a private instance copy. States are
// built lazily (probe evaluations charge the budget) and cached until acted
// on, so a trainer can peek at the pending state for bootstrapping.
class Environment {
 public:
  Environment(const ProblemInstance& instance,
              const DecompositionResult& decomposition,
              const pool::PoolConfig& pool_config, const EpisodeConfig& config,
              std::uint64_t seed);

  // The pending decision, or nullptr when the episode is over.
  const Decision* pending_decision();
  // Executes the pending decision and records the transition.
  Transition act(int action, double log_prob, double value);
  // Chooses an action per the policy and executes it.
  std::optional<Transition> step_once(const Policy& policy);

  bool finished() const { return done_; }
  int pool_size() const { return pool_config_.size(); }
  double best_cost() const { return c_star_; }
  long long fes_used() const { return instance_.fe_count(); }
  double remaining_fraction() const;
  const features::RunTelemetry& telemetry() const { return telemetry_; }
  Rng& rng() { return rng_; }

  EpisodeResult result() const;

 private:
  void initialize();
  void build_decision(int k);
  double evaluate_patched(int k, const VectorXd& x_sub, const VectorXd& context);
  int pick_action(const Policy& policy, const Decision& decision,
                  double* log_prob, double* value);

  ProblemInstance instance_;
  DecompositionResult decomposition_;
  pool::PoolConfig pool_config_;
  EpisodeConfig config_;
  pool::Bounds bounds_;
  std::uint64_t seed_;
  Rng rng_;
  pool::ContextMemory memory_;

  bool initialized_ = false;
  bool done_ = false;
  int cursor_ = 0;
  VectorXd x_star_;
  double c_star_ = 0.0;
  double c0_star_ = 0.0;
  double c_star_prev_step_ = 0.0;
  features::RunTelemetry telemetry_;
  FeLedger ledger_;
  std::vector<Transition> trajectory_;
  std::vector<std::optional<features::PopulationSnapshot>> snapshots_;
  std::optional<Decision> pending_;
};

EpisodeResult run_episode(const ProblemInstance& instance,
                          const DecompositionResult& decomposition,
                          const pool::PoolConfig& pool_config,
                          const Policy& policy, const EpisodeConfig& config,
                          std::uint64_t seed);

// K_epoch scaled linearly with the remaining budget, never below 1.
int scaled_epoch_count(int k_epoch, double remaining_fraction);

struct TrainConfig {
  int n_step = 10;
  int k_epoch = 12;
  double learning_rate = 1e-5;
  double lr_decay = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;     // alpha
  double entropy_coef = 0.01;  // beta
  double gae_lambda = 0.95;
  double grad_norm_clip = 0.5;
  double gamma = 0.99;
  int num_envs = 4;
  int iterations = 30;
  EpisodeConfig episode;
  void validate() const;
};

struct TrainLogEntry {
  int iteration = 0;
  long long transitions = 0;
  int k_epochs = 0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  double learning_rate = 0.0;
  int episodes_completed = 0;
  double mean_episode_best = 0.0;
  bool lr_halved = false;
};

struct TrainResult {
  agent::AgentParameters params;
  std::vector<TrainLogEntry> log;
};

// PPO over parallel environments cycling through the problem set.
TrainResult train(const std::vector<ProblemInstance>& problems,
                  const std::vector<DecompositionResult>& decompositions,
                  const pool::PoolConfig& pool_config,
                  agent::AgentParameters params, const TrainConfig& config,
                  std::uint64_t seed);

}  // namespace hlsgo::runner

#endif  // HLSGO_RUNNER_HPP
