#include "hlsgo/runner.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace hlsgo::runner {

using features::clamp_cost;

void EpisodeConfig::validate() const {
  if (max_fes <= 0) throw ConfigError("episode: max_fes must be positive");
  if (step_fes <= 0 || step_fes > max_fes) {
    throw ConfigError("episode: step_fes must be in 1..max_fes");
  }
  if (init_pop_size < 1) throw ConfigError("episode: init_pop_size must be >= 1");
  if (probe_samples < 0) throw ConfigError("episode: probe_samples must be >= 0");
}

void TrainConfig::validate() const {
  episode.validate();
  if (n_step < 1 || k_epoch < 1 || num_envs < 1 || iterations < 1) {
    throw ConfigError("train: counts must be positive");
  }
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw ConfigError("train: clip epsilon must be in (0,1)");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must be in (0,1]");
  if (!(learning_rate > 0.0) || !(lr_decay > 0.0) || !(gae_lambda >= 0.0) ||
      !(grad_norm_clip > 0.0) || !(value_coef >= 0.0) || !(entropy_coef >= 0.0)) {
    throw ConfigError("train: hyperparameters must be positive");
  }
}

double compute_reward(double c_prev_star, double c_t_star, double c0_star) {
  const double c_prev = clamp_cost(c_prev_star);
  const double c_t = clamp_cost(c_t_star);
  const double c0 = clamp_cost(c0_star);
  const double dlog = std::log10(c_prev) - std::log10(c_t);
  const double log_c0 = std::log10(c0);
  const double delta_r = std::max({1.5 - dlog, 1.5 - log_c0, 0.0});
  return std::sqrt((dlog + delta_r) / (log_c0 + delta_r));
}

const char* policy_mode_name(PolicyMode mode) {
  switch (mode) {
    case PolicyMode::kLearnedSample: return "learned";
    case PolicyMode::kLearnedGreedy: return "greedy";
    case PolicyMode::kRandom: return "random";
    case PolicyMode::kFixed: return "fixed";
  }
  return "unknown";
}

int scaled_epoch_count(int k_epoch, double remaining_fraction) {
  const double frac = std::clamp(remaining_fraction, 0.0, 1.0);
  return std::max(1, static_cast<int>(std::lround(k_epoch * frac)));
}

Environment::Environment(const ProblemInstance& instance,
                         const DecompositionResult& decomposition,
                         const pool::PoolConfig& pool_config,
                         const EpisodeConfig& config, std::uint64_t seed)
    : instance_(instance),
      decomposition_(decomposition),
      pool_config_(pool_config),
      config_(config),
      bounds_{instance.lower_bound(), instance.upper_bound()},
      seed_(seed),
      rng_(derive_seed(seed, "episode")) {
  config_.validate();
  pool_config_.validate();
  if (decomposition_.groups.empty()) {
    throw ConfigError("environment: empty decomposition");
  }
  std::vector<bool> covered(static_cast<std::size_t>(instance_.effective_dim()), false);
  for (const auto& group : decomposition_.groups) {
    for (int idx : group) {
      if (idx < 0 || idx >= instance_.effective_dim()) {
        throw ConfigError("environment: decomposition index out of range");
      }
      covered[static_cast<std::size_t>(idx)] = true;
    }
  }
  for (bool c : covered) {
    if (!c) throw ConfigError("environment: decomposition does not cover all variables");
  }
  instance_.reset_fe_count();
  snapshots_.assign(decomposition_.groups.size(), std::nullopt);
  telemetry_.max_fes = config_.max_fes;
  telemetry_.fes_per_optimizer.assign(static_cast<std::size_t>(pool_config_.size()), 0);
  telemetry_.dlog_per_optimizer.assign(static_cast<std::size_t>(pool_config_.size()), 0.0);
}

double Environment::evaluate_patched(int k, const VectorXd& x_sub,
                                     const VectorXd& context) {
  VectorXd x = context;
  const auto& group = decomposition_.groups[static_cast<std::size_t>(k)];
  for (std::size_t i = 0; i < group.size(); ++i) {
    x[group[i]] = x_sub[static_cast<Eigen::Index>(i)];
  }
  const double cost = instance_.evaluate(x);
  if (cost < c_star_) {
    c_star_ = cost;
    x_star_ = x;
  }
  return cost;
}

void Environment::initialize() {
  initialized_ = true;
  c_star_ = std::numeric_limits<double>::infinity();
  x_star_ = VectorXd::Zero(instance_.effective_dim());
  const long long before = instance_.fe_count();
  const long long sample_count =
      std::min<long long>(config_.init_pop_size, config_.max_fes);
  for (long long i = 0; i < sample_count; ++i) {
    VectorXd x(instance_.effective_dim());
    for (int j = 0; j < instance_.effective_dim(); ++j) {
      x[j] = rng_.uniform(bounds_.lower, bounds_.upper);
    }
    const double cost = instance_.evaluate(x);
    if (cost < c_star_) {
      c_star_ = cost;
      x_star_ = x;
    }
  }
  ledger_.init += instance_.fe_count() - before;
  c0_star_ = c_star_;
  c_star_prev_step_ = c_star_;
  telemetry_.c0_star = c0_star_;
  telemetry_.ct_star = c_star_;
  telemetry_.c_prev_star = c_star_;
  telemetry_.fes_used = instance_.fe_count();
  if (c_star_ < config_.target_cost) done_ = true;
}

const Decision* Environment::pending_decision() {
  if (!initialized_) initialize();
  if (done_) return nullptr;
  if (pending_) return &*pending_;

  const int k_count = static_cast<int>(decomposition_.groups.size());
  const int k = cursor_;
  cursor_ = (cursor_ + 1) % k_count;
  build_decision(k);
  return pending_ ? &*pending_ : nullptr;
}

void Environment::build_decision(int k) {
  const int dims = static_cast<int>(decomposition_.groups[static_cast<std::size_t>(k)].size());
  const int lambda = pool::default_population_size(dims);
  auto remaining = [&]() { return config_.max_fes - instance_.fe_count(); };

  // Reserve one generation for the optimizer step itself.
  if (remaining() < (snapshots_[static_cast<std::size_t>(k)] ? lambda : 2LL * lambda)) {
    done_ = true;
    if (!trajectory_.empty()) trajectory_.back().done = true;
    return;
  }

  auto& snapshot_slot = snapshots_[static_cast<std::size_t>(k)];
  if (!snapshot_slot) {
    // first visit: seed the population picture with a uniform sample
    features::PopulationSnapshot snap;
    snap.context = x_star_;
    snap.positions.resize(lambda, dims);
    snap.costs.resize(lambda);
    const long long before = instance_.fe_count();
    double ck_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < lambda; ++i) {
      VectorXd x_sub(dims);
      for (int j = 0; j < dims; ++j) x_sub[j] = rng_.uniform(bounds_.lower, bounds_.upper);
      snap.positions.row(i) = x_sub.transpose();
      snap.costs[i] = evaluate_patched(k, x_sub, snap.context);
      ck_best = std::min(ck_best, snap.costs[i]);
    }
    ledger_.init += instance_.fe_count() - before;
    snapshot_slot = std::move(snap);
    telemetry_.ck_star[k] = ck_best;
    telemetry_.ck_prev_star[k] = ck_best;
  }

  const auto& snapshot = *snapshot_slot;
  telemetry_.fes_used = instance_.fe_count();
  telemetry_.ct_star = c_star_;
  telemetry_.c_prev_star = c_star_prev_step_;

  const double s_dim = features::dimension_feature(dims);
  const bool low_tier_masked = s_dim > 0.5;

  const long long probe_before = instance_.fe_count();
  auto probe_objective = [&](const VectorXd& x_sub) {
    return evaluate_patched(k, x_sub, snapshot.context);
  };
  auto probe_budget = [&]() { return remaining() - lambda; };
  auto probe = features::probe_population(memory_, pool_config_, k, dims, bounds_,
                                          snapshot, config_.probe_samples,
                                          probe_objective, rng_, probe_budget,
                                          low_tier_masked);
  ledger_.probe += instance_.fe_count() - probe_before;
  telemetry_.fes_used = instance_.fe_count();
  telemetry_.ct_star = c_star_;

  auto problem = features::problem_features(k, decomposition_, instance_.effective_dim());
  auto population = features::population_features(snapshot.costs, snapshot.positions,
                                                  probe.costs);
  auto progress = features::progress_features(telemetry_, k, pool_config_.size());

  Decision decision;
  decision.k = k;
  decision.low_tier_masked = low_tier_masked;
  decision.state = features::assemble_state(problem, population, progress);
  decision.mask = agent::action_mask(decision.state[0], pool_config_.size(),
                                     pool_config_.high_count);
  pending_ = std::move(decision);
}

Transition Environment::act(int action, double log_prob, double value) {
  if (!pending_) throw std::logic_error("act: no pending decision");
  const Decision decision = *pending_;
  pending_.reset();
  if (action < 0 || action >= pool_config_.size()) {
    throw std::invalid_argument("act: action out of range");
  }
  if (decision.mask[action] != 0.0) {
    throw std::invalid_argument("act: masked action " + std::to_string(action));
  }
  const int k = decision.k;
  const auto& group = decomposition_.groups[static_cast<std::size_t>(k)];
  const int dims = static_cast<int>(group.size());

  const double c_before = c_star_;
  const double ck_before = telemetry_.ck_star.at(k);

  auto handle = pool::create_or_restore(
      memory_, k, action, pool_config_.kinds[static_cast<std::size_t>(action)], dims,
      bounds_, derive_seed(seed_, "optimizer", static_cast<std::uint64_t>(k),
                           static_cast<std::uint64_t>(action)));

  const VectorXd context = x_star_;
  double ck_step = std::numeric_limits<double>::infinity();
  auto objective = [&](const VectorXd& x_sub) {
    const double c = evaluate_patched(k, x_sub, context);
    ck_step = std::min(ck_step, c);
    return c;
  };

  const long long budget = std::min<long long>(config_.step_fes,
                                               config_.max_fes - instance_.fe_count());
  const long long step_before = instance_.fe_count();
  auto report = pool::step(handle, objective, budget);
  ledger_.step += instance_.fe_count() - step_before;
  memory_.add_fes(k, action, report.fes_used);
  pool::checkpoint(handle, memory_);

  // refresh the population picture with the step's final generation
  features::PopulationSnapshot snap;
  snap.positions = report.final_population;
  snap.costs = Eigen::Map<const VectorXd>(report.final_costs.data(),
                                          static_cast<Eigen::Index>(report.final_costs.size()));
  snap.context = context;
  snapshots_[static_cast<std::size_t>(k)] = std::move(snap);

  const double c_after = c_star_;
  const double reward = compute_reward(c_before, c_after, c0_star_);

  telemetry_.fes_per_optimizer[static_cast<std::size_t>(action)] += report.fes_used;
  telemetry_.dlog_per_optimizer[static_cast<std::size_t>(action)] +=
      std::log10(clamp_cost(c_before)) - std::log10(clamp_cost(c_after));
  telemetry_.ck_prev_star[k] = ck_before;
  telemetry_.ck_star[k] = std::min(ck_before, ck_step);
  telemetry_.ct_star = c_after;
  telemetry_.fes_used = instance_.fe_count();
  c_star_prev_step_ = c_after;
  telemetry_.c_prev_star = c_after;

  Transition transition;
  transition.state = decision.state;
  transition.mask = decision.mask;
  transition.k = k;
  transition.action = action;
  transition.reward = reward;
  transition.log_prob = log_prob;
  transition.value = value;
  transition.fes_after = instance_.fe_count();
  transition.c_star_after = c_after;
  transition.done = false;
  if (c_after < config_.target_cost) {
    done_ = true;
    transition.done = true;
  }
  trajectory_.push_back(transition);
  return transition;
}

int Environment::pick_action(const Policy& policy, const Decision& decision,
                             double* log_prob, double* value) {
  *log_prob = 0.0;
  *value = 0.0;
  switch (policy.mode) {
    case PolicyMode::kLearnedSample:
    case PolicyMode::kLearnedGreedy: {
      if (policy.params == nullptr) {
        throw ConfigError("policy: learned mode requires agent parameters");
      }
      auto pick = agent::sample_action(*policy.params, decision.state, decision.mask,
                                       rng_, policy.mode == PolicyMode::kLearnedGreedy);
      *log_prob = pick.log_prob;
      *value = pick.value;
      return pick.action;
    }
    case PolicyMode::kRandom: {
      std::vector<int> allowed;
      for (int l = 0; l < pool_config_.size(); ++l) {
        if (decision.mask[l] == 0.0) allowed.push_back(l);
      }
      return allowed[static_cast<std::size_t>(rng_.uniform_int(static_cast<int>(allowed.size())))];
    }
    case PolicyMode::kFixed: {
      if (policy.fixed_action < 0 || policy.fixed_action >= pool_config_.size()) {
        throw ConfigError("policy: fixed action out of range");
      }
      if (decision.mask[policy.fixed_action] == 0.0) return policy.fixed_action;
      return 0;  // tier default: the first high-tier optimizer
    }
  }
  throw std::logic_error("unreachable policy mode");
}

std::optional<Transition> Environment::step_once(const Policy& policy) {
  const Decision* decision = pending_decision();
  if (decision == nullptr) return std::nullopt;
  double log_prob = 0.0, value = 0.0;
  const int action = pick_action(policy, *decision, &log_prob, &value);
  return act(action, log_prob, value);
}

EpisodeResult Environment::result() const {
  EpisodeResult out;
  out.best_solution = x_star_;
  out.best_cost = c_star_;
  out.trajectory = trajectory_;
  out.telemetry = telemetry_;
  out.ledger = ledger_;
  out.fe_count = instance_.fe_count();
  out.reached_target = c_star_ < config_.target_cost;
  return out;
}

double Environment::remaining_fraction() const {
  if (config_.max_fes <= 0) return 0.0;
  return std::max(0.0, 1.0 - static_cast<double>(instance_.fe_count()) /
                           static_cast<double>(config_.max_fes));
}

EpisodeResult run_episode(const ProblemInstance& instance,
                          const DecompositionResult& decomposition,
                          const pool::PoolConfig& pool_config, const Policy& policy,
                          const EpisodeConfig& config, std::uint64_t seed) {
  Environment env(instance, decomposition, pool_config, config, seed);
  while (env.step_once(policy)) {
  }
  return env.result();
}

// ---------------------------------------------------------------------------
// PPO trainer

namespace {

struct EnvSlot {
  std::unique_ptr<Environment> env;
  int next_instance = 0;
  long long episode_counter = 0;
  int episodes_completed = 0;
  double sum_episode_best = 0.0;
};

struct Segment {
  std::vector<agent::PpoSample> samples;
  std::vector<double> rewards;
  std::vector<bool> dones;
  double bootstrap_value = 0.0;
  double remaining_fraction = 1.0;
  int episodes_completed = 0;
  double sum_episode_best = 0.0;
};

Segment collect_segment(EnvSlot& slot, const std::vector<ProblemInstance>& problems,
                        const std::vector<DecompositionResult>& decompositions,
                        const pool::PoolConfig& pool_config,
                        const agent::AgentParameters& params,
                        const TrainConfig& config, std::uint64_t seed) {
  Segment segment;
  auto reset_env = [&]() {
    const int idx = slot.next_instance;
    slot.next_instance = (slot.next_instance + 1) % static_cast<int>(problems.size());
    const std::uint64_t ep_seed =
        derive_seed(seed, "train_episode", static_cast<std::uint64_t>(slot.episode_counter));
    ++slot.episode_counter;
    slot.env = std::make_unique<Environment>(problems[static_cast<std::size_t>(idx)],
                                             decompositions[static_cast<std::size_t>(idx)],
                                             pool_config, config.episode, ep_seed);
  };
  if (!slot.env) reset_env();

  int consecutive_resets = 0;
  while (static_cast<int>(segment.samples.size()) < config.n_step) {
    const Decision* decision = slot.env->pending_decision();
    if (decision == nullptr) {
      // the episode ended between decisions; close the last collected sample
      if (!segment.dones.empty()) segment.dones.back() = true;
      ++slot.episodes_completed;
      ++segment.episodes_completed;
      segment.sum_episode_best += std::log10(clamp_cost(slot.env->best_cost()));
      ++consecutive_resets;
      if (consecutive_resets > 4) {
        throw ConfigError("train: episode budget too small to collect transitions");
      }
      reset_env();
      continue;
    }
    consecutive_resets = 0;
    auto pick = agent::sample_action(params, decision->state, decision->mask,
                                     slot.env->rng(), false);
    agent::PpoSample sample;
    sample.state = decision->state;
    sample.mask = decision->mask;
    sample.action = pick.action;
    sample.old_log_prob = pick.log_prob;
    sample.old_value = pick.value;
    auto transition = slot.env->act(pick.action, pick.log_prob, pick.value);
    segment.samples.push_back(std::move(sample));
    segment.rewards.push_back(transition.reward);
    segment.dones.push_back(transition.done);
  }

  // bootstrap value for the state after the segment
  const Decision* next = slot.env->pending_decision();
  if (next != nullptr) {
    segment.bootstrap_value = agent::forward(params, next->state, next->mask).value;
  } else {
    segment.bootstrap_value = 0.0;
  }
  segment.remaining_fraction = slot.env->remaining_fraction();
  return segment;
}

// n-step bootstrapped returns by backward summation, plus GAE advantages.
void fill_targets(Segment& segment, double gamma, double lambda) {
  const int n = static_cast<int>(segment.samples.size());
  double next_return = segment.bootstrap_value;
  double next_value = segment.bootstrap_value;
  double next_advantage = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double not_done = segment.dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
    next_return = segment.rewards[static_cast<std::size_t>(t)] + gamma * not_done * next_return;
    segment.samples[static_cast<std::size_t>(t)].ret = next_return;
    const double value = segment.samples[static_cast<std::size_t>(t)].old_value;
    const double delta =
        segment.rewards[static_cast<std::size_t>(t)] + gamma * not_done * next_value - value;
    next_advantage = delta + gamma * lambda * not_done * next_advantage;
    segment.samples[static_cast<std::size_t>(t)].advantage = next_advantage;
    next_value = value;
  }
}

}  // namespace

TrainResult train(const std::vector<ProblemInstance>& problems,
                  const std::vector<DecompositionResult>& decompositions,
                  const pool::PoolConfig& pool_config,
                  agent::AgentParameters params, const TrainConfig& config,
                  std::uint64_t seed) {
  config.validate();
  if (problems.empty()) throw ConfigError("train: empty problem set");
  if (problems.size() != decompositions.size()) {
    throw ConfigError("train: problems and decompositions must align");
  }

  TrainResult result;
  agent::AdamOptimizer adam(params.pool_size);
  double lr = config.learning_rate;

  std::vector<EnvSlot> slots(static_cast<std::size_t>(config.num_envs));
  for (int e = 0; e < config.num_envs; ++e) {
    slots[static_cast<std::size_t>(e)].next_instance =
        e % static_cast<int>(problems.size());
    slots[static_cast<std::size_t>(e)].episode_counter =
        1000000LL * (e + 1);  // distinct episode seed streams per env
  }

  for (int iter = 0; iter < config.iterations; ++iter) {
    std::vector<Segment> segments(slots.size());
    {
      std::vector<std::thread> workers;
      workers.reserve(slots.size());
      for (std::size_t e = 0; e < slots.size(); ++e) {
        workers.emplace_back([&, e]() {
          segments[e] = collect_segment(slots[e], problems, decompositions,
                                        pool_config, params, config, seed);
        });
      }
      for (auto& w : workers) w.join();
    }

    std::vector<agent::PpoSample> batch;
    double reward_sum = 0.0;
    double remaining_sum = 0.0;
    int episodes_completed = 0;
    double episode_best_sum = 0.0;
    for (auto& segment : segments) {
      fill_targets(segment, config.gamma, config.gae_lambda);
      for (double r : segment.rewards) reward_sum += r;
      remaining_sum += segment.remaining_fraction;
      episodes_completed += segment.episodes_completed;
      episode_best_sum += segment.sum_episode_best;
      for (auto& sample : segment.samples) batch.push_back(std::move(sample));
    }

    // advantage normalization over the collected batch
    double mean = 0.0;
    for (const auto& s : batch) mean += s.advantage;
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
    const double stddev = std::sqrt(var / static_cast<double>(batch.size()));
    for (auto& s : batch) s.advantage = (s.advantage - mean) / (stddev + 1e-8);

    const int k_epochs =
        scaled_epoch_count(config.k_epoch, remaining_sum / static_cast<double>(slots.size()));
    agent::PpoHyper hyper{config.clip_epsilon, config.value_coef, config.entropy_coef};

    TrainLogEntry entry;
    entry.iteration = iter;
    entry.transitions = static_cast<long long>(batch.size());
    entry.k_epochs = k_epochs;
    entry.mean_reward = reward_sum / static_cast<double>(batch.size());
    entry.episodes_completed = episodes_completed;
    entry.mean_episode_best =
        episodes_completed > 0 ? episode_best_sum / episodes_completed : 0.0;

    for (int epoch = 0; epoch < k_epochs; ++epoch) {
      auto grad = agent::gradients(params, batch, hyper);
      entry.policy_loss = grad.stats.policy_loss;
      entry.value_loss = grad.stats.value_loss;
      entry.entropy = grad.stats.entropy;
      entry.grad_norm = agent::clip_gradient_norm(grad.gradients, config.grad_norm_clip);
      adam.apply(params, grad.gradients, lr);
      if (grad.stats.value_loss > 1e6) {
        lr *= 0.5;  // divergence guard
        entry.lr_halved = true;
      }
    }
    entry.learning_rate = lr;
    lr *= config.lr_decay;
    result.log.push_back(entry);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace hlsgo::runner
