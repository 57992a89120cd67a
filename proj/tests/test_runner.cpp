#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hlsgo/runner.hpp"

using namespace hlsgo;
using namespace hlsgo::runner;
using Eigen::VectorXd;

namespace {

InstanceConfig toy_config(std::vector<int> dims, std::vector<int> fns, int degree,
                          std::uint64_t seed) {
  InstanceConfig cfg;
  cfg.subproblem_dims = std::move(dims);
  for (int f : fns) cfg.function_map.push_back(bench::function_from_id(f));
  cfg.total_dim = 0;
  for (int d : cfg.subproblem_dims) cfg.total_dim += d;
  cfg.separability_degree = degree;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("reward worked examples") {
  // frozen by direct arithmetic
  CHECK(compute_reward(1e10, 1e9, 1e10) == doctest::Approx(0.3779644730092272).epsilon(1e-5));
  CHECK(compute_reward(1e10, 1e10, 1e10) == doctest::Approx(0.3611575592573076).epsilon(1e-5));
  CHECK(compute_reward(1e10, 1.0, 1e10) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reward is monotone in the improvement and bounded on the grid") {
  for (double c0 : {1e2, 1e5, 1e10, 1e30}) {
    const double log_c0 = std::log10(c0);
    double prev = -1.0;
    for (int i = 0; i <= 400; ++i) {
      const double dlog = log_c0 * i / 400.0;
      const double r = compute_reward(c0, c0 * std::pow(10.0, -dlog), c0);
      CHECK(r >= prev - 1e-12);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0 + 1e-12);
      prev = r;
    }
  }
}

TEST_CASE("reward stays finite for tiny and clamped costs") {
  CHECK(std::isfinite(compute_reward(1e-25, 1e-25, 1e-25)));
  CHECK(std::isfinite(compute_reward(0.0, 0.0, 0.0)));
  CHECK(std::isfinite(compute_reward(1.0, 1e-30, 1e2)));
}

TEST_CASE("epoch scaling shrinks with the remaining budget") {
  CHECK(scaled_epoch_count(12, 1.0) == 12);
  CHECK(scaled_epoch_count(12, 0.5) == 6);
  CHECK(scaled_epoch_count(12, 0.01) == 1);
  CHECK(scaled_epoch_count(12, 0.0) == 1);
  CHECK(scaled_epoch_count(12, -0.3) == 1);
}

TEST_CASE("episode runs, the ledger closes, and the best trace is monotone") {
  auto inst = build_instance(toy_config({5, 7, 6}, {1, 3, 5}, 2, 17));
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();
  EpisodeConfig config;
  config.max_fes = 20000;
  config.step_fes = 1000;
  config.init_pop_size = 50;

  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count, 3);
  Policy policy{PolicyMode::kLearnedSample, 0, &params};
  auto result = run_episode(inst, decomposition, pool_cfg, policy, config, 99);

  CHECK(result.ledger.total() == result.fe_count);
  CHECK(result.fe_count <= config.max_fes);
  CHECK(result.trajectory.size() > 10);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& t : result.trajectory) {
    CHECK(t.c_star_after <= prev + 1e-300);
    CHECK(std::isfinite(t.reward));
    CHECK(t.reward >= 0.0);
    CHECK(t.state.size() == 12 + 2 * pool_cfg.size());
    prev = t.c_star_after;
  }
  CHECK(result.trajectory.back().done);

  // the stored best solution reproduces the recorded best cost
  ProblemInstance probe = inst;
  probe.reset_fe_count();
  CHECK(probe.evaluate(result.best_solution) == result.best_cost);
}

TEST_CASE("episode reruns are identical under a fixed seed") {
  auto inst = build_instance(toy_config({6, 4}, {2, 4}, 1, 23));
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();
  EpisodeConfig config;
  config.max_fes = 15000;
  config.step_fes = 800;
  config.init_pop_size = 30;
  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count, 5);
  Policy policy{PolicyMode::kLearnedSample, 0, &params};

  auto a = run_episode(inst, decomposition, pool_cfg, policy, config, 4242);
  auto b = run_episode(inst, decomposition, pool_cfg, policy, config, 4242);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].c_star_after == b.trajectory[i].c_star_after);
    CHECK(a.trajectory[i].action == b.trajectory[i].action);
  }
  CHECK(a.best_cost == b.best_cost);
}

TEST_CASE("budget ledger matches the decision-step arithmetic") {
  auto inst = build_instance(toy_config({5, 5, 5, 5}, {1, 1, 1, 1}, 1, 31));
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();
  EpisodeConfig config;
  config.max_fes = 100000;
  config.step_fes = 2500;
  config.init_pop_size = 100;
  config.target_cost = 0.0;  // never triggers; exhaust the budget
  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count, 9);
  Policy policy{PolicyMode::kRandom, 0, nullptr};
  auto result = run_episode(inst, decomposition, pool_cfg, policy, config, 7);

  CHECK(result.ledger.total() == result.fe_count);
  // 39 full-budget steps by the plain arithmetic; probe overhead removes
  // some while cheaper tail steps add a few
  CHECK(result.trajectory.size() >= 35);
  CHECK(result.trajectory.size() <= 45);
  CHECK(result.ledger.init + result.ledger.probe + result.ledger.step <= 100000);
  CHECK(result.fe_count > 90000);  // budget substantially consumed
}

TEST_CASE("trivially solvable instance finishes mid-round") {
  // one-dimensional subproblems collapse below the target well within budget
  auto inst = build_instance(toy_config({1, 1}, {1, 1}, 1, 3));
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();
  EpisodeConfig config;
  config.max_fes = 200000;
  config.step_fes = 2500;
  config.init_pop_size = 20;
  Policy policy{PolicyMode::kFixed, 2, nullptr};  // full covariance
  auto result = run_episode(inst, decomposition, pool_cfg, policy, config, 11);
  CHECK(result.reached_target);
  CHECK(result.best_cost < 1e-20);
  CHECK(result.fe_count < config.max_fes);
  CHECK(result.trajectory.back().done);
}

TEST_CASE("fixed policy respects the mask through the tier default") {
  auto inst = build_instance(toy_config({100, 4}, {1, 1}, 1, 77));
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();
  EpisodeConfig config;
  config.max_fes = 6000;
  config.step_fes = 500;
  config.init_pop_size = 20;
  Policy policy{PolicyMode::kFixed, 3, nullptr};  // low tier requested
  auto result = run_episode(inst, decomposition, pool_cfg, policy, config, 13);
  for (const auto& t : result.trajectory) {
    if (t.k == 0) CHECK(t.action == 0);  // 100-D subproblem: tier default
    else CHECK(t.action == 3);
  }
}

TEST_CASE("random policy only samples unmasked actions") {
  auto inst = build_instance(toy_config({120, 6}, {4, 2}, 1, 5));
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();
  EpisodeConfig config;
  config.max_fes = 8000;
  config.step_fes = 400;
  config.init_pop_size = 10;
  Policy policy{PolicyMode::kRandom, 0, nullptr};
  auto result = run_episode(inst, decomposition, pool_cfg, policy, config, 21);
  for (const auto& t : result.trajectory) {
    if (t.k == 0) CHECK(t.action < pool_cfg.high_count);
  }
}

TEST_CASE("training runs and logs sane statistics") {
  std::vector<ProblemInstance> problems;
  std::vector<DecompositionResult> decompositions;
  for (std::uint64_t s = 1; s <= 2; ++s) {
    problems.push_back(build_instance(toy_config({6, 5}, {1, 3}, 2, 100 + s)));
    decompositions.push_back(ground_truth_decompose(problems.back()));
  }
  auto pool_cfg = pool::PoolConfig::default_pool();
  TrainConfig config;
  config.iterations = 3;
  config.num_envs = 2;
  config.n_step = 6;
  config.episode.max_fes = 8000;
  config.episode.step_fes = 400;
  config.episode.init_pop_size = 20;
  config.learning_rate = 1e-3;

  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count, 1);
  auto result = train(problems, decompositions, pool_cfg, params, config, 55);
  REQUIRE(result.log.size() == 3);
  for (const auto& entry : result.log) {
    CHECK(entry.transitions == 12);
    CHECK(std::isfinite(entry.policy_loss));
    CHECK(std::isfinite(entry.value_loss));
    CHECK(entry.entropy > 0.0);
    CHECK(entry.k_epochs >= 1);
    CHECK(entry.k_epochs <= config.k_epoch);
    CHECK(entry.mean_reward >= 0.0);
  }
  CHECK(result.params.tensors.all_finite());
}

TEST_CASE("divergence guard halves the learning rate") {
  std::vector<ProblemInstance> problems{build_instance(toy_config({5}, {1}, 1, 9))};
  std::vector<DecompositionResult> decompositions{ground_truth_decompose(problems[0])};
  auto pool_cfg = pool::PoolConfig::default_pool();
  TrainConfig config;
  config.iterations = 1;
  config.num_envs = 1;
  config.n_step = 4;
  config.episode.max_fes = 5000;
  config.episode.step_fes = 300;
  config.episode.init_pop_size = 10;

  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count, 2);
  params.tensors.w_critic2.setConstant(1e4);  // absurd values blow up the value loss
  auto result = train(problems, decompositions, pool_cfg, params, config, 5);
  CHECK(result.log[0].lr_halved);
  CHECK(result.log[0].learning_rate < config.learning_rate);
}

TEST_CASE("policy learns to prefer the dominant optimizer") {
  // separable high-condition elliptic: the diagonal strategy gains multiple
  // orders of magnitude per step while the dense strategies crawl
  auto cfg = toy_config({40, 45}, {2, 2}, 1, 404);
  auto inst = build_instance(cfg);
  auto decomposition = ground_truth_decompose(inst);
  auto pool_cfg = pool::PoolConfig::default_pool();

  EpisodeConfig episode;
  episode.max_fes = 100000;
  episode.step_fes = 2500;
  episode.init_pop_size = 50;

  // dominance oracle: each optimizer forced solo
  std::vector<double> solo_costs;
  for (int l = 0; l < pool_cfg.size(); ++l) {
    Policy fixed{PolicyMode::kFixed, l, nullptr};
    auto r = run_episode(inst, decomposition, pool_cfg, fixed, episode, 1000 + static_cast<std::uint64_t>(l));
    solo_costs.push_back(std::log10(features::clamp_cost(r.best_cost)));
  }
  const int dominant = 0;  // diagonal covariance
  for (int l = 0; l < pool_cfg.size(); ++l) {
    if (l != dominant) CHECK(solo_costs[static_cast<std::size_t>(dominant)] < solo_costs[static_cast<std::size_t>(l)] - 2.0);
  }

  // near-greedy credit keeps the critic simple enough to fit within the
  // 20-iteration budget of this scenario
  TrainConfig config;
  config.iterations = 20;
  config.num_envs = 4;
  config.n_step = 10;
  config.episode = episode;
  config.learning_rate = 1e-2;
  config.entropy_coef = 0.01;
  config.gamma = 0.3;
  config.gae_lambda = 0.5;

  std::vector<ProblemInstance> problems{inst};
  std::vector<DecompositionResult> decompositions{decomposition};
  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count, 77);
  auto trained = train(problems, decompositions, pool_cfg, params, config, 77);

  // measure the selection frequency on a fresh evaluation episode
  Environment env(inst, decomposition, pool_cfg, episode, 31337);
  double prob_sum = 0.0;
  int steps = 0;
  while (const Decision* d = env.pending_decision()) {
    auto fwd = agent::forward(trained.params, d->state, d->mask);
    prob_sum += fwd.policy[dominant];
    auto pick = agent::sample_action(trained.params, d->state, d->mask, env.rng(), false);
    env.act(pick.action, pick.log_prob, pick.value);
    ++steps;
  }
  CHECK(steps > 10);
  CHECK(prob_sum / steps > 0.8);
}
