// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Budgeted for a desktop CPU; the heavyweight learning checks run
// scaled-down experiments.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include "hlsgo/agent.hpp"
#include "hlsgo/commands.hpp"
#include "hlsgo/decompose.hpp"
#include "hlsgo/instance.hpp"
#include "hlsgo/runner.hpp"
#include "hlsgo/stats.hpp"

using namespace hlsgo;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

VectorXd vec_from_json(const json& arr) {
  VectorXd x(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = arr[static_cast<std::size_t>(i)].get<double>();
  return x;
}

InstanceConfig make_config(std::vector<int> dims, std::vector<int> fns, int degree,
                           std::uint64_t seed, bool unit_weights = false) {
  InstanceConfig cfg;
  cfg.subproblem_dims = std::move(dims);
  for (int f : fns) cfg.function_map.push_back(bench::function_from_id(f));
  cfg.total_dim = 0;
  for (int d : cfg.subproblem_dims) cfg.total_dim += d;
  cfg.separability_degree = degree;
  cfg.seed = seed;
  if (unit_weights) cfg.weights.assign(cfg.subproblem_dims.size(), 1.0);
  return cfg;
}

// --- criterion 1 -----------------------------------------------------------
void criterion_1() {
  Timer timer;
  bool pass = true;
  int checked = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5 && pass; ++seed) {
    auto preset = appendix_b_preset(seed, 10);
    if (preset.size() != 18) pass = false;
    for (const auto& named : preset) {
      auto instance = build_instance(named.config);
      const double at_opt = std::abs(instance.evaluate(instance.x_opt()));
      worst = std::max(worst, at_opt / instance.weight_sum());
      if (at_opt > 1e-9 * instance.weight_sum()) {
        pass = false;
        std::printf("  !! %s seed %llu: |f(x_opt)| = %.3e\n", named.name.c_str(),
                    static_cast<unsigned long long>(seed), at_opt);
      }
      ++checked;
    }
  }
  pass = pass && checked == 90 && timer.seconds() < 60.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%d instances, worst |f(x_opt)|/sum(w) = %.2e",
                checked, worst);
  report(1, "benchmark correctness", pass, detail, timer.seconds());
}

// --- criterion 2 -----------------------------------------------------------
void criterion_2() {
  Timer timer;
  std::ifstream in(std::string(HLSGO_TEST_DATA_DIR) + "/golden_transforms.json");
  bool pass = in.good();
  int checked = 0;
  double worst = 0.0;
  if (pass) {
    json doc = json::parse(in);
    auto check_scalar = [&](double got, double expect) {
      const double err = std::abs(got - expect) /
                         std::max({1.0, std::abs(got), std::abs(expect)});
      worst = std::max(worst, err);
      if (!rel_close(got, expect, 1e-10)) pass = false;
      ++checked;
    };
    auto check_vec = [&](const VectorXd& got, const VectorXd& expect) {
      for (Eigen::Index i = 0; i < got.size(); ++i) check_scalar(got[i], expect[i]);
    };
    for (const auto& c : doc["osz"]) check_vec(bench::apply_osz(vec_from_json(c["z"])), vec_from_json(c["expect"]));
    for (const auto& c : doc["asy"]) check_vec(bench::apply_asy(vec_from_json(c["z"]), c["beta"].get<double>()), vec_from_json(c["expect"]));
    for (const auto& c : doc["lambda"]) check_vec(bench::apply_lambda(vec_from_json(c["z"]), c["alpha"].get<double>()), vec_from_json(c["expect"]));
    for (const auto& c : doc["basic"]) {
      check_scalar(bench::eval_basic(bench::function_from_id(c["fn"].get<int>()), vec_from_json(c["z"])),
                   c["expect"].get<double>());
    }
    for (const auto& c : doc["composed"]) {
      VectorXd x = vec_from_json(c["x"]);
      bench::TransformChain chain;
      chain.shift = VectorXd::Zero(x.size());
      chain.permutation.resize(static_cast<std::size_t>(x.size()));
      for (int i = 0; i < x.size(); ++i) chain.permutation[static_cast<std::size_t>(i)] = i;
      check_scalar(bench::eval_subproblem(bench::function_from_id(c["fn"].get<int>()), chain, x),
                   c["expect"].get<double>());
    }
  }
  pass = pass && checked > 1500;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%d reference values, worst rel err = %.2e",
                checked, worst);
  report(2, "transformation golden values", pass, detail, timer.seconds());
}

// --- criterion 3 -----------------------------------------------------------
void criterion_3() {
  Timer timer;
  bool pass = true;
  int recovered = 0;
  auto as_sets = [](const std::vector<std::vector<int>>& groups) {
    std::set<std::set<int>> out;
    for (const auto& g : groups) out.insert(std::set<int>(g.begin(), g.end()));
    return out;
  };
  // scale-comparable families so interactions stay numerically visible
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg1 = make_config({12, 18, 14}, {5, 5, 5}, 1, 50000 + seed, true);
    auto cfg2 = make_config({15, 20, 12}, {2, 2, 2}, 2, 60000 + seed, true);
    for (const auto& cfg : {cfg1, cfg2}) {
      auto instance = build_instance(cfg);
      auto detected = differential_grouping_decompose(instance, 10.0, 1.0, 20000);
      auto truth = ground_truth_decompose(instance);
      if (as_sets(detected.groups) == as_sets(truth.groups)) ++recovered;
      else pass = false;
    }
  }
  pass = pass && recovered == 20 && timer.seconds() < 120.0;
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%d/20 instances recovered exactly", recovered);
  report(3, "decomposition recovery", pass, detail, timer.seconds());
}

// --- criterion 4 -----------------------------------------------------------
void criterion_4() {
  Timer timer;
  bool pass = true;
  // 20-D sphere subproblem objective from a generated instance
  auto instance = build_instance(make_config({20}, {1}, 1, 777));
  pool::Bounds bounds{instance.lower_bound(), instance.upper_bound()};
  auto objective = [&](const VectorXd& x_sub) {
    return instance.weight(0) * instance.evaluate_subproblem(0, x_sub);
  };
  const auto kinds = pool::PoolConfig::default_pool().kinds;
  for (std::size_t l = 0; l < kinds.size() && pass; ++l) {
    std::vector<double> uninterrupted, resumed;
    {
      pool::ContextMemory memory;
      auto handle = pool::create_or_restore(memory, 0, static_cast<int>(l), kinds[l], 20,
                                            bounds, 4242);
      for (int s = 0; s < 20; ++s) {
        uninterrupted.push_back(pool::step(handle, objective, 2500).best_cost);
      }
    }
    {
      pool::ContextMemory memory;
      auto handle = pool::create_or_restore(memory, 0, static_cast<int>(l), kinds[l], 20,
                                            bounds, 4242);
      for (int s = 0; s < 10; ++s) {
        resumed.push_back(pool::step(handle, objective, 2500).best_cost);
      }
      pool::checkpoint(handle, memory);
      handle.optimizer.reset();
      auto restored = pool::create_or_restore(memory, 0, static_cast<int>(l), kinds[l], 20,
                                              bounds, 1 /*unused*/);
      for (int s = 0; s < 10; ++s) {
        resumed.push_back(pool::step(restored, objective, 2500).best_cost);
      }
    }
    for (int s = 0; s < 20; ++s) {
      if (uninterrupted[static_cast<std::size_t>(s)] != resumed[static_cast<std::size_t>(s)]) {
        pass = false;
        std::printf("  !! %s diverges at step %d\n", pool::optimizer_kind_name(kinds[l]), s);
        break;
      }
    }
  }
  report(4, "warm-start fidelity", pass, "4 optimizers x 20 steps bit-identical",
         timer.seconds());
}

// --- criterion 5 -----------------------------------------------------------
void criterion_5() {
  Timer timer;
  bool pass = true;
  const int pool_size = 4, high_count = 2;
  agent::PpoHyper hyper;
  Rng rng(90210);
  double worst = 0.0;
  long long checked = 0;
  for (int batch_index = 0; batch_index < 10 && pass; ++batch_index) {
    auto params = agent::AgentParameters::init(pool_size, high_count,
                                               500 + static_cast<std::uint64_t>(batch_index));
    std::vector<agent::PpoSample> batch;
    for (int i = 0; i < 8; ++i) {
      agent::PpoSample s;
      const double s_dim = rng.uniform(0.0, 1.2);
      s.state = VectorXd(12 + 2 * pool_size);
      for (Eigen::Index j = 0; j < s.state.size(); ++j) s.state[j] = rng.uniform(0, 1);
      s.state[0] = s_dim;
      s.mask = agent::action_mask(s_dim, pool_size, high_count);
      auto pick = agent::sample_action(params, s.state, s.mask, rng);
      s.action = pick.action;
      s.old_log_prob = pick.log_prob + 0.1 * rng.normal();
      s.old_value = pick.value + 0.3 * rng.normal();
      s.advantage = rng.normal();
      s.ret = pick.value + rng.normal();
      batch.push_back(std::move(s));
    }
    auto result = agent::gradients(params, batch, hyper);
    VectorXd flat = params.tensors.flatten();
    VectorXd analytic = result.gradients.flatten();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      agent::AgentParameters probe = params;
      VectorXd bumped = flat;
      bumped[i] = flat[i] + h;
      probe.tensors.unflatten(bumped);
      const double up = agent::batch_loss(probe, batch, hyper);
      bumped[i] = flat[i] - h;
      probe.tensors.unflatten(bumped);
      const double down = agent::batch_loss(probe, batch, hyper);
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
      const double err = std::abs(fd - analytic[i]) / denom;
      worst = std::max(worst, err);
      ++checked;
      if (err >= 1e-4) pass = false;
    }
  }
  pass = pass && timer.seconds() < 60.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%lld components, worst rel err = %.2e", checked,
                worst);
  report(5, "network gradient check", pass, detail, timer.seconds());
}

// --- criterion 6 -----------------------------------------------------------
void criterion_6() {
  Timer timer;
  bool pass = true;
  const int pool_size = 4, high_count = 2;
  auto params = agent::AgentParameters::init(pool_size, high_count, 31);
  Rng rng(606);
  int violations = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const double s_dim = rng.uniform(0.5 + 1e-12, 1.4);
    VectorXd state(12 + 2 * pool_size);
    for (Eigen::Index j = 0; j < state.size(); ++j) state[j] = rng.uniform(0, 1);
    state[0] = s_dim;
    auto pick = agent::sample_action(params, state, agent::action_mask(s_dim, pool_size, high_count), rng);
    if (pick.action >= high_count) ++violations;
  }
  if (violations != 0) pass = false;
  // derived boundary: (D/500)^0.4 crosses 0.5 between 88 and 89
  if (!(features::dimension_feature(88) < 0.5)) pass = false;
  if (!(features::dimension_feature(89) > 0.5)) pass = false;
  if (agent::action_mask(features::dimension_feature(88), pool_size, high_count).cwiseAbs().sum() != 0.0) pass = false;
  if (agent::action_mask(features::dimension_feature(89), pool_size, high_count)[high_count] == 0.0) pass = false;
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "0 violations in 10^4 draws; boundary 88 -> %.4f, 89 -> %.4f",
                features::dimension_feature(88), features::dimension_feature(89));
  report(6, "mask property", pass, detail, timer.seconds());
}

// --- criterion 7 -----------------------------------------------------------
void criterion_7() {
  Timer timer;
  bool pass = true;
  if (!rel_close(runner::compute_reward(1e10, 1e9, 1e10), 0.37796, 1e-5 / 0.37796)) pass = false;
  if (!rel_close(runner::compute_reward(1e10, 1e10, 1e10), 0.36116, 1e-5 / 0.36116)) pass = false;
  if (std::abs(runner::compute_reward(1e10, 1.0, 1e10) - 1.0) > 1e-5) pass = false;
  for (double c0 : {1e2, 1e5, 1e10, 1e30}) {
    const double log_c0 = std::log10(c0);
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double dlog = log_c0 * i / 1000.0;
      const double r = runner::compute_reward(c0, c0 * std::pow(10.0, -dlog), c0);
      if (r < prev - 1e-12 || r < 0.0 || r > 1.0 + 1e-12) {
        pass = false;
        break;
      }
      prev = r;
    }
  }
  report(7, "reward properties", pass,
         "worked examples at 1e-5; monotone and in [0,1] on the grid",
         timer.seconds());
}

// --- criteria 8 and 9 -------------------------------------------------------
// Desk-scale distribution: 4 basic functions, degrees 1-3, effective dim in
// [150, 300].
std::vector<InstanceConfig> desk_distribution(std::uint64_t base_seed, int count) {
  std::vector<InstanceConfig> configs;
  Rng rng(derive_seed(base_seed, "desk_distribution"));
  const std::vector<int> fn_pool = {2, 3, 4, 5};
  for (int i = 0; i < count; ++i) {
    const int degree = 1 + i % 3;
    const int k_count = 4 + rng.uniform_int(2);  // 4 or 5 subproblems
    std::vector<int> dims;
    std::vector<int> fns;
    int total = 0;
    for (int k = 0; k < k_count; ++k) {
      const int d = 30 + 10 * rng.uniform_int(4);  // 30..60
      dims.push_back(d);
      fns.push_back(fn_pool[static_cast<std::size_t>(rng.uniform_int(4))]);
      total += d;
    }
    while (total < 150) {
      dims.push_back(40);
      fns.push_back(fn_pool[static_cast<std::size_t>(rng.uniform_int(4))]);
      total += 40;
    }
    configs.push_back(make_config(dims, fns, degree, derive_seed(base_seed, "desk", static_cast<std::uint64_t>(i))));
  }
  return configs;
}

struct EvalSample {
  std::map<std::string, std::vector<double>> pooled;                 // policy -> costs
  std::map<std::string, std::map<int, std::vector<double>>> by_inst; // policy -> instance -> costs
};

EvalSample evaluate_policies(const std::vector<ProblemInstance>& instances,
                             const std::vector<DecompositionResult>& decompositions,
                             const pool::PoolConfig& pool_cfg,
                             const std::vector<std::pair<std::string, runner::Policy>>& policies,
                             const runner::EpisodeConfig& episode, int seeds,
                             bool* ledger_ok) {
  EvalSample sample;
  struct Job {
    int instance;
    int policy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < static_cast<int>(instances.size()); ++i) {
    for (int p = 0; p < static_cast<int>(policies.size()); ++p) {
      for (int s = 0; s < seeds; ++s) {
        jobs.push_back({i, p, 9000 + static_cast<std::uint64_t>(s)});
      }
    }
  }
  std::vector<double> outcomes(jobs.size());
  std::vector<char> ledger_flags(jobs.size(), 1);
  std::atomic<std::size_t> next{0};
  const int workers = std::min(commands::worker_count(), static_cast<int>(jobs.size()));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        const Job& job = jobs[i];
        auto result = runner::run_episode(instances[static_cast<std::size_t>(job.instance)],
                                          decompositions[static_cast<std::size_t>(job.instance)],
                                          pool_cfg, policies[static_cast<std::size_t>(job.policy)].second,
                                          episode, job.seed);
        outcomes[i] = std::log10(features::clamp_cost(result.best_cost));
        ledger_flags[i] = result.ledger.total() == result.fe_count ? 1 : 0;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& name = policies[static_cast<std::size_t>(jobs[i].policy)].first;
    sample.pooled[name].push_back(outcomes[i]);
    sample.by_inst[name][jobs[i].instance].push_back(outcomes[i]);
    if (!ledger_flags[i]) *ledger_ok = false;
  }
  return sample;
}

void criteria_8_9_10() {
  Timer timer;
  bool ledger_ok = true;

  auto pool_cfg = pool::PoolConfig::default_pool();
  auto train_configs = desk_distribution(11, 10);
  auto heldout_configs = desk_distribution(22, 10);

  std::vector<ProblemInstance> train_instances, heldout_instances;
  std::vector<DecompositionResult> train_decs, heldout_decs;
  for (const auto& cfg : train_configs) {
    train_instances.push_back(build_instance(cfg));
    train_decs.push_back(ground_truth_decompose(train_instances.back()));
  }
  for (const auto& cfg : heldout_configs) {
    heldout_instances.push_back(build_instance(cfg));
    heldout_decs.push_back(ground_truth_decompose(heldout_instances.back()));
    const int dim = heldout_instances.back().effective_dim();
    if (dim < 150 || dim > 300) {
      std::printf("  !! held-out instance outside the dim window: %d\n", dim);
    }
  }

  runner::EpisodeConfig episode;
  episode.max_fes = 100000;
  episode.step_fes = 2500;
  episode.init_pop_size = 100;

  runner::TrainConfig train_config;
  train_config.iterations = 30;
  train_config.num_envs = 8;
  train_config.n_step = 10;
  train_config.episode = episode;
  // desk-scale credit settings; the full-scale defaults stay in TrainConfig
  train_config.learning_rate = 1e-2;
  train_config.gamma = 0.3;
  train_config.gae_lambda = 0.5;
  train_config.entropy_coef = 0.01;

  auto params = agent::AgentParameters::init(pool_cfg.size(), pool_cfg.high_count,
                                             derive_seed(8, "acceptance_agent"));
  auto trained = runner::train(train_instances, train_decs, pool_cfg, std::move(params),
                               train_config, 2024);

  std::vector<std::pair<std::string, runner::Policy>> policies;
  policies.emplace_back("learned", runner::Policy{runner::PolicyMode::kLearnedSample, 0,
                                                  &trained.params});
  policies.emplace_back("random", runner::Policy{runner::PolicyMode::kRandom, 0, nullptr});
  for (int l = 0; l < pool_cfg.size(); ++l) {
    policies.emplace_back("fixed_" + std::to_string(l + 1),
                          runner::Policy{runner::PolicyMode::kFixed, l, nullptr});
  }

  auto sample = evaluate_policies(heldout_instances, heldout_decs, pool_cfg, policies,
                                  episode, 10, &ledger_ok);

  const double median_learned = stats::median(sample.pooled["learned"]);
  const double median_random = stats::median(sample.pooled["random"]);
  const std::string vs_random =
      stats::significance_mark(sample.pooled["random"], sample.pooled["learned"], 0.05);

  // globally best fixed policy by pooled median
  std::string best_fixed;
  double best_fixed_median = std::numeric_limits<double>::infinity();
  for (int l = 0; l < pool_cfg.size(); ++l) {
    const std::string name = "fixed_" + std::to_string(l + 1);
    const double m = stats::median(sample.pooled[name]);
    if (m < best_fixed_median) {
      best_fixed_median = m;
      best_fixed = name;
    }
  }
  int beats_fixed = 0;
  for (int i = 0; i < static_cast<int>(heldout_instances.size()); ++i) {
    const double ml = stats::median(sample.by_inst["learned"][i]);
    const double mf = stats::median(sample.by_inst[best_fixed][i]);
    if (ml <= mf) ++beats_fixed;
  }

  const bool pass8 = median_learned <= median_random && vs_random != "-" &&
                     beats_fixed * 2 >= static_cast<int>(heldout_instances.size()) &&
                     timer.seconds() < 7200.0;
  char detail8[256];
  std::snprintf(detail8, sizeof(detail8),
                "median log10: learned %.2f vs random %.2f (mark %s); <= best fixed (%s) on "
                "%d/10 instances",
                median_learned, median_random, vs_random.c_str(), best_fixed.c_str(),
                beats_fixed);
  report(8, "learning signal", pass8, detail8, timer.seconds());

  // criterion 9: three times the training horizon
  Timer timer9;
  runner::EpisodeConfig long_episode = episode;
  long_episode.max_fes = 300000;
  std::vector<std::pair<std::string, runner::Policy>> two_policies{policies[0], policies[1]};
  auto long_sample = evaluate_policies(heldout_instances, heldout_decs, pool_cfg,
                                       two_policies, long_episode, 10, &ledger_ok);
  const double long_learned = stats::median(long_sample.pooled["learned"]);
  const double long_random = stats::median(long_sample.pooled["random"]);
  const std::string long_mark =
      stats::significance_mark(long_sample.pooled["random"], long_sample.pooled["learned"], 0.05);
  const bool pass9 = long_learned <= long_random && long_mark != "-";
  char detail9[160];
  std::snprintf(detail9, sizeof(detail9),
                "3x horizon median log10: learned %.2f vs random %.2f (mark %s)",
                long_learned, long_random, long_mark.c_str());
  report(9, "generalization shape", pass9, detail9, timer9.seconds());

  // criterion 10: the FE ledger reconciled on every episode above, plus a
  // dedicated sweep across degrees (including overlapped instances)
  Timer timer10;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (int degree = 1; degree <= 5; ++degree) {
      auto instance = build_instance(
          make_config({12, 15, 10}, {3, 5, 2}, degree, 7000 + seed * 10 + static_cast<std::uint64_t>(degree)));
      auto decomposition = ground_truth_decompose(instance);
      runner::EpisodeConfig small;
      small.max_fes = 12000;
      small.step_fes = 600;
      small.init_pop_size = 40;
      runner::Policy policy{runner::PolicyMode::kRandom, 0, nullptr};
      auto result = runner::run_episode(instance, decomposition, pool_cfg, policy, small, seed);
      if (result.ledger.total() != result.fe_count) ledger_ok = false;
    }
  }
  report(10, "FE ledger", ledger_ok, "init + step + probe == evaluation counter, zero tolerance",
         timer10.seconds());
}

}  // namespace

int main() {
  Timer total;
  std::printf("acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criteria_8_9_10();
  std::printf("%s: %d criterion failure(s), %.1fs total\n",
              failures == 0 ? "SUCCESS" : "FAILURE", failures, total.seconds());
  return failures == 0 ? 0 : 1;
}
