#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "hlsgo/agent.hpp"
#include "hlsgo/features.hpp"

using namespace hlsgo;
using namespace hlsgo::agent;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kPool = 4;
constexpr int kHigh = 2;

VectorXd random_state(Rng& rng, double s_dim) {
  VectorXd s(12 + 2 * kPool);
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = rng.uniform(0, 1);
  s[0] = s_dim;
  return s;
}

std::vector<PpoSample> random_batch(const AgentParameters& params, Rng& rng, int n) {
  std::vector<PpoSample> batch;
  for (int i = 0; i < n; ++i) {
    PpoSample s;
    const double s_dim = rng.uniform(0, 1.2);
    s.state = random_state(rng, s_dim);
    s.mask = action_mask(s_dim, kPool, kHigh);
    auto pick = sample_action(params, s.state, s.mask, rng);
    s.action = pick.action;
    s.old_log_prob = pick.log_prob + 0.1 * rng.normal();
    s.old_value = pick.value + 0.3 * rng.normal();
    s.advantage = rng.normal();
    s.ret = pick.value + rng.normal();
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace

TEST_CASE("forward produces a normalized masked policy") {
  auto params = AgentParameters::init(kPool, kHigh, 7);
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    double s_dim = rng.uniform(0, 1.3);
    VectorXd state = random_state(rng, s_dim);
    VectorXd mask = action_mask(s_dim, kPool, kHigh);
    auto fwd = forward(params, state, mask);
    CHECK(std::abs(fwd.policy.sum() - 1.0) < 1e-12);
    CHECK(std::isfinite(fwd.value));
    for (Eigen::Index i = 0; i < fwd.embedding.size(); ++i) {
      CHECK(fwd.embedding[i] > -1.0);
      CHECK(fwd.embedding[i] < 1.0);
    }
    if (s_dim > 0.5) {
      CHECK(fwd.policy[2] == 0.0);
      CHECK(fwd.policy[3] == 0.0);
    }
  }
}

TEST_CASE("zero actor head gives the uniform policy over unmasked actions") {
  auto params = AgentParameters::init(kPool, kHigh, 7);
  params.tensors.w_actor2.setZero();
  params.tensors.b_actor2.setZero();
  Rng rng(5);
  VectorXd state = random_state(rng, 0.3);
  auto fwd = forward(params, state, action_mask(0.3, kPool, kHigh));
  for (int l = 0; l < kPool; ++l) CHECK(fwd.policy[l] == doctest::Approx(0.25));

  auto masked = forward(params, random_state(rng, 0.9), action_mask(0.9, kPool, kHigh));
  CHECK(masked.policy[0] == doctest::Approx(0.5));
  CHECK(masked.policy[1] == doctest::Approx(0.5));
  CHECK(masked.policy[2] == 0.0);
}

TEST_CASE("masking boundary sits between 88 and 89 dimensions") {
  const double f88 = features::dimension_feature(88);
  const double f89 = features::dimension_feature(89);
  CHECK(f88 < 0.5);
  CHECK(f89 > 0.5);
  CHECK(action_mask(f88, kPool, kHigh).tail(2).isZero());
  CHECK(action_mask(f89, kPool, kHigh)[2] == kMaskSurrogate);
  CHECK(action_mask(f89, kPool, kHigh)[3] == kMaskSurrogate);
  CHECK(action_mask(f89, kPool, kHigh)[0] == 0.0);
}

TEST_CASE("softmax is invariant to a shared logit shift") {
  auto params = AgentParameters::init(kPool, kHigh, 11);
  Rng rng(13);
  VectorXd state = random_state(rng, 0.4);
  VectorXd mask = action_mask(0.4, kPool, kHigh);
  auto base = forward(params, state, mask);
  auto shifted = params;
  shifted.tensors.b_actor2.array() += 123.456;
  auto moved = forward(shifted, state, mask);
  for (int l = 0; l < kPool; ++l) {
    CHECK(moved.policy[l] == doctest::Approx(base.policy[l]).epsilon(1e-12));
  }
}

TEST_CASE("greedy sampling takes the argmax with lowest-index ties") {
  auto params = AgentParameters::init(kPool, kHigh, 7);
  params.tensors.w_actor2.setZero();
  params.tensors.b_actor2.setZero();  // uniform: all tied
  Rng rng(1);
  VectorXd state = random_state(rng, 0.2);
  auto pick = sample_action(params, state, action_mask(0.2, kPool, kHigh), rng, true);
  CHECK(pick.action == 0);
}

TEST_CASE("sampling is reproducible and matches the policy frequencies") {
  auto params = AgentParameters::init(kPool, kHigh, 23);
  Rng rng_a(99), rng_b(99);
  VectorXd state = random_state(rng_a, 0.3);
  Rng rng_c(99);
  state = random_state(rng_c, 0.3);  // rebuild so both streams align
  VectorXd mask = action_mask(0.3, kPool, kHigh);

  std::vector<int> seq_a, seq_b;
  Rng s1(1234), s2(1234);
  for (int i = 0; i < 50; ++i) {
    seq_a.push_back(sample_action(params, state, mask, s1).action);
    seq_b.push_back(sample_action(params, state, mask, s2).action);
  }
  CHECK(seq_a == seq_b);

  auto fwd = forward(params, state, mask);
  const int n = 100000;
  std::vector<int> counts(kPool, 0);
  Rng mc(777);
  for (int i = 0; i < n; ++i) {
    auto pick = sample_action(params, state, mask, mc);
    counts[static_cast<std::size_t>(pick.action)]++;
    CHECK(pick.log_prob == doctest::Approx(std::log(fwd.policy[pick.action])).epsilon(1e-12));
  }
  for (int l = 0; l < kPool; ++l) {
    double expect = n * fwd.policy[l];
    double sigma = std::sqrt(n * fwd.policy[l] * (1.0 - fwd.policy[l]));
    CHECK(std::abs(counts[static_cast<std::size_t>(l)] - expect) <= 3.0 * sigma + 1.0);
  }
}

TEST_CASE("masked states never sample a low-tier action") {
  auto params = AgentParameters::init(kPool, kHigh, 31);
  Rng rng(41);
  for (int rep = 0; rep < 2000; ++rep) {
    double s_dim = rng.uniform(0.5 + 1e-9, 1.4);
    VectorXd state = random_state(rng, s_dim);
    auto pick = sample_action(params, state, action_mask(s_dim, kPool, kHigh), rng);
    CHECK(pick.action < kHigh);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  PpoHyper hyper;
  Rng rng(2024);
  for (int rep = 0; rep < 3; ++rep) {
    auto params = AgentParameters::init(kPool, kHigh, 100 + static_cast<std::uint64_t>(rep));
    auto batch = random_batch(params, rng, 8);
    auto result = gradients(params, batch, hyper);

    VectorXd flat = params.tensors.flatten();
    VectorXd analytic = result.gradients.flatten();
    const double h = 1e-5;
    int checked = 0;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      AgentParameters probe = params;
      VectorXd bumped = flat;
      bumped[i] = flat[i] + h;
      probe.tensors.unflatten(bumped);
      double up = batch_loss(probe, batch, hyper);
      bumped[i] = flat[i] - h;
      probe.tensors.unflatten(bumped);
      double down = batch_loss(probe, batch, hyper);
      double fd = (up - down) / (2.0 * h);
      double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
      CHECK(std::abs(fd - analytic[i]) / denom < 1e-4);
      ++checked;
    }
    CHECK(checked == static_cast<int>(params.tensors.parameter_count()));
  }
}

TEST_CASE("identical policy with zero advantage yields a zero policy gradient") {
  auto params = AgentParameters::init(kPool, kHigh, 55);
  PpoHyper hyper;
  hyper.entropy_coef = 0.0;
  Rng rng(9);
  std::vector<PpoSample> batch;
  for (int i = 0; i < 6; ++i) {
    PpoSample s;
    double s_dim = rng.uniform(0, 1);
    s.state = random_state(rng, s_dim);
    s.mask = action_mask(s_dim, kPool, kHigh);
    auto pick = sample_action(params, s.state, s.mask, rng);
    s.action = pick.action;
    s.old_log_prob = pick.log_prob;  // ratio exactly 1
    s.advantage = 0.0;
    s.old_value = pick.value;
    s.ret = pick.value;  // zero value error as well
    batch.push_back(std::move(s));
  }
  auto result = gradients(params, batch, hyper);
  CHECK(std::sqrt(result.gradients.squared_norm()) < 1e-14);
}

TEST_CASE("a saturated clip blocks the policy gradient") {
  auto params = AgentParameters::init(kPool, kHigh, 77);
  PpoHyper hyper;
  hyper.entropy_coef = 0.0;
  hyper.value_coef = 0.0;
  Rng rng(17);
  PpoSample s;
  double s_dim = 0.2;
  s.state = random_state(rng, s_dim);
  s.mask = action_mask(s_dim, kPool, kHigh);
  auto pick = sample_action(params, s.state, s.mask, rng);
  s.action = pick.action;
  // ratio = 1 + 2 epsilon: the clipped branch is active for positive advantage
  s.old_log_prob = pick.log_prob - std::log(1.0 + 2.0 * hyper.clip_epsilon);
  s.advantage = 1.0;
  s.old_value = pick.value;
  s.ret = pick.value;
  std::vector<PpoSample> batch{s};
  auto result = gradients(params, batch, hyper);
  CHECK(std::sqrt(result.gradients.squared_norm()) == 0.0);
}

TEST_CASE("non-finite loss reports the offending batch index") {
  auto params = AgentParameters::init(kPool, kHigh, 88);
  Rng rng(21);
  auto batch = random_batch(params, rng, 3);
  batch[2].advantage = std::numeric_limits<double>::infinity();
  try {
    gradients(params, batch, PpoHyper{});
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip preserves forward outputs bit-identically") {
  auto params = AgentParameters::init(kPool, kHigh, 3);
  const std::string path = "agent_checkpoint_test.bin";
  save_checkpoint(params, path);
  auto loaded = load_checkpoint(path, kPool);
  CHECK(loaded.high_count == kHigh);

  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    double s_dim = rng.uniform(0, 1.2);
    VectorXd state = random_state(rng, s_dim);
    VectorXd mask = action_mask(s_dim, kPool, kHigh);
    auto a = forward(params, state, mask);
    auto b = forward(loaded, state, mask);
    CHECK(a.value == b.value);
    CHECK(a.policy == b.policy);
  }
  CHECK_THROWS_AS(load_checkpoint(path, 6), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("nonexistent.bin", kPool), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("adam leaves parameters untouched under zero gradients") {
  auto params = AgentParameters::init(kPool, kHigh, 4);
  auto before = params.tensors.flatten();
  AdamOptimizer adam(kPool);
  adam.apply(params, TensorSet::zeros(kPool), 1e-3);
  CHECK((params.tensors.flatten() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient norm clipping rescales once above the threshold") {
  auto g = TensorSet::zeros(kPool);
  g.w_embed.setConstant(1.0);
  double norm = std::sqrt(g.squared_norm());
  double reported = clip_gradient_norm(g, norm / 2.0);
  CHECK(reported == doctest::Approx(norm));
  CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(norm / 2.0));
}
