#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "hlsgo/decompose.hpp"

using namespace hlsgo;
using Eigen::VectorXd;

namespace {

InstanceConfig toy_config(std::vector<int> dims, std::vector<int> fns, int degree,
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

std::set<std::set<int>> as_sets(const std::vector<std::vector<int>>& groups) {
  std::set<std::set<int>> out;
  for (const auto& g : groups) out.insert(std::set<int>(g.begin(), g.end()));
  return out;
}

// Ground-truth groups with overlapping components merged, as the detector
// would report them.
std::set<std::set<int>> merged_ground_truth(const ProblemInstance& inst) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& g : inst.groups()) {
    for (std::size_t i = 1; i < g.size(); ++i) edges.emplace_back(g[0], g[static_cast<std::size_t>(i)]);
  }
  return as_sets(connected_components(inst.effective_dim(), edges));
}

}  // namespace

TEST_CASE("ground truth on one-dimensional subproblems is the identity DSM") {
  auto cfg = toy_config({1, 1, 1, 1}, {1, 2, 3, 7}, 1, 5);
  auto inst = build_instance(cfg);
  auto result = ground_truth_decompose(inst);
  CHECK(result.groups.size() == 4);
  CHECK(result.dsm.is_identity());
  CHECK(result.source == DecompositionSource::kGroundTruth);
}

TEST_CASE("ground truth DSM equals the brute-force co-occurrence scan") {
  for (int degree : {1, 3, 5}) {
    auto cfg = toy_config({6, 10, 8}, {5, 5, 5}, degree, 17 + static_cast<std::uint64_t>(degree));
    auto inst = build_instance(cfg);
    auto result = ground_truth_decompose(inst);

    DesignStructureMatrix brute(inst.effective_dim());
    for (int i = 0; i < inst.effective_dim(); ++i) {
      for (int j = i + 1; j < inst.effective_dim(); ++j) {
        for (const auto& g : inst.groups()) {
          bool has_i = std::find(g.begin(), g.end(), i) != g.end();
          bool has_j = std::find(g.begin(), g.end(), j) != g.end();
          if (has_i && has_j) {
            brute.set(i, j);
            break;
          }
        }
      }
    }
    CHECK(result.dsm == brute);
  }
}

TEST_CASE("ground truth overlap entries connect adjacent windows") {
  auto cfg = toy_config({25, 50}, {1, 1}, 3, 7);
  auto inst = build_instance(cfg);
  auto result = ground_truth_decompose(inst);
  const auto& g0 = result.groups[0];
  const auto& g1 = result.groups[1];
  std::set<int> shared;
  for (int a : g0)
    if (std::find(g1.begin(), g1.end(), a) != g1.end()) shared.insert(a);
  CHECK(shared.size() == 5);
  for (int s : shared) {
    for (int a : g0) CHECK(result.dsm.get(s, a));
    for (int b : g1) CHECK(result.dsm.get(s, b));
  }
}

TEST_CASE("appendix config yields 14 groups with the configured sizes") {
  auto preset = appendix_b_preset(3, 10);
  auto inst = build_instance(preset[1].config);
  auto result = ground_truth_decompose(inst);
  REQUIRE(result.groups.size() == 14);
  for (int k = 0; k < 14; ++k) {
    CHECK(static_cast<int>(result.groups[static_cast<std::size_t>(k)].size()) ==
          inst.config().subproblem_dims[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("additively separable composite detects no interactions") {
  auto cfg = toy_config({2, 2, 2}, {1, 1, 1}, 1, 99);
  auto inst = build_instance(cfg);
  auto result = differential_grouping_decompose(inst, 1.0, 0.0, 100000);
  CHECK(result.dsm.is_identity());
  CHECK(result.groups.size() == 6);
  CHECK(result.source == DecompositionSource::kDetected);
}

TEST_CASE("detector false-interaction rate is zero on separable instances") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = toy_config({3, 4, 3}, {1, 2, 7}, 1, seed);
    auto inst = build_instance(cfg);
    auto result = differential_grouping_decompose(inst, 1.0, 0.0, 100000);
    CHECK(result.dsm.is_identity());
  }
}

TEST_CASE("rotated two-dimensional sphere shows an interaction") {
  auto cfg = toy_config({2}, {1}, 2, 21);
  auto inst = build_instance(cfg);

  // independent four-point check of the difference-of-differences magnitude
  const double delta = 1.0;
  VectorXd base = VectorXd::Constant(2, inst.lower_bound());
  VectorXd xi = base, xj = base, xij = base;
  xi[0] += delta;
  xj[1] += delta;
  xij[0] += delta;
  xij[1] += delta;
  double f0 = inst.evaluate(base);
  double fi = inst.evaluate(xi);
  double fj = inst.evaluate(xj);
  double fij = inst.evaluate(xij);
  double magnitude = std::abs((fij - fj) - (fi - f0));
  double epsilon = 1e-6 * (1.0 + std::abs(f0));
  CHECK(magnitude > epsilon);

  auto result = differential_grouping_decompose(inst, delta, 0.0, 1000);
  CHECK(result.dsm.get(0, 1));
  CHECK(result.groups.size() == 1);
}

TEST_CASE("detected groups recover the ground truth on small instances") {
  // Function families whose probe-corner magnitudes stay comparable across
  // subproblems: the cumulative-sum function for degree 1 (its variables
  // always couple) and the rotated elliptic for degree 2.
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto cfg1 = toy_config({8, 12, 10}, {5, 5, 5}, 1, 1000 + seed, true);
    auto cfg2 = toy_config({10, 9, 11}, {2, 2, 2}, 2, 2000 + seed, true);
    for (const auto& cfg : {cfg1, cfg2}) {
      auto inst = build_instance(cfg);
      auto detected = differential_grouping_decompose(inst, 10.0, 1.0, 10000);
      auto truth = ground_truth_decompose(inst);
      CHECK(as_sets(detected.groups) == as_sets(truth.groups));
      ++checked;
    }
  }
  CHECK(checked == 6);
}

TEST_CASE("overlapped ground truth merges into connected components") {
  auto cfg = toy_config({10, 10}, {5, 5}, 3, 4242, true);
  auto inst = build_instance(cfg);
  auto detected = differential_grouping_decompose(inst, 10.0, 1e-3, 10000);
  CHECK(as_sets(detected.groups) == merged_ground_truth(inst));
  CHECK(detected.groups.size() == 1);  // the two windows share variables
}

TEST_CASE("budget exhaustion raises a partial-result error") {
  auto cfg = toy_config({4, 4}, {5, 5}, 1, 11, true);
  auto inst = build_instance(cfg);
  bool caught = false;
  try {
    differential_grouping_decompose(inst, 10.0, 1e-3, 15);  // 1 + 8 singles + 6 pairs
  } catch (const DgBudgetExhausted& e) {
    caught = true;
    CHECK(e.fes_spent == 15);
    CHECK(e.pairs_probed.size() == 6);  // pairs completed before exhaustion
  }
  CHECK(caught);
  CHECK(inst.fe_count() == 15);
}

TEST_CASE("component grouping is independent of edge order") {
  std::vector<std::pair<int, int>> edges = {{0, 3}, {3, 7}, {1, 2}, {5, 6}};
  auto expect = connected_components(9, edges);
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(edges);
    CHECK(connected_components(9, edges) == expect);
  }
}

TEST_CASE("detector FEs are charged to the instance counter") {
  auto cfg = toy_config({3, 3}, {5, 5}, 1, 77, true);
  auto inst = build_instance(cfg);
  auto before = inst.fe_count();
  differential_grouping_decompose(inst, 10.0, 1e-3, 10000);
  // 1 base + 6 singles + 15 pairs
  CHECK(inst.fe_count() - before == 22);
}
