#include "hlsgo/decompose.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace hlsgo {

using Eigen::VectorXd;

DesignStructureMatrix::DesignStructureMatrix(int dim)
    : dim_(dim), words_per_row_((dim + 63) / 64),
      rows_(static_cast<std::size_t>(dim) * static_cast<std::size_t>((dim + 63) / 64), 0) {
  for (int i = 0; i < dim; ++i) set(i, i);
}

bool DesignStructureMatrix::get(int i, int j) const {
  const auto idx = static_cast<std::size_t>(i) * static_cast<std::size_t>(words_per_row_) +
                   static_cast<std::size_t>(j / 64);
  return (rows_[idx] >> (j % 64)) & 1u;
}

void DesignStructureMatrix::set(int i, int j) {
  auto put = [&](int a, int b) {
    const auto idx = static_cast<std::size_t>(a) * static_cast<std::size_t>(words_per_row_) +
                     static_cast<std::size_t>(b / 64);
    rows_[idx] |= std::uint64_t{1} << (b % 64);
  };
  put(i, j);
  put(j, i);
}

int DesignStructureMatrix::row_sum(int i) const {
  int total = 0;
  const auto base = static_cast<std::size_t>(i) * static_cast<std::size_t>(words_per_row_);
  for (int w = 0; w < words_per_row_; ++w) {
    total += std::popcount(rows_[base + static_cast<std::size_t>(w)]);
  }
  return total;
}

bool DesignStructureMatrix::is_identity() const {
  for (int i = 0; i < dim_; ++i) {
    if (row_sum(i) != 1) return false;
  }
  return true;
}

DecompositionResult ground_truth_decompose(const ProblemInstance& instance) {
  DecompositionResult result;
  result.source = DecompositionSource::kGroundTruth;
  result.groups = instance.groups();
  result.dsm = DesignStructureMatrix(instance.effective_dim());
  for (const auto& group : result.groups) {
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        result.dsm.set(group[a], group[b]);
      }
    }
  }
  return result;
}

std::vector<std::vector<int>> connected_components(
    int dim, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(dim));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> rank(static_cast<std::size_t>(dim), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    if (rank[static_cast<std::size_t>(a)] == rank[static_cast<std::size_t>(b)]) ++rank[static_cast<std::size_t>(a)];
  };
  for (const auto& [a, b] : edges) unite(a, b);

  // Members ascend within a component; components are listed by their
  // smallest member, so the result is independent of the edge order.
  std::vector<std::vector<int>> by_root(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) by_root[static_cast<std::size_t>(find(i))].push_back(i);
  std::vector<std::vector<int>> components;
  for (auto& c : by_root) {
    if (!c.empty()) components.push_back(std::move(c));
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return components;
}

DecompositionResult differential_grouping_decompose(const ProblemInstance& instance,
                                                    double delta,
                                                    double epsilon_threshold,
                                                    long long fe_budget) {
  if (!(delta > 0.0)) throw std::invalid_argument("differential grouping: delta must be > 0");
  const int dim = instance.effective_dim();
  const long long start_fes = instance.fe_count();
  long long spent = 0;
  std::vector<std::pair<int, int>> probed;
  std::vector<std::pair<int, int>> interactions;

  auto eval = [&](const VectorXd& x) {
    if (spent >= fe_budget) {
      throw DgBudgetExhausted(spent, probed, interactions);
    }
    ++spent;
    return instance.evaluate(x);
  };

  VectorXd base = VectorXd::Constant(dim, instance.lower_bound());
  const double f0 = eval(base);
  const double epsilon =
      epsilon_threshold > 0.0 ? epsilon_threshold : 1e-6 * (1.0 + std::abs(f0));

  std::vector<double> f_single(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    VectorXd x = base;
    x[i] += delta;
    f_single[static_cast<std::size_t>(i)] = eval(x);
  }

  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      VectorXd x = base;
      x[i] += delta;
      x[j] += delta;
      const double f_ij = eval(x);
      probed.emplace_back(i, j);
      const double d1 = f_ij - f_single[static_cast<std::size_t>(j)];
      const double d2 = f_single[static_cast<std::size_t>(i)] - f0;
      if (std::abs(d1 - d2) > epsilon) interactions.emplace_back(i, j);
    }
  }

  DecompositionResult result;
  result.source = DecompositionSource::kDetected;
  result.groups = connected_components(dim, interactions);
  result.dsm = DesignStructureMatrix(dim);
  for (const auto& [a, b] : interactions) result.dsm.set(a, b);
  (void)start_fes;
  return result;
}

}  // namespace hlsgo
