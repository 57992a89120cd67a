#ifndef HLSGO_DECOMPOSE_HPP
#define HLSGO_DECOMPOSE_HPP

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hlsgo/instance.hpp"

namespace hlsgo {

// Symmetric binary variable-interaction matrix with an all-ones diagonal,
// stored as 64-bit bitset rows.
class DesignStructureMatrix {
 public:
  DesignStructureMatrix() = default;
  explicit DesignStructureMatrix(int dim);

  int dim() const { return dim_; }
  bool get(int i, int j) const;
  void set(int i, int j);  // sets (i,j) and (j,i)
  int row_sum(int i) const;
  bool is_identity() const;

  bool operator==(const DesignStructureMatrix& other) const {
    return dim_ == other.dim_ && rows_ == other.rows_;
  }

 private:
  int dim_ = 0;
  int words_per_row_ = 0;
  std::vector<std::uint64_t> rows_;
};

enum class DecompositionSource { kGroundTruth, kDetected };

struct DecompositionResult {
  std::vector<std::vector<int>> groups;
  DesignStructureMatrix dsm;
  DecompositionSource source = DecompositionSource::kGroundTruth;
};

// Differential grouping ran out of budget; carries what was probed so far.
class DgBudgetExhausted : public std::runtime_error {
 public:
  DgBudgetExhausted(long long fes_spent, std::vector<std::pair<int, int>> probed,
                    std::vector<std::pair<int, int>> interactions)
      : std::runtime_error("differential grouping budget exhausted after " +
                           std::to_string(fes_spent) + " evaluations"),
        fes_spent(fes_spent),
        pairs_probed(std::move(probed)),
        interactions(std::move(interactions)) {}

  long long fes_spent;
  std::vector<std::pair<int, int>> pairs_probed;
  std::vector<std::pair<int, int>> interactions;
};

// Reads the generator metadata; costs no evaluations.
DecompositionResult ground_truth_decompose(const ProblemInstance& instance);

// Pairwise difference-of-differences detector probed from the lower-bound
// corner. epsilon_threshold <= 0 selects the relative default
// 1e-6 * (1 + |f(base)|). Groups are the connected components of the
// interaction graph. Evaluations count against the instance counter.
DecompositionResult differential_grouping_decompose(const ProblemInstance& instance,
                                                    double delta,
                                                    double epsilon_threshold,
                                                    long long fe_budget);

// Connected components of an undirected interaction graph over dim nodes;
// deterministic ascending order regardless of the edge order.
std::vector<std::vector<int>> connected_components(
    int dim, const std::vector<std::pair<int, int>>& edges);

}  // namespace hlsgo

#endif  // HLSGO_DECOMPOSE_HPP
