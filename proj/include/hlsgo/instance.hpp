#ifndef HLSGO_INSTANCE_HPP
#define HLSGO_INSTANCE_HPP

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlsgo/bench.hpp"
#include "hlsgo/rng.hpp"

namespace hlsgo {

// Schema or invariant violation in an instance document.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (inconsistent dims, bad degree, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct InstanceConfig {
  int total_dim = 0;                       // nominal sum of subproblem dims
  std::vector<int> subproblem_dims;        // K entries
  std::vector<bench::BasicFunction> function_map;  // K entries
  int separability_degree = 1;             // 1..5
  std::vector<double> weights;             // empty => seeded log-uniform
  std::uint64_t seed = 0;
  double lower = -100.0;
  double upper = 100.0;

  int subproblem_count() const { return static_cast<int>(subproblem_dims.size()); }
  void validate() const;
};

// Overlap ratio encoded by the separability degree (0 for degrees 1-2).
double overlap_ratio_for_degree(int degree);

class ProblemInstance {
 public:
  ProblemInstance() = default;
  ProblemInstance(const ProblemInstance& other);
  ProblemInstance& operator=(const ProblemInstance& other);

  const InstanceConfig& config() const { return config_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  int subproblem_count() const { return static_cast<int>(groups_.size()); }
  int effective_dim() const { return effective_dim_; }
  int subproblem_dim(int k) const { return static_cast<int>(groups_[static_cast<std::size_t>(k)].size()); }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  const std::vector<int>& group(int k) const { return groups_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& overlap_counts() const { return overlap_counts_; }
  const bench::TransformChain& chain(int k) const { return chains_[static_cast<std::size_t>(k)]; }
  bench::BasicFunction function(int k) const { return config_.function_map[static_cast<std::size_t>(k)]; }
  double weight(int k) const { return weights_[static_cast<std::size_t>(k)]; }
  const Eigen::VectorXd& weights() const { return weights_vec_; }
  double weight_sum() const { return weights_vec_.sum(); }
  const Eigen::VectorXd& x_opt() const { return x_opt_; }
  double lower_bound() const { return config_.lower; }
  double upper_bound() const { return config_.upper; }

  // Full composite cost; increments the evaluation counter by one.
  double evaluate(const Eigen::VectorXd& x) const;
  // Cost of one subproblem given its slice of x (no counter increment; used
  // by tests and diagnostics).
  double evaluate_subproblem(int k, const Eigen::VectorXd& x_sub) const;
  // Gathers the subproblem slice out of a full vector.
  Eigen::VectorXd gather(int k, const Eigen::VectorXd& x) const;
  // Writes a subproblem slice back into a full vector.
  void scatter(int k, const Eigen::VectorXd& x_sub, Eigen::VectorXd& x) const;

  long long fe_count() const { return fe_count_.load(std::memory_order_relaxed); }
  void reset_fe_count() { fe_count_.store(0, std::memory_order_relaxed); }
  bool out_of_bounds_seen() const { return oob_seen_.load(std::memory_order_relaxed); }
  bool saturation_seen() const { return saturated_seen_.load(std::memory_order_relaxed); }

  friend ProblemInstance build_instance(const InstanceConfig& config);
  friend ProblemInstance import_instance_json(const std::string& text);

 private:
  InstanceConfig config_;
  std::string name_;
  std::vector<bench::TransformChain> chains_;
  std::vector<double> weights_;
  Eigen::VectorXd weights_vec_;
  std::vector<std::vector<int>> groups_;   // window-ordered global indices
  std::vector<int> overlap_counts_;        // K-1 adjacent overlap sizes
  Eigen::VectorXd x_opt_;
  int effective_dim_ = 0;
  mutable std::atomic<long long> fe_count_{0};
  mutable std::atomic<bool> oob_seen_{false};
  mutable std::atomic<bool> saturated_seen_{false};
};

ProblemInstance build_instance(const InstanceConfig& config);

// Versioned self-describing JSON document. import(export(p)) evaluates
// bit-identically to p.
std::string export_instance_json(const ProblemInstance& instance);
ProblemInstance import_instance_json(const std::string& text);
void save_instance(const ProblemInstance& instance, const std::string& path);
ProblemInstance load_instance(const std::string& path);

// Haar-distributed orthogonal matrix (QR of a gaussian matrix with the R
// diagonal sign fix).
Eigen::MatrixXd random_orthogonal(int dim, Rng& rng);

struct NamedConfig {
  std::string name;
  InstanceConfig config;
};

// The 18 named preset instances: homogeneous Ackley and AttractiveSector
// families across separability degrees 1-5, plus eight heterogeneous "He"
// instances over the fixed 14-way function mapping. `scale` divides each
// nominal dimension (integer division, minimum 1).
std::vector<NamedConfig> appendix_b_preset(std::uint64_t seed, int scale);

// The fixed heterogeneous function mapping used by the He instances.
const std::vector<int>& he_function_mapping();

}  // namespace hlsgo

#endif  // HLSGO_INSTANCE_HPP
