#ifndef HLSGO_POOL_HPP
#define HLSGO_POOL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hlsgo/rng.hpp"

namespace hlsgo::pool {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class OptimizerKind : std::uint8_t {
  kSepCma = 1,   // diagonal-covariance ES, O(D) state
  kLmEs = 2,     // limited-memory matrix-adaptation ES, O(mD) state
  kCma = 3,      // full-covariance ES with rank-one + rank-mu updates
  kRankOneCma = 4,  // full-covariance ES with the rank-one update only
};

const char* optimizer_kind_name(OptimizerKind kind);
OptimizerKind optimizer_kind_from_name(const std::string& name);
bool optimizer_is_high_tier(OptimizerKind kind);

// Ordered pool: indices 0..high_count-1 are the high-dimensional tier, the
// rest the low-dimensional tier.
struct PoolConfig {
  std::vector<OptimizerKind> kinds;
  int high_count = 0;

  int size() const { return static_cast<int>(kinds.size()); }
  bool is_high_tier(int index) const { return index < high_count; }
  void validate() const;

  static PoolConfig default_pool();
  // Comma-separated kind names, high tier first ("sepcma,lmes,cma,r1cma").
  static PoolConfig parse(const std::string& spec, int high_count);
};

struct Bounds {
  double lower = -100.0;
  double upper = 100.0;
  double center() const { return 0.5 * (lower + upper); }
  double range() const { return upper - lower; }
};

// 4 + floor(3 ln D): the shared default population size.
int default_population_size(int dim);

struct StepReport {
  VectorXd best_solution;
  double best_cost = 0.0;
  long long fes_used = 0;
  std::vector<double> final_costs;  // last generation, sample order
  MatrixXd final_population;        // rows are individuals
};

using Objective = std::function<double(const VectorXd&)>;

// Ask/tell evolution strategy with fully serializable state. One handle is
// owned by one worker at a time.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  virtual OptimizerKind kind() const = 0;
  int dim() const { return dim_; }
  int population_size() const { return lambda_; }
  const VectorXd& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const VectorXd& best_solution() const { return best_x_; }
  double best_cost() const { return best_cost_; }
  bool has_best() const { return best_x_.size() > 0; }
  long long generations() const { return generation_; }

  // Samples one generation, bound-handled (reflect, resample once, clamp).
  MatrixXd ask();
  // Ranks the generation and updates the distribution.
  void tell(const MatrixXd& population, const VectorXd& costs);
  // One replacement candidate for a non-finite evaluation.
  VectorXd resample_one();

  // Warm-start overlay applied on cold starts.
  void overlay(const VectorXd& mean, double sigma, const VectorXd& inject_best);

  std::vector<std::uint8_t> serialize() const;

  static std::unique_ptr<Optimizer> create(OptimizerKind kind, int dim,
                                           const Bounds& bounds,
                                           std::uint64_t seed);
  static std::unique_ptr<Optimizer> deserialize(const std::vector<std::uint8_t>& blob);

 protected:
  Optimizer() = default;
  void init_base(int dim, const Bounds& bounds, std::uint64_t seed);

  virtual MatrixXd sample_generation() = 0;
  virtual void update(const MatrixXd& population, const VectorXd& costs,
                      const std::vector<int>& order) = 0;
  virtual VectorXd sample_single() = 0;
  virtual void save_state(std::vector<std::uint8_t>& out) const = 0;
  virtual void load_state(const std::uint8_t* data, std::size_t size) = 0;

  void repair(VectorXd& x);
  void write_base(std::vector<std::uint8_t>& out) const;
  std::size_t read_base(const std::uint8_t* data, std::size_t size);

  // Recombination weights and constants shared by the pool members.
  int dim_ = 0;
  int lambda_ = 0;
  int mu_ = 0;
  VectorXd weights_;
  double mu_eff_ = 0.0;
  double chi_n_ = 0.0;
  Bounds bounds_;
  VectorXd mean_;
  double sigma_ = 0.0;
  VectorXd best_x_;
  double best_cost_ = 0.0;
  long long generation_ = 0;
  Rng rng_;
  VectorXd pending_inject_;  // placed into the next generation's last slot
};

// Per-subproblem shared record: global-best solution, population mean, step
// size.
struct CommonContext {
  VectorXd best_solution;
  double best_cost = 0.0;
  VectorXd mean;
  double sigma = 0.0;
};

// Context memory: per-(subproblem, optimizer) serialized state plus the
// per-subproblem common record. Reads may be concurrent; writes serialize.
class ContextMemory {
 public:
  ContextMemory() = default;
  ContextMemory(const ContextMemory& other);
  ContextMemory& operator=(const ContextMemory& other);

  bool has_context(int k, int l) const;
  std::optional<std::vector<std::uint8_t>> context(int k, int l) const;
  void store_context(int k, int l, std::vector<std::uint8_t> blob);
  void erase_context(int k, int l);
  std::optional<CommonContext> common(int k) const;
  void update_common(int k, const VectorXd& best_x, double best_cost,
                     const VectorXd& mean, double sigma);
  void add_fes(int k, int l, long long fes);
  long long fes(int k, int l) const;
  std::uint64_t fingerprint() const;
  std::map<std::pair<int, int>, long long> fe_usage() const;

 private:
  std::map<std::pair<int, int>, std::vector<std::uint8_t>> contexts_;
  std::map<int, CommonContext> common_;
  std::map<std::pair<int, int>, long long> fes_;
  mutable std::shared_mutex mutex_;
};

struct Handle {
  int k = -1;
  int l = -1;
  std::unique_ptr<Optimizer> optimizer;
};

// Restores Gamma[k,l] exactly when present; otherwise cold-starts (mean at
// the box center, sigma = 0.3 * range) and overlays the Common record. A
// stored context whose dimension mismatches is discarded with a logged cold
// start.
Handle create_or_restore(ContextMemory& memory, int k, int l,
                         OptimizerKind kind, int dims, const Bounds& bounds,
                         std::uint64_t cold_seed);

// Runs whole generations until the next one would exceed fe_budget.
// Throws std::invalid_argument when fe_budget cannot fund one generation.
StepReport step(Handle& handle, const Objective& objective, long long fe_budget);

// Writes the handle's serialized state and refreshes the Common record.
void checkpoint(const Handle& handle, ContextMemory& memory);

}  // namespace hlsgo::pool

#endif  // HLSGO_POOL_HPP
