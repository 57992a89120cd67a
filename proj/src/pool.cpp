#include "hlsgo/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <mutex>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hlsgo::pool {

namespace {

constexpr double kWorstCost = 1e300;
constexpr std::uint32_t kBlobMagic = 0x48435458;  // "HCTX"
constexpr std::uint16_t kBlobVersion = 1;

struct Writer {
  std::vector<std::uint8_t>& out;
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void vec(const VectorXd& v) {
    i32(static_cast<std::int32_t>(v.size()));
    if (v.size() > 0) raw(v.data(), static_cast<std::size_t>(v.size()) * 8);
  }
  void mat(const MatrixXd& m) {
    i32(static_cast<std::int32_t>(m.rows()));
    i32(static_cast<std::int32_t>(m.cols()));
    if (m.size() > 0) raw(m.data(), static_cast<std::size_t>(m.size()) * 8);
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
};

struct Reader {
  const std::uint8_t* p;
  std::size_t n;
  std::size_t pos = 0;
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint16_t u16() { std::uint16_t v; raw(&v, 2); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  VectorXd vec() {
    std::int32_t size = i32();
    VectorXd v(size);
    if (size > 0) raw(v.data(), static_cast<std::size_t>(size) * 8);
    return v;
  }
  MatrixXd mat() {
    std::int32_t rows = i32();
    std::int32_t cols = i32();
    MatrixXd m(rows, cols);
    if (m.size() > 0) raw(m.data(), static_cast<std::size_t>(m.size()) * 8);
    return m;
  }
  void raw(void* dst, std::size_t count) {
    if (pos + count > n) throw std::runtime_error("optimizer context: truncated blob");
    std::memcpy(dst, p + pos, count);
    pos += count;
  }
};

inline double clamp_sigma(double s) {
  if (!std::isfinite(s)) return 1e-280;
  return std::clamp(s, 1e-280, 1e280);
}

inline double csa_exponent(double e) { return std::clamp(e, -20.0, 20.0); }

// Ascending cost order, ties broken by index.
std::vector<int> rank_order(const VectorXd& costs) {
  std::vector<int> order(static_cast<std::size_t>(costs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return costs[a] < costs[b]; });
  return order;
}

}  // namespace

const char* optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSepCma: return "sepcma";
    case OptimizerKind::kLmEs: return "lmes";
    case OptimizerKind::kCma: return "cma";
    case OptimizerKind::kRankOneCma: return "r1cma";
  }
  return "unknown";
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "sepcma") return OptimizerKind::kSepCma;
  if (name == "lmes") return OptimizerKind::kLmEs;
  if (name == "cma") return OptimizerKind::kCma;
  if (name == "r1cma") return OptimizerKind::kRankOneCma;
  throw std::invalid_argument("unknown optimizer kind: " + name);
}

bool optimizer_is_high_tier(OptimizerKind kind) {
  return kind == OptimizerKind::kSepCma || kind == OptimizerKind::kLmEs;
}

void PoolConfig::validate() const {
  if (kinds.empty()) throw std::invalid_argument("pool: empty optimizer list");
  if (high_count < 1 || high_count >= size()) {
    throw std::invalid_argument("pool: high tier must hold 1..L-1 optimizers");
  }
  for (int i = 0; i < size(); ++i) {
    bool high = optimizer_is_high_tier(kinds[static_cast<std::size_t>(i)]);
    if (is_high_tier(i) != high) {
      throw std::invalid_argument(
          "pool: high-tier optimizers must precede low-tier ones");
    }
  }
}

PoolConfig PoolConfig::default_pool() {
  PoolConfig cfg;
  cfg.kinds = {OptimizerKind::kSepCma, OptimizerKind::kLmEs, OptimizerKind::kCma,
               OptimizerKind::kRankOneCma};
  cfg.high_count = 2;
  return cfg;
}

PoolConfig PoolConfig::parse(const std::string& spec, int high_count) {
  PoolConfig cfg;
  cfg.high_count = high_count;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    std::string token = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!token.empty()) cfg.kinds.push_back(optimizer_kind_from_name(token));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  cfg.validate();
  return cfg;
}

int default_population_size(int dim) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

void Optimizer::init_base(int dim, const Bounds& bounds, std::uint64_t seed) {
  dim_ = dim;
  bounds_ = bounds;
  lambda_ = default_population_size(dim);
  mu_ = lambda_ / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) {
    weights_[i] = std::log(mu_ + 0.5) - std::log(static_cast<double>(i + 1));
  }
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();
  const double d = dim;
  chi_n_ = std::sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
  mean_ = VectorXd::Constant(dim, bounds.center());
  sigma_ = 0.3 * bounds.range();
  best_cost_ = std::numeric_limits<double>::infinity();
  generation_ = 0;
  rng_ = Rng(seed);
}

void Optimizer::repair(VectorXd& x) {
  bool still_out = false;
  for (int i = 0; i < dim_; ++i) {
    if (x[i] < bounds_.lower) x[i] = 2.0 * bounds_.lower - x[i];
    else if (x[i] > bounds_.upper) x[i] = 2.0 * bounds_.upper - x[i];
    if (x[i] < bounds_.lower || x[i] > bounds_.upper) still_out = true;
  }
  if (still_out) {
    x = sample_single();
    for (int i = 0; i < dim_; ++i) {
      if (x[i] < bounds_.lower) x[i] = 2.0 * bounds_.lower - x[i];
      else if (x[i] > bounds_.upper) x[i] = 2.0 * bounds_.upper - x[i];
    }
  }
  for (int i = 0; i < dim_; ++i) x[i] = std::clamp(x[i], bounds_.lower, bounds_.upper);
}

MatrixXd Optimizer::ask() {
  MatrixXd population = sample_generation();
  for (int i = 0; i < lambda_; ++i) {
    VectorXd row = population.row(i).transpose();
    repair(row);
    population.row(i) = row.transpose();
  }
  if (pending_inject_.size() == dim_) {
    VectorXd injected = pending_inject_;
    for (int i = 0; i < dim_; ++i) injected[i] = std::clamp(injected[i], bounds_.lower, bounds_.upper);
    population.row(lambda_ - 1) = injected.transpose();
    pending_inject_.resize(0);
  }
  return population;
}

void Optimizer::tell(const MatrixXd& population, const VectorXd& costs) {
  if (population.rows() != lambda_ || population.cols() != dim_ ||
      costs.size() != lambda_) {
    throw std::invalid_argument("tell: population shape mismatch");
  }
  std::vector<int> order = rank_order(costs);
  int best = order.front();
  if (costs[best] < best_cost_) {
    best_cost_ = costs[best];
    best_x_ = population.row(best).transpose();
  }
  // A fully tied generation carries no selection information (it happens when
  // another additive component dominates the costs past double precision);
  // adapting on it would be a random walk.
  if (costs[order.front()] < costs[order.back()]) {
    update(population, costs, order);
    sigma_ = clamp_sigma(sigma_);
  }
  ++generation_;
}

VectorXd Optimizer::resample_one() {
  VectorXd x = sample_single();
  for (int i = 0; i < dim_; ++i) {
    if (x[i] < bounds_.lower) x[i] = 2.0 * bounds_.lower - x[i];
    else if (x[i] > bounds_.upper) x[i] = 2.0 * bounds_.upper - x[i];
    x[i] = std::clamp(x[i], bounds_.lower, bounds_.upper);
  }
  return x;
}

void Optimizer::overlay(const VectorXd& mean, double sigma, const VectorXd& inject_best) {
  if (mean.size() == dim_) mean_ = mean;
  if (sigma > 0.0) sigma_ = clamp_sigma(sigma);
  if (inject_best.size() == dim_) pending_inject_ = inject_best;
}

void Optimizer::write_base(std::vector<std::uint8_t>& out) const {
  Writer w{out};
  w.u32(kBlobMagic);
  w.u16(kBlobVersion);
  w.u8(static_cast<std::uint8_t>(kind()));
  w.u8(0);
  w.i32(dim_);
  w.f64(bounds_.lower);
  w.f64(bounds_.upper);
  w.vec(mean_);
  w.f64(sigma_);
  w.u8(best_x_.size() > 0 ? 1 : 0);
  if (best_x_.size() > 0) {
    w.vec(best_x_);
    w.f64(best_cost_);
  }
  w.i64(generation_);
  rng_.serialize(out);
  w.u8(pending_inject_.size() > 0 ? 1 : 0);
  if (pending_inject_.size() > 0) w.vec(pending_inject_);
}

std::size_t Optimizer::read_base(const std::uint8_t* data, std::size_t size) {
  Reader r{data, size};
  if (r.u32() != kBlobMagic) throw std::runtime_error("optimizer context: bad magic");
  if (r.u16() != kBlobVersion) throw std::runtime_error("optimizer context: unsupported version");
  auto kind_byte = r.u8();
  r.u8();
  const int dim = r.i32();
  Bounds bounds;
  bounds.lower = r.f64();
  bounds.upper = r.f64();
  init_base(dim, bounds, 0);
  if (kind_byte != static_cast<std::uint8_t>(kind())) {
    throw std::runtime_error("optimizer context: kind mismatch");
  }
  mean_ = r.vec();
  sigma_ = r.f64();
  if (r.u8()) {
    best_x_ = r.vec();
    best_cost_ = r.f64();
  } else {
    best_x_.resize(0);
    best_cost_ = std::numeric_limits<double>::infinity();
  }
  generation_ = r.i64();
  r.pos += [&] {
    std::size_t used = rng_.deserialize(data + r.pos, size - r.pos);
    if (used == 0) throw std::runtime_error("optimizer context: truncated rng");
    return used;
  }();
  if (r.u8()) pending_inject_ = r.vec();
  else pending_inject_.resize(0);
  return r.pos;
}

// ---------------------------------------------------------------------------
// Diagonal-covariance ES (separable CMA variant).
class SepCmaOptimizer final : public Optimizer {
 public:
  OptimizerKind kind() const override { return OptimizerKind::kSepCma; }

  void init(int dim, const Bounds& bounds, std::uint64_t seed) {
    init_base(dim, bounds, seed);
    setup_constants();
    diag_ = VectorXd::Ones(dim);
    p_sigma_ = VectorXd::Zero(dim);
    p_c_ = VectorXd::Zero(dim);
  }

 protected:
  MatrixXd sample_generation() override {
    MatrixXd population(lambda_, dim_);
    VectorXd scale = diag_.cwiseSqrt();
    for (int i = 0; i < lambda_; ++i) {
      VectorXd z(dim_);
      for (int j = 0; j < dim_; ++j) z[j] = rng_.normal();
      population.row(i) = (mean_ + sigma_ * scale.cwiseProduct(z)).transpose();
    }
    return population;
  }

  VectorXd sample_single() override {
    VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = rng_.normal();
    return mean_ + sigma_ * diag_.cwiseSqrt().cwiseProduct(z);
  }

  void update(const MatrixXd& population, const VectorXd&, const std::vector<int>& order) override {
    // Latent vectors recomputed from the evaluated (repaired) candidates so
    // selection and adaptation stay consistent under bound handling.
    VectorXd scale = diag_.cwiseSqrt();
    const VectorXd old_mean_ = mean_;
    const double old_sigma_ = sigma_;
    VectorXd wy = VectorXd::Zero(dim_);
    VectorXd wz = VectorXd::Zero(dim_);
    for (int j = 0; j < mu_; ++j) {
      VectorXd y = (population.row(order[static_cast<std::size_t>(j)]).transpose() - mean_) / sigma_;
      wy += weights_[j] * y;
      wz += weights_[j] * y.cwiseQuotient(scale);
    }
    mean_ += sigma_ * wy;

    p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
               std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * wz;
    const double ps_norm = p_sigma_.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * (generation_ + 1)));
    const bool h_sigma = ps_norm / denom < (1.4 + 2.0 / (dim_ + 1.0)) * chi_n_;
    p_c_ = (1.0 - c_c_) * p_c_ +
           (h_sigma ? std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) : 0.0) * wy;

    VectorXd rank_mu = VectorXd::Zero(dim_);
    for (int j = 0; j < mu_; ++j) {
      VectorXd y = (population.row(order[static_cast<std::size_t>(j)]).transpose() - old_mean_) / old_sigma_;
      rank_mu += weights_[j] * y.cwiseProduct(y);
    }
    const double old_decay = 1.0 - c1_ - cmu_;
    const double stall = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
    diag_ = old_decay * diag_ + c1_ * (p_c_.cwiseProduct(p_c_) + stall * diag_) +
            cmu_ * rank_mu;
    for (int i = 0; i < dim_; ++i) diag_[i] = std::clamp(diag_[i], 1e-40, 1e40);

    sigma_ *= std::exp(csa_exponent((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0)));
  }

  void save_state(std::vector<std::uint8_t>& out) const override {
    Writer w{out};
    w.vec(diag_);
    w.vec(p_sigma_);
    w.vec(p_c_);
  }

  void load_state(const std::uint8_t* data, std::size_t size) override {
    Reader r{data, size};
    setup_constants();
    diag_ = r.vec();
    p_sigma_ = r.vec();
    p_c_ = r.vec();
  }

 private:
  void setup_constants() {
    const double d = dim_;
    c_sigma_ = (mu_eff_ + 2.0) / (d + mu_eff_ + 5.0);
    d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (d + 1.0)) - 1.0) + c_sigma_;
    c_c_ = (4.0 + mu_eff_ / d) / (d + 4.0 + 2.0 * mu_eff_ / d);
    double c1 = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff_);
    double cmu = std::min(1.0 - c1, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                        ((d + 2.0) * (d + 2.0) + mu_eff_));
    // faster adaptation permitted by the diagonal model
    c1_ = std::min(1.0, c1 * (d + 2.0) / 3.0);
    cmu_ = std::min(1.0 - c1_, cmu * (d + 2.0) / 3.0);
  }

  double c_sigma_ = 0, d_sigma_ = 0, c_c_ = 0, c1_ = 0, cmu_ = 0;
  VectorXd diag_, p_sigma_, p_c_;
};

// ---------------------------------------------------------------------------
// Limited-memory matrix adaptation ES with a fixed set of direction vectors.
class LmEsOptimizer final : public Optimizer {
 public:
  static constexpr int kMemory = 10;

  OptimizerKind kind() const override { return OptimizerKind::kLmEs; }

  void init(int dim, const Bounds& bounds, std::uint64_t seed) {
    init_base(dim, bounds, seed);
    setup_constants();
    p_sigma_ = VectorXd::Zero(dim);
    dirs_ = MatrixXd::Zero(kMemory, dim);
  }

 protected:
  MatrixXd sample_generation() override {
    MatrixXd population(lambda_, dim_);
    for (int i = 0; i < lambda_; ++i) {
      VectorXd z(dim_);
      for (int j = 0; j < dim_; ++j) z[j] = rng_.normal();
      population.row(i) = (mean_ + sigma_ * transform(z)).transpose();
    }
    return population;
  }

  VectorXd sample_single() override {
    VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = rng_.normal();
    return mean_ + sigma_ * transform(z);
  }

  void update(const MatrixXd& population, const VectorXd&, const std::vector<int>& order) override {
    VectorXd wz = VectorXd::Zero(dim_);
    VectorXd wd = VectorXd::Zero(dim_);
    for (int j = 0; j < mu_; ++j) {
      VectorXd d = (population.row(order[static_cast<std::size_t>(j)]).transpose() - mean_) / sigma_;
      wz += weights_[j] * inverse_transform(d);
      wd += weights_[j] * d;
    }
    mean_ += sigma_ * wd;
    p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
               std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * wz;
    for (int i = 0; i < kMemory; ++i) {
      const double cc = c_c_[static_cast<std::size_t>(i)];
      dirs_.row(i) = (1.0 - cc) * dirs_.row(i) +
                     std::sqrt(cc * (2.0 - cc) * mu_eff_) * wz.transpose();
    }
    sigma_ *= std::exp(csa_exponent((c_sigma_ / d_sigma_) * (p_sigma_.norm() / chi_n_ - 1.0)));
  }

  void save_state(std::vector<std::uint8_t>& out) const override {
    Writer w{out};
    w.vec(p_sigma_);
    w.mat(dirs_);
  }

  void load_state(const std::uint8_t* data, std::size_t size) override {
    Reader r{data, size};
    setup_constants();
    p_sigma_ = r.vec();
    dirs_ = r.mat();
    if (dirs_.rows() != kMemory || dirs_.cols() != dim_) {
      throw std::runtime_error("optimizer context: direction matrix shape mismatch");
    }
  }

 private:
  VectorXd transform(const VectorXd& z) const {
    VectorXd d = z;
    const int active = static_cast<int>(std::min<long long>(generation_, kMemory));
    for (int i = 0; i < active; ++i) {
      const double cd = c_d_[static_cast<std::size_t>(i)];
      d = (1.0 - cd) * d + cd * dirs_.row(i).transpose() * (dirs_.row(i) * d);
    }
    return d;
  }

  // Each factor is (1-c)I + c m m^T; its inverse follows from the
  // Sherman-Morrison identity, applied in reverse order.
  VectorXd inverse_transform(const VectorXd& d) const {
    VectorXd z = d;
    const int active = static_cast<int>(std::min<long long>(generation_, kMemory));
    for (int i = active - 1; i >= 0; --i) {
      const double c = c_d_[static_cast<std::size_t>(i)];
      const double a = 1.0 - c;
      const VectorXd m = dirs_.row(i).transpose();
      const double denom = a + c * m.squaredNorm();
      z = (z - (c / denom) * m * (m.dot(z))) / a;
    }
    return z;
  }

  void setup_constants() {
    const double d = dim_;
    c_sigma_ = (mu_eff_ + 2.0) / (d + mu_eff_ + 5.0);
    d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (d + 1.0)) - 1.0) + c_sigma_;
    c_d_.resize(kMemory);
    c_c_.resize(kMemory);
    double pd = 1.0, pc = 1.0;
    for (int i = 0; i < kMemory; ++i) {
      c_d_[static_cast<std::size_t>(i)] = std::min(0.9, 1.0 / (pd * d));
      c_c_[static_cast<std::size_t>(i)] = std::min(0.9, static_cast<double>(lambda_) / (pc * d));
      pd *= 1.5;
      pc *= 4.0;
    }
  }

  double c_sigma_ = 0, d_sigma_ = 0;
  std::vector<double> c_d_, c_c_;
  VectorXd p_sigma_;
  MatrixXd dirs_;
};

// ---------------------------------------------------------------------------
// Full-covariance ES; the rank-mu term is disabled for the rank-one variant.
class CovarianceOptimizer final : public Optimizer {
 public:
  explicit CovarianceOptimizer(bool rank_mu) : rank_mu_(rank_mu) {}

  OptimizerKind kind() const override {
    return rank_mu_ ? OptimizerKind::kCma : OptimizerKind::kRankOneCma;
  }

  void init(int dim, const Bounds& bounds, std::uint64_t seed) {
    init_base(dim, bounds, seed);
    setup_constants();
    p_sigma_ = VectorXd::Zero(dim);
    p_c_ = VectorXd::Zero(dim);
    cov_ = MatrixXd::Identity(dim, dim);
    basis_ = MatrixXd::Identity(dim, dim);
    scale_ = VectorXd::Ones(dim);
    eigen_age_ = 0;
  }

 protected:
  MatrixXd sample_generation() override {
    MatrixXd population(lambda_, dim_);
    for (int i = 0; i < lambda_; ++i) {
      VectorXd z(dim_);
      for (int j = 0; j < dim_; ++j) z[j] = rng_.normal();
      population.row(i) = (mean_ + sigma_ * (basis_ * scale_.cwiseProduct(z))).transpose();
    }
    return population;
  }

  VectorXd sample_single() override {
    VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = rng_.normal();
    return mean_ + sigma_ * (basis_ * scale_.cwiseProduct(z));
  }

  void update(const MatrixXd& population, const VectorXd&, const std::vector<int>& order) override {
    // y from the evaluated candidates, whitened with the sampling-time basis.
    MatrixXd selected_y(mu_, dim_);
    VectorXd wz = VectorXd::Zero(dim_);
    VectorXd wy = VectorXd::Zero(dim_);
    for (int j = 0; j < mu_; ++j) {
      VectorXd y = (population.row(order[static_cast<std::size_t>(j)]).transpose() - mean_) / sigma_;
      selected_y.row(j) = y.transpose();
      wy += weights_[j] * y;
      wz += weights_[j] * scale_.cwiseInverse().cwiseProduct(basis_.transpose() * y);
    }
    mean_ += sigma_ * wy;

    p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
               std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * wz;
    const double ps_norm = p_sigma_.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * (generation_ + 1)));
    const bool h_sigma = ps_norm / denom < (1.4 + 2.0 / (dim_ + 1.0)) * chi_n_;
    p_c_ = (1.0 - c_c_) * p_c_ +
           (h_sigma ? std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) : 0.0) * wy;

    const double stall = h_sigma ? 0.0 : c1_ * c_c_ * (2.0 - c_c_);
    cov_ *= 1.0 - c1_ - cmu_ + stall;
    cov_ += c1_ * p_c_ * p_c_.transpose();
    if (rank_mu_) {
      for (int j = 0; j < mu_; ++j) {
        VectorXd y = selected_y.row(j).transpose();
        cov_ += cmu_ * weights_[j] * y * y.transpose();
      }
    }
    sigma_ *= std::exp(csa_exponent((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0)));

    if (generation_ + 1 - eigen_age_ >= eigen_interval_) refresh_eigen();
  }

  void save_state(std::vector<std::uint8_t>& out) const override {
    Writer w{out};
    w.vec(p_sigma_);
    w.vec(p_c_);
    w.mat(cov_);
    w.mat(basis_);
    w.vec(scale_);
    w.i64(eigen_age_);
  }

  void load_state(const std::uint8_t* data, std::size_t size) override {
    Reader r{data, size};
    setup_constants();
    p_sigma_ = r.vec();
    p_c_ = r.vec();
    cov_ = r.mat();
    basis_ = r.mat();
    scale_ = r.vec();
    eigen_age_ = r.i64();
  }

 private:
  void refresh_eigen() {
    cov_ = 0.5 * (cov_ + cov_.transpose().eval());
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov_);
    VectorXd ev = solver.eigenvalues();
    const double floor_ev = std::max(1e-40, ev.maxCoeff() * 1e-14);
    for (int i = 0; i < dim_; ++i) ev[i] = std::max(ev[i], floor_ev);
    basis_ = solver.eigenvectors();
    scale_ = ev.cwiseSqrt();
    eigen_age_ = generation_ + 1;
  }

  void setup_constants() {
    const double d = dim_;
    c_sigma_ = (mu_eff_ + 2.0) / (d + mu_eff_ + 5.0);
    d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (d + 1.0)) - 1.0) + c_sigma_;
    c_c_ = (4.0 + mu_eff_ / d) / (d + 4.0 + 2.0 * mu_eff_ / d);
    c1_ = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff_);
    cmu_ = rank_mu_ ? std::min(1.0 - c1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                              ((d + 2.0) * (d + 2.0) + mu_eff_))
                    : 0.0;
    // refresh cadence balances the O(D^3) decomposition against sampling
    // accuracy; small problems refresh every generation
    eigen_interval_ = std::max(1LL, static_cast<long long>(d) / 10);
  }

  bool rank_mu_ = true;
  double c_sigma_ = 0, d_sigma_ = 0, c_c_ = 0, c1_ = 0, cmu_ = 0;
  long long eigen_interval_ = 1;
  VectorXd p_sigma_, p_c_, scale_;
  MatrixXd cov_, basis_;
  long long eigen_age_ = 0;
};

// ---------------------------------------------------------------------------

std::unique_ptr<Optimizer> Optimizer::create(OptimizerKind kind, int dim,
                                             const Bounds& bounds,
                                             std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("optimizer dimension must be >= 1");
  switch (kind) {
    case OptimizerKind::kSepCma: {
      auto opt = std::make_unique<SepCmaOptimizer>();
      opt->init(dim, bounds, seed);
      return opt;
    }
    case OptimizerKind::kLmEs: {
      auto opt = std::make_unique<LmEsOptimizer>();
      opt->init(dim, bounds, seed);
      return opt;
    }
    case OptimizerKind::kCma: {
      auto opt = std::make_unique<CovarianceOptimizer>(true);
      opt->init(dim, bounds, seed);
      return opt;
    }
    case OptimizerKind::kRankOneCma: {
      auto opt = std::make_unique<CovarianceOptimizer>(false);
      opt->init(dim, bounds, seed);
      return opt;
    }
  }
  throw std::invalid_argument("unknown optimizer kind");
}

std::vector<std::uint8_t> Optimizer::serialize() const {
  std::vector<std::uint8_t> out;
  write_base(out);
  save_state(out);
  return out;
}

std::unique_ptr<Optimizer> Optimizer::deserialize(const std::vector<std::uint8_t>& blob) {
  if (blob.size() < 8) throw std::runtime_error("optimizer context: blob too small");
  const auto kind = static_cast<OptimizerKind>(blob[6]);
  std::unique_ptr<Optimizer> opt;
  switch (kind) {
    case OptimizerKind::kSepCma: opt = std::make_unique<SepCmaOptimizer>(); break;
    case OptimizerKind::kLmEs: opt = std::make_unique<LmEsOptimizer>(); break;
    case OptimizerKind::kCma: opt = std::make_unique<CovarianceOptimizer>(true); break;
    case OptimizerKind::kRankOneCma: opt = std::make_unique<CovarianceOptimizer>(false); break;
    default: throw std::runtime_error("optimizer context: unknown kind byte");
  }
  std::size_t used = opt->read_base(blob.data(), blob.size());
  opt->load_state(blob.data() + used, blob.size() - used);
  return opt;
}

// ---------------------------------------------------------------------------

ContextMemory::ContextMemory(const ContextMemory& other) {
  std::shared_lock lock(other.mutex_);
  contexts_ = other.contexts_;
  common_ = other.common_;
  fes_ = other.fes_;
}

ContextMemory& ContextMemory::operator=(const ContextMemory& other) {
  if (this == &other) return *this;
  std::shared_lock their_lock(other.mutex_);
  std::unique_lock my_lock(mutex_);
  contexts_ = other.contexts_;
  common_ = other.common_;
  fes_ = other.fes_;
  return *this;
}

bool ContextMemory::has_context(int k, int l) const {
  std::shared_lock lock(mutex_);
  return contexts_.count({k, l}) > 0;
}

std::optional<std::vector<std::uint8_t>> ContextMemory::context(int k, int l) const {
  std::shared_lock lock(mutex_);
  auto it = contexts_.find({k, l});
  if (it == contexts_.end()) return std::nullopt;
  return it->second;
}

void ContextMemory::store_context(int k, int l, std::vector<std::uint8_t> blob) {
  std::unique_lock lock(mutex_);
  contexts_[{k, l}] = std::move(blob);
}

void ContextMemory::erase_context(int k, int l) {
  std::unique_lock lock(mutex_);
  contexts_.erase({k, l});
}

std::optional<CommonContext> ContextMemory::common(int k) const {
  std::shared_lock lock(mutex_);
  auto it = common_.find(k);
  if (it == common_.end()) return std::nullopt;
  return it->second;
}

void ContextMemory::update_common(int k, const VectorXd& best_x, double best_cost,
                                  const VectorXd& mean, double sigma) {
  std::unique_lock lock(mutex_);
  auto it = common_.find(k);
  if (it == common_.end()) {
    CommonContext ctx;
    ctx.best_solution = best_x;
    ctx.best_cost = best_cost;
    ctx.mean = mean;
    ctx.sigma = sigma;
    common_.emplace(k, std::move(ctx));
    return;
  }
  if (best_cost < it->second.best_cost) {
    it->second.best_solution = best_x;
    it->second.best_cost = best_cost;
  }
  it->second.mean = mean;
  it->second.sigma = sigma;
}

void ContextMemory::add_fes(int k, int l, long long fes) {
  std::unique_lock lock(mutex_);
  fes_[{k, l}] += fes;
}

long long ContextMemory::fes(int k, int l) const {
  std::shared_lock lock(mutex_);
  auto it = fes_.find({k, l});
  return it == fes_.end() ? 0 : it->second;
}

std::map<std::pair<int, int>, long long> ContextMemory::fe_usage() const {
  std::shared_lock lock(mutex_);
  return fes_;
}

std::uint64_t ContextMemory::fingerprint() const {
  std::shared_lock lock(mutex_);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t size) {
    h ^= fnv1a64(data, size);
    h *= 0x100000001b3ULL;
  };
  for (const auto& [key, blob] : contexts_) {
    mix(&key, sizeof(key));
    mix(blob.data(), blob.size());
  }
  for (const auto& [k, ctx] : common_) {
    mix(&k, sizeof(k));
    mix(ctx.best_solution.data(), static_cast<std::size_t>(ctx.best_solution.size()) * 8);
    mix(&ctx.best_cost, 8);
    mix(ctx.mean.data(), static_cast<std::size_t>(ctx.mean.size()) * 8);
    mix(&ctx.sigma, 8);
  }
  return h;
}

// ---------------------------------------------------------------------------

Handle create_or_restore(ContextMemory& memory, int k, int l,
                         OptimizerKind kind, int dims, const Bounds& bounds,
                         std::uint64_t cold_seed) {
  Handle handle;
  handle.k = k;
  handle.l = l;
  if (auto blob = memory.context(k, l)) {
    try {
      auto restored = Optimizer::deserialize(*blob);
      if (restored->dim() != dims || restored->kind() != kind) {
        throw std::runtime_error("stored context incompatible (dim " +
                                 std::to_string(restored->dim()) + " vs " +
                                 std::to_string(dims) + ")");
      }
      handle.optimizer = std::move(restored);
      return handle;
    } catch (const std::exception& e) {
      std::cerr << "[pool] context (" << k << "," << l
                << ") invalidated: " << e.what() << "; cold start\n";
      memory.erase_context(k, l);
    }
  }
  handle.optimizer = Optimizer::create(kind, dims, bounds, cold_seed);
  if (auto common = memory.common(k)) {
    // A common record from a different geometry is as stale as the context.
    if (common->mean.size() == dims) {
      handle.optimizer->overlay(common->mean, common->sigma, common->best_solution);
    }
  }
  return handle;
}

StepReport step(Handle& handle, const Objective& objective, long long fe_budget) {
  Optimizer& opt = *handle.optimizer;
  const int lambda = opt.population_size();
  if (fe_budget < lambda) {
    throw std::invalid_argument("step: budget " + std::to_string(fe_budget) +
                                " cannot fund one generation of " +
                                std::to_string(lambda));
  }
  StepReport report;
  report.best_cost = std::numeric_limits<double>::infinity();
  long long used = 0;
  MatrixXd population;
  VectorXd costs(lambda);
  while (used + lambda <= fe_budget) {
    population = opt.ask();
    for (int i = 0; i < lambda; ++i) {
      VectorXd x = population.row(i).transpose();
      double c = objective(x);
      ++used;
      if (!std::isfinite(c) && used < fe_budget) {
        x = opt.resample_one();
        c = objective(x);
        ++used;
        population.row(i) = x.transpose();
      }
      if (!std::isfinite(c)) c = kWorstCost;
      costs[i] = c;
      if (c < report.best_cost) {
        report.best_cost = c;
        report.best_solution = x;
      }
    }
    opt.tell(population, costs);
  }
  report.fes_used = used;
  report.final_population = population;
  report.final_costs.assign(costs.data(), costs.data() + costs.size());
  return report;
}

void checkpoint(const Handle& handle, ContextMemory& memory) {
  memory.store_context(handle.k, handle.l, handle.optimizer->serialize());
  if (handle.optimizer->has_best()) {
    memory.update_common(handle.k, handle.optimizer->best_solution(),
                         handle.optimizer->best_cost(), handle.optimizer->mean(),
                         handle.optimizer->sigma());
  }
}

}  // namespace hlsgo::pool
