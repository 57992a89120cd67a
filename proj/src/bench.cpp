#include "hlsgo/bench.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace hlsgo::bench {

namespace {

void require_finite(const VectorXd& z, const char* op) {
  if (!z.allFinite()) {
    throw std::domain_error(std::string(op) + ": non-finite input");
  }
}

// (i-1)/(D-1) with 0-based i; defined as 0 for D = 1.
inline double index_fraction(int i, int dim) {
  return dim > 1 ? static_cast<double>(i) / static_cast<double>(dim - 1) : 0.0;
}

// Keeps extreme coordinates finite so downstream trig/pow never sees inf.
inline double saturate_coord(double v, bool* saturated) {
  if (std::isnan(v)) {
    if (saturated) *saturated = true;
    return 0.0;
  }
  if (v > 1e150) {
    if (saturated) *saturated = true;
    return 1e150;
  }
  if (v < -1e150) {
    if (saturated) *saturated = true;
    return -1e150;
  }
  return v;
}

inline double clamp_cost(double c, bool* saturated) {
  if (!std::isfinite(c) || c > kCostCeiling) {
    if (saturated) *saturated = true;
    return kCostCeiling;
  }
  return c;
}

}  // namespace

const char* function_name(BasicFunction fn) {
  switch (fn) {
    case BasicFunction::kSphere: return "sphere";
    case BasicFunction::kElliptic: return "elliptic";
    case BasicFunction::kRastrigin: return "rastrigin";
    case BasicFunction::kAckley: return "ackley";
    case BasicFunction::kSchwefel12: return "schwefel12";
    case BasicFunction::kKatsuura: return "katsuura";
    case BasicFunction::kAttractiveSector: return "attractive_sector";
  }
  return "unknown";
}

BasicFunction function_from_id(int id) {
  if (id < 1 || id > 7) {
    throw std::invalid_argument("basic function id must be in 1..7, got " +
                                std::to_string(id));
  }
  return static_cast<BasicFunction>(id);
}

VectorXd TransformChain::precomputed_lambda_scales() const {
  return lambda_scales(dim(), lambda_alpha);
}

void TransformChain::validate() const {
  const int d = dim();
  if (d <= 0) throw std::invalid_argument("TransformChain: empty shift");
  if (static_cast<int>(permutation.size()) != d) {
    throw std::invalid_argument("TransformChain: permutation size mismatch");
  }
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  for (int p : permutation) {
    if (p < 0 || p >= d || seen[static_cast<std::size_t>(p)]) {
      throw std::invalid_argument("TransformChain: permutation is not a bijection");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  if (has_rotation()) {
    if (rotation.rows() != d || rotation.cols() != d) {
      throw std::invalid_argument("TransformChain: rotation shape mismatch");
    }
    MatrixXd err = rotation.transpose() * rotation - MatrixXd::Identity(d, d);
    if (err.cwiseAbs().maxCoeff() >= 1e-10) {
      throw std::invalid_argument("TransformChain: rotation is not orthogonal");
    }
  }
  if (!(asy_beta > 0.0)) {
    throw std::invalid_argument("TransformChain: asy_beta must be > 0");
  }
  if (!(lambda_alpha >= 1.0)) {
    throw std::invalid_argument("TransformChain: lambda_alpha must be >= 1");
  }
}

VectorXd lambda_scales(int dim, double alpha);

VectorXd apply_osz(const VectorXd& z) {
  require_finite(z, "apply_osz");
  const auto za = z.array();
  const auto positive = za > 0.0;
  // log(|z|) with a harmless placeholder at zero entries (masked out below)
  Eigen::ArrayXd zhat = za.abs().max(1e-300).log();
  Eigen::ArrayXd c1 = positive.select(10.0, 5.5);
  Eigen::ArrayXd c2 = positive.select(7.9, 3.1);
  Eigen::ArrayXd magnitude =
      (zhat + 0.049 * ((c1 * zhat).sin() + (c2 * zhat).sin())).exp();
  Eigen::ArrayXd out = positive.select(magnitude, -magnitude);
  return (za == 0.0).select(0.0, out).matrix();
}

VectorXd apply_asy(const VectorXd& z, double beta) {
  require_finite(z, "apply_asy");
  if (!(beta > 0.0)) throw std::invalid_argument("apply_asy: beta must be > 0");
  const int d = static_cast<int>(z.size());
  const auto za = z.array();
  Eigen::ArrayXd fraction =
      d > 1 ? Eigen::ArrayXd::LinSpaced(d, 0.0, 1.0) : Eigen::ArrayXd::Zero(1);
  const auto positive = za > 0.0;
  Eigen::ArrayXd safe = positive.select(za, 1.0);
  Eigen::ArrayXd exponents = 1.0 + beta * fraction * safe.sqrt();
  return positive.select(safe.pow(exponents), za).matrix();
}

VectorXd lambda_scales(int dim, double alpha) {
  if (dim == 1) return VectorXd::Ones(1);
  Eigen::ArrayXd fraction = Eigen::ArrayXd::LinSpaced(dim, 0.0, 1.0);
  return Eigen::pow(alpha, 0.5 * fraction).matrix();
}

VectorXd apply_lambda(const VectorXd& z, double alpha) {
  require_finite(z, "apply_lambda");
  if (!(alpha >= 1.0)) throw std::invalid_argument("apply_lambda: alpha must be >= 1");
  return z.cwiseProduct(lambda_scales(static_cast<int>(z.size()), alpha));
}

InternalChain internal_chain(BasicFunction fn) {
  switch (fn) {
    case BasicFunction::kElliptic: return {true, false, false};
    case BasicFunction::kSchwefel12: return {true, true, false};
    default: return {true, true, true};
  }
}

double eval_basic(BasicFunction fn, const VectorXd& z, bool* saturated) {
  const int d = static_cast<int>(z.size());
  if (d == 0) throw std::invalid_argument("eval_basic: empty input");
  double cost = 0.0;
  switch (fn) {
    case BasicFunction::kSphere: {
      for (int i = 0; i < d; ++i) cost += z[i] * z[i];
      break;
    }
    case BasicFunction::kElliptic: {
      thread_local std::map<int, VectorXd> coef_cache;
      auto it = coef_cache.find(d);
      if (it == coef_cache.end()) {
        VectorXd coef =
            d > 1 ? VectorXd(Eigen::pow(10.0, 6.0 * Eigen::ArrayXd::LinSpaced(d, 0.0, 1.0)).matrix())
                  : VectorXd::Ones(1);
        it = coef_cache.emplace(d, std::move(coef)).first;
      }
      cost = it->second.cwiseProduct(z).dot(z);
      break;
    }
    case BasicFunction::kRastrigin: {
      cost = (z.array().square() - 10.0 * (2.0 * M_PI * z.array()).cos() + 10.0).sum();
      break;
    }
    case BasicFunction::kAckley: {
      const double sum_sq = z.squaredNorm();
      const double sum_cos = (2.0 * M_PI * z.array()).cos().sum();
      cost = -20.0 * std::exp(-0.2 * std::sqrt(sum_sq / d)) -
             std::exp(sum_cos / d) + 20.0 + M_E;
      break;
    }
    case BasicFunction::kSchwefel12: {
      double prefix = 0.0;
      for (int i = 0; i < d; ++i) {
        prefix += z[i];
        cost += prefix * prefix;
      }
      break;
    }
    case BasicFunction::kKatsuura: {
      // Shifted by -1 so the optimum value is 0 like the other six.
      double prod = 1.0;
      double expo = 10.0 / std::pow(static_cast<double>(d), 1.2);
      for (int i = 0; i < d; ++i) {
        double term = 0.0;
        double pow2 = 1.0;
        for (int j = 1; j <= 32; ++j) {
          pow2 *= 2.0;
          double v = pow2 * z[i];
          term += std::abs(v - std::round(v)) / pow2;
        }
        prod *= std::pow(1.0 + (i + 1) * term, expo);
      }
      cost = prod - 1.0;
      break;
    }
    case BasicFunction::kAttractiveSector: {
      for (int i = 0; i < d; ++i) {
        double zi = z[i];
        double sq = zi * zi;
        cost += zi > 0.0 ? 100.0 * sq + sq * sq : sq + 100.0 * sq * sq;
      }
      break;
    }
  }
  return clamp_cost(cost, saturated);
}

double eval_subproblem(BasicFunction fn, const TransformChain& chain,
                       const VectorXd& x_sub, bool* saturated) {
  const int d = chain.dim();
  if (static_cast<int>(x_sub.size()) != d) {
    throw std::invalid_argument("eval_subproblem: dimension mismatch");
  }
  VectorXd y = x_sub - chain.shift;
  VectorXd permuted(d);
  for (int i = 0; i < d; ++i) permuted[i] = y[chain.permutation[static_cast<std::size_t>(i)]];
  VectorXd z = chain.has_rotation() ? VectorXd(chain.rotation * permuted) : permuted;

  // Saturating after every stage keeps each transform's input finite even for
  // absurd out-of-bounds candidates; in-range points are never affected.
  auto saturate = [&](VectorXd& v) {
    for (int i = 0; i < d; ++i) v[i] = saturate_coord(v[i], saturated);
  };
  saturate(z);
  const InternalChain ic = internal_chain(fn);
  if (ic.osz && chain.use_osz) { z = apply_osz(z); saturate(z); }
  if (ic.asy && chain.use_asy) { z = apply_asy(z, chain.asy_beta); saturate(z); }
  if (ic.lambda && chain.use_lambda) {
    if (chain.lambda_cache.size() == d) z = z.cwiseProduct(chain.lambda_cache);
    else z = apply_lambda(z, chain.lambda_alpha);
    saturate(z);
  }
  return eval_basic(fn, z, saturated);
}

}  // namespace hlsgo::bench
