#include "hlsgo/instance.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace hlsgo {

using bench::BasicFunction;
using bench::TransformChain;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

double overlap_ratio_for_degree(int degree) {
  switch (degree) {
    case 1:
    case 2: return 0.0;
    case 3: return 0.2;
    case 4: return 0.4;
    case 5: return 0.6;
    default:
      throw ConfigError("separability degree must be in 1..5, got " +
                        std::to_string(degree));
  }
}

void InstanceConfig::validate() const {
  if (subproblem_dims.empty()) throw ConfigError("no subproblems configured");
  if (subproblem_dims.size() != function_map.size()) {
    throw ConfigError("subproblem_dims and function_map lengths differ");
  }
  for (int d : subproblem_dims) {
    if (d <= 0) throw ConfigError("subproblem dimension must be positive");
  }
  (void)overlap_ratio_for_degree(separability_degree);
  long long sum = 0;
  for (int d : subproblem_dims) sum += d;
  if (separability_degree <= 2 && sum != total_dim) {
    throw ConfigError("sum of subproblem dims (" + std::to_string(sum) +
                      ") does not match total_dim (" + std::to_string(total_dim) + ")");
  }
  if (separability_degree >= 3 && sum != total_dim) {
    throw ConfigError("total_dim must equal the nominal dim sum");
  }
  if (!weights.empty()) {
    if (weights.size() != subproblem_dims.size()) {
      throw ConfigError("explicit weight list length mismatch");
    }
    for (double w : weights) {
      if (!(w > 0.0)) throw ConfigError("weights must be positive");
    }
  }
  if (!(lower < upper)) throw ConfigError("bounds must satisfy lower < upper");
}

MatrixXd random_orthogonal(int dim, Rng& rng) {
  MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

ProblemInstance::ProblemInstance(const ProblemInstance& other)
    : config_(other.config_),
      name_(other.name_),
      chains_(other.chains_),
      weights_(other.weights_),
      weights_vec_(other.weights_vec_),
      groups_(other.groups_),
      overlap_counts_(other.overlap_counts_),
      x_opt_(other.x_opt_),
      effective_dim_(other.effective_dim_) {
  fe_count_.store(other.fe_count_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  oob_seen_.store(other.oob_seen_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  saturated_seen_.store(other.saturated_seen_.load(std::memory_order_relaxed), std::memory_order_relaxed);
}

ProblemInstance& ProblemInstance::operator=(const ProblemInstance& other) {
  if (this == &other) return *this;
  config_ = other.config_;
  name_ = other.name_;
  chains_ = other.chains_;
  weights_ = other.weights_;
  weights_vec_ = other.weights_vec_;
  groups_ = other.groups_;
  overlap_counts_ = other.overlap_counts_;
  x_opt_ = other.x_opt_;
  effective_dim_ = other.effective_dim_;
  fe_count_.store(other.fe_count_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  oob_seen_.store(other.oob_seen_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  saturated_seen_.store(other.saturated_seen_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  return *this;
}

namespace {

std::vector<int> adjacent_overlaps(const InstanceConfig& config) {
  const int k_count = config.subproblem_count();
  double ratio = overlap_ratio_for_degree(config.separability_degree);
  std::vector<int> overlaps;
  overlaps.reserve(static_cast<std::size_t>(std::max(0, k_count - 1)));
  for (int k = 0; k + 1 < k_count; ++k) {
    int dk = config.subproblem_dims[static_cast<std::size_t>(k)];
    int dk1 = config.subproblem_dims[static_cast<std::size_t>(k + 1)];
    overlaps.push_back(static_cast<int>(std::floor(ratio * std::min(dk, dk1))));
  }
  return overlaps;
}

// Finishes construction shared by build and import: windows over the global
// permutation, shift vectors from x_opt.
void assemble_groups_and_shifts(ProblemInstance& inst,
                                const std::vector<int>& permutation,
                                std::vector<std::vector<int>>& groups,
                                std::vector<TransformChain>& chains,
                                const InstanceConfig& config,
                                const std::vector<int>& overlaps,
                                const VectorXd& x_opt) {
  (void)inst;
  const int k_count = config.subproblem_count();
  int start = 0;
  groups.assign(static_cast<std::size_t>(k_count), {});
  for (int k = 0; k < k_count; ++k) {
    int dk = config.subproblem_dims[static_cast<std::size_t>(k)];
    auto& g = groups[static_cast<std::size_t>(k)];
    g.resize(static_cast<std::size_t>(dk));
    for (int i = 0; i < dk; ++i) g[static_cast<std::size_t>(i)] = permutation[static_cast<std::size_t>(start + i)];
    auto& chain = chains[static_cast<std::size_t>(k)];
    chain.shift.resize(dk);
    for (int i = 0; i < dk; ++i) chain.shift[i] = x_opt[g[static_cast<std::size_t>(i)]];
    if (k + 1 < k_count) start += dk - overlaps[static_cast<std::size_t>(k)];
  }
}

}  // namespace

ProblemInstance build_instance(const InstanceConfig& config) {
  config.validate();
  const int k_count = config.subproblem_count();
  std::vector<int> overlaps = adjacent_overlaps(config);
  long long nominal = 0;
  for (int d : config.subproblem_dims) nominal += d;
  long long shared = 0;
  for (int o : overlaps) shared += o;
  const int eff_dim = static_cast<int>(nominal - shared);

  ProblemInstance inst;
  inst.config_ = config;
  inst.effective_dim_ = eff_dim;
  inst.overlap_counts_ = overlaps;

  // Independent sub-streams so components do not perturb each other.
  Rng rng_w(derive_seed(config.seed, "weights"));
  Rng rng_xopt(derive_seed(config.seed, "x_opt"));
  Rng rng_perm(derive_seed(config.seed, "permutation"));

  inst.weights_.resize(static_cast<std::size_t>(k_count));
  if (!config.weights.empty()) {
    inst.weights_ = config.weights;
  } else {
    for (auto& w : inst.weights_) w = std::pow(10.0, rng_w.uniform(0.0, 3.0));
  }
  inst.weights_vec_.resize(k_count);
  for (int k = 0; k < k_count; ++k) inst.weights_vec_[k] = inst.weights_[static_cast<std::size_t>(k)];

  // Optimum inside the inner 80% of the box.
  const double margin = 0.1 * (config.upper - config.lower);
  inst.x_opt_.resize(eff_dim);
  for (int i = 0; i < eff_dim; ++i) {
    inst.x_opt_[i] = rng_xopt.uniform(config.lower + margin, config.upper - margin);
  }

  std::vector<int> permutation(static_cast<std::size_t>(eff_dim));
  for (int i = 0; i < eff_dim; ++i) permutation[static_cast<std::size_t>(i)] = i;
  rng_perm.shuffle(permutation);

  inst.chains_.resize(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    int dk = config.subproblem_dims[static_cast<std::size_t>(k)];
    auto& chain = inst.chains_[static_cast<std::size_t>(k)];
    Rng rng_local(derive_seed(config.seed, "local_permutation", static_cast<std::uint64_t>(k)));
    chain.permutation.resize(static_cast<std::size_t>(dk));
    for (int i = 0; i < dk; ++i) chain.permutation[static_cast<std::size_t>(i)] = i;
    rng_local.shuffle(chain.permutation);
    if (config.separability_degree >= 2) {
      Rng rng_rot(derive_seed(config.seed, "rotation", static_cast<std::uint64_t>(k)));
      chain.rotation = random_orthogonal(dk, rng_rot);
    }
  }
  assemble_groups_and_shifts(inst, permutation, inst.groups_, inst.chains_,
                             config, overlaps, inst.x_opt_);
  for (auto& chain : inst.chains_) {
    chain.validate();
    chain.prepare();
  }
  return inst;
}

VectorXd ProblemInstance::gather(int k, const VectorXd& x) const {
  const auto& g = groups_[static_cast<std::size_t>(k)];
  VectorXd out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[g[i]];
  return out;
}

void ProblemInstance::scatter(int k, const VectorXd& x_sub, VectorXd& x) const {
  const auto& g = groups_[static_cast<std::size_t>(k)];
  for (std::size_t i = 0; i < g.size(); ++i) x[g[i]] = x_sub[static_cast<Eigen::Index>(i)];
}

double ProblemInstance::evaluate_subproblem(int k, const VectorXd& x_sub) const {
  bool sat = false;
  double c = bench::eval_subproblem(function(k), chains_[static_cast<std::size_t>(k)], x_sub, &sat);
  if (sat) saturated_seen_.store(true, std::memory_order_relaxed);
  return c;
}

double ProblemInstance::evaluate(const VectorXd& x) const {
  if (static_cast<int>(x.size()) != effective_dim_) {
    throw std::invalid_argument("evaluate: expected dimension " +
                                std::to_string(effective_dim_) + ", got " +
                                std::to_string(x.size()));
  }
  bool oob = false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < config_.lower || x[i] > config_.upper) { oob = true; break; }
  }
  if (oob) oob_seen_.store(true, std::memory_order_relaxed);

  double total = 0.0;
  bool sat = false;
  for (int k = 0; k < subproblem_count(); ++k) {
    VectorXd x_sub = gather(k, x);
    total += weights_[static_cast<std::size_t>(k)] *
             bench::eval_subproblem(function(k), chains_[static_cast<std::size_t>(k)], x_sub, &sat);
  }
  if (!std::isfinite(total) || total > bench::kCostCeiling) {
    total = bench::kCostCeiling;
    sat = true;
  }
  if (sat) saturated_seen_.store(true, std::memory_order_relaxed);
  fe_count_.fetch_add(1, std::memory_order_relaxed);
  return total;
}

namespace {

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const json& arr, const std::string& field) {
  if (!arr.is_array()) throw ParseError("field '" + field + "' must be an array");
  VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError("field '" + field + "' has a non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

}  // namespace

std::string export_instance_json(const ProblemInstance& inst) {
  const auto& cfg = inst.config();
  json doc;
  doc["format"] = "hlsgo-instance";
  doc["version"] = 1;
  if (!inst.name().empty()) doc["name"] = inst.name();
  doc["seed"] = cfg.seed;
  doc["total_dim"] = cfg.total_dim;
  doc["effective_dim"] = inst.effective_dim();
  doc["degree"] = cfg.separability_degree;
  doc["bounds"] = {cfg.lower, cfg.upper};
  doc["dims"] = cfg.subproblem_dims;
  json fns = json::array();
  for (auto f : cfg.function_map) fns.push_back(static_cast<int>(f));
  doc["functions"] = fns;
  json w = json::array();
  for (int k = 0; k < inst.subproblem_count(); ++k) w.push_back(inst.weight(k));
  doc["weights"] = w;
  doc["overlaps"] = inst.overlap_counts();
  doc["x_opt"] = vector_to_json(inst.x_opt());

  // The global variable layout: position -> variable index, windows of it
  // form the groups.
  std::vector<int> permutation;
  permutation.reserve(static_cast<std::size_t>(inst.effective_dim()));
  for (int k = 0; k < inst.subproblem_count(); ++k) {
    const auto& g = inst.group(k);
    std::size_t skip = k == 0 ? 0 : static_cast<std::size_t>(inst.overlap_counts()[static_cast<std::size_t>(k - 1)]);
    for (std::size_t i = skip; i < g.size(); ++i) permutation.push_back(g[i]);
  }
  doc["permutation"] = permutation;

  json subs = json::array();
  for (int k = 0; k < inst.subproblem_count(); ++k) {
    const auto& chain = inst.chain(k);
    json s;
    s["local_permutation"] = chain.permutation;
    if (chain.has_rotation()) {
      json rows = json::array();
      for (int i = 0; i < chain.rotation.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < chain.rotation.cols(); ++j) row.push_back(chain.rotation(i, j));
        rows.push_back(std::move(row));
      }
      s["rotation"] = std::move(rows);
    } else {
      s["rotation"] = nullptr;
    }
    subs.push_back(std::move(s));
  }
  doc["subproblems"] = std::move(subs);
  return doc.dump();
}

ProblemInstance import_instance_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  auto need = [&](const char* field) -> const json& {
    if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
    return doc[field];
  };
  if (need("format").get<std::string>() != "hlsgo-instance") {
    throw ParseError("field 'format': not an instance document");
  }
  const int version = need("version").get<int>();
  if (version > 1) {
    throw ParseError("field 'version': document version " + std::to_string(version) +
                     " is newer than supported version 1");
  }

  InstanceConfig cfg;
  cfg.seed = need("seed").get<std::uint64_t>();
  cfg.total_dim = need("total_dim").get<int>();
  cfg.separability_degree = need("degree").get<int>();
  const auto& bounds = need("bounds");
  if (!bounds.is_array() || bounds.size() != 2) throw ParseError("field 'bounds' must be [lower, upper]");
  cfg.lower = bounds[0].get<double>();
  cfg.upper = bounds[1].get<double>();
  cfg.subproblem_dims = need("dims").get<std::vector<int>>();
  for (int id : need("functions").get<std::vector<int>>()) {
    try {
      cfg.function_map.push_back(bench::function_from_id(id));
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("field 'functions': ") + e.what());
    }
  }
  cfg.weights = need("weights").get<std::vector<double>>();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what());
  }
  const int k_count = cfg.subproblem_count();

  std::vector<int> overlaps = need("overlaps").get<std::vector<int>>();
  if (static_cast<int>(overlaps.size()) != std::max(0, k_count - 1)) {
    throw ParseError("field 'overlaps' must have K-1 entries");
  }
  std::vector<int> expected = adjacent_overlaps(cfg);
  if (overlaps != expected) {
    throw ParseError("field 'overlaps': counts inconsistent with the degree rule");
  }

  long long nominal = 0;
  for (int d : cfg.subproblem_dims) nominal += d;
  long long shared = 0;
  for (int o : overlaps) shared += o;
  const int eff_dim = static_cast<int>(nominal - shared);
  if (doc.contains("effective_dim") && doc["effective_dim"].get<int>() != eff_dim) {
    throw ParseError("field 'effective_dim': inconsistent with dims and overlaps");
  }

  ProblemInstance inst;
  inst.config_ = cfg;
  if (doc.contains("name")) inst.name_ = doc["name"].get<std::string>();
  inst.effective_dim_ = eff_dim;
  inst.overlap_counts_ = overlaps;
  inst.weights_ = cfg.weights;
  inst.weights_vec_.resize(k_count);
  for (int k = 0; k < k_count; ++k) inst.weights_vec_[k] = inst.weights_[static_cast<std::size_t>(k)];
  inst.x_opt_ = vector_from_json(need("x_opt"), "x_opt");
  if (static_cast<int>(inst.x_opt_.size()) != eff_dim) {
    throw ParseError("field 'x_opt' must have effective_dim entries");
  }

  std::vector<int> permutation = need("permutation").get<std::vector<int>>();
  if (static_cast<int>(permutation.size()) != eff_dim) {
    throw ParseError("field 'permutation' must have effective_dim entries");
  }
  std::vector<bool> seen(static_cast<std::size_t>(eff_dim), false);
  for (int p : permutation) {
    if (p < 0 || p >= eff_dim || seen[static_cast<std::size_t>(p)]) {
      throw ParseError("field 'permutation' is not a bijection");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }

  const auto& subs = need("subproblems");
  if (!subs.is_array() || static_cast<int>(subs.size()) != k_count) {
    throw ParseError("field 'subproblems' must have K entries");
  }
  inst.chains_.resize(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const auto& s = subs[static_cast<std::size_t>(k)];
    const int dk = cfg.subproblem_dims[static_cast<std::size_t>(k)];
    auto& chain = inst.chains_[static_cast<std::size_t>(k)];
    const std::string at = "subproblems[" + std::to_string(k) + "]";
    if (!s.contains("local_permutation")) throw ParseError("missing field '" + at + ".local_permutation'");
    chain.permutation = s["local_permutation"].get<std::vector<int>>();
    const bool has_rotation = s.contains("rotation") && !s["rotation"].is_null();
    if (cfg.separability_degree >= 2 && !has_rotation) {
      throw ParseError("field '" + at + ".rotation': required for degree >= 2");
    }
    if (cfg.separability_degree == 1 && has_rotation) {
      throw ParseError("field '" + at + ".rotation': must be absent for degree 1");
    }
    if (has_rotation) {
      const auto& rows = s["rotation"];
      if (!rows.is_array() || static_cast<int>(rows.size()) != dk) {
        throw ParseError("field '" + at + ".rotation' must have D_k rows");
      }
      chain.rotation.resize(dk, dk);
      for (int i = 0; i < dk; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != dk) {
          throw ParseError("field '" + at + ".rotation' row shape mismatch");
        }
        for (int j = 0; j < dk; ++j) chain.rotation(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
  }
  assemble_groups_and_shifts(inst, permutation, inst.groups_, inst.chains_,
                             cfg, overlaps, inst.x_opt_);
  for (int k = 0; k < k_count; ++k) {
    try {
      inst.chains_[static_cast<std::size_t>(k)].validate();
      inst.chains_[static_cast<std::size_t>(k)].prepare();
    } catch (const std::invalid_argument& e) {
      throw ParseError("subproblems[" + std::to_string(k) + "]: " + e.what());
    }
  }
  return inst;
}

void save_instance(const ProblemInstance& instance, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot open for writing: " + path);
  out << export_instance_json(instance) << "\n";
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot open instance document: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return import_instance_json(ss.str());
}

const std::vector<int>& he_function_mapping() {
  static const std::vector<int> phi = {6, 2, 3, 1, 6, 7, 6, 7, 3, 4, 2, 5, 3, 2};
  return phi;
}

std::vector<NamedConfig> appendix_b_preset(std::uint64_t seed, int scale) {
  if (scale < 1) throw ConfigError("scale must be >= 1");
  const std::vector<int> nominal = {25, 25, 50, 50, 50, 100, 100, 100,
                                    200, 200, 300, 300, 500, 1000};
  std::vector<int> dims;
  dims.reserve(nominal.size());
  int total = 0;
  for (int d : nominal) {
    int v = std::max(1, d / scale);
    dims.push_back(v);
    total += v;
  }

  auto make = [&](const std::string& name, const std::vector<int>& fns, int degree) {
    InstanceConfig cfg;
    cfg.total_dim = total;
    cfg.subproblem_dims = dims;
    for (int f : fns) cfg.function_map.push_back(bench::function_from_id(f));
    cfg.separability_degree = degree;
    cfg.seed = derive_seed(seed, "preset", fnv1a64(name.data(), name.size()));
    return NamedConfig{name, cfg};
  };

  std::vector<NamedConfig> out;
  const std::vector<int> ackley(nominal.size(), 4);
  const std::vector<int> sector(nominal.size(), 7);
  for (int deg = 1; deg <= 5; ++deg) {
    out.push_back(make("ackley_" + std::to_string(deg), ackley, deg));
  }
  for (int deg = 1; deg <= 5; ++deg) {
    out.push_back(make("attractive_sector_" + std::to_string(deg), sector, deg));
  }
  // He_1..He_5 follow the degree subscript; He_6..He_8 revisit the
  // overlapped degrees with fresh seeds.
  const std::vector<int> he_degrees = {1, 2, 3, 4, 5, 3, 4, 5};
  for (std::size_t i = 0; i < he_degrees.size(); ++i) {
    out.push_back(make("he_" + std::to_string(i + 1), he_function_mapping(),
                       he_degrees[i]));
  }
  return out;
}

}  // namespace hlsgo
