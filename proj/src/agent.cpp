#include "hlsgo/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hlsgo::agent {

TensorSet TensorSet::zeros(int pool_size) {
  const int in = 12 + 2 * pool_size;
  TensorSet t;
  t.w_embed = MatrixXd::Zero(kEmbedDim, in);
  t.b_embed = VectorXd::Zero(kEmbedDim);
  t.w_actor1 = MatrixXd::Zero(kHeadDim, kEmbedDim);
  t.b_actor1 = VectorXd::Zero(kHeadDim);
  t.w_actor2 = MatrixXd::Zero(pool_size, kHeadDim);
  t.b_actor2 = VectorXd::Zero(pool_size);
  t.w_critic1 = MatrixXd::Zero(kHeadDim, kEmbedDim);
  t.b_critic1 = VectorXd::Zero(kHeadDim);
  t.w_critic2 = MatrixXd::Zero(1, kHeadDim);
  t.b_critic2 = VectorXd::Zero(1);
  return t;
}

std::array<MatrixXd*, 5> TensorSet::matrices() {
  return {&w_embed, &w_actor1, &w_actor2, &w_critic1, &w_critic2};
}
std::array<const MatrixXd*, 5> TensorSet::matrices() const {
  return {&w_embed, &w_actor1, &w_actor2, &w_critic1, &w_critic2};
}
std::array<VectorXd*, 5> TensorSet::vectors() {
  return {&b_embed, &b_actor1, &b_actor2, &b_critic1, &b_critic2};
}
std::array<const VectorXd*, 5> TensorSet::vectors() const {
  return {&b_embed, &b_actor1, &b_actor2, &b_critic1, &b_critic2};
}

std::size_t TensorSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto* m : matrices()) n += static_cast<std::size_t>(m->size());
  for (const auto* v : vectors()) n += static_cast<std::size_t>(v->size());
  return n;
}

VectorXd TensorSet::flatten() const {
  VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const auto* m : matrices()) {
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) flat[pos++] = (*m)(i, j);
  }
  for (const auto* v : vectors()) {
    for (Eigen::Index i = 0; i < v->size(); ++i) flat[pos++] = (*v)[i];
  }
  return flat;
}

void TensorSet::unflatten(const VectorXd& flat) {
  Eigen::Index pos = 0;
  for (auto* m : matrices()) {
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = flat[pos++];
  }
  for (auto* v : vectors()) {
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = flat[pos++];
  }
}

double TensorSet::squared_norm() const {
  double total = 0.0;
  for (const auto* m : matrices()) total += m->squaredNorm();
  for (const auto* v : vectors()) total += v->squaredNorm();
  return total;
}

void TensorSet::scale(double factor) {
  for (auto* m : matrices()) *m *= factor;
  for (auto* v : vectors()) *v *= factor;
}

bool TensorSet::all_finite() const {
  for (const auto* m : matrices()) {
    if (!m->allFinite()) return false;
  }
  for (const auto* v : vectors()) {
    if (!v->allFinite()) return false;
  }
  return true;
}

namespace {

MatrixXd orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  MatrixXd g(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = MatrixXd(qr.householderQ()).leftCols(small);
  MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  MatrixXd out = rows >= cols ? q : MatrixXd(q.transpose());
  return gain * out;
}

}  // namespace

AgentParameters AgentParameters::init(int pool_size, int high_count,
                                      std::uint64_t seed) {
  if (pool_size < 2) throw std::invalid_argument("agent: pool size must be >= 2");
  if (high_count < 1 || high_count >= pool_size) {
    throw std::invalid_argument("agent: high tier must hold 1..L-1 optimizers");
  }
  AgentParameters params;
  params.pool_size = pool_size;
  params.high_count = high_count;
  params.tensors = TensorSet::zeros(pool_size);
  Rng rng(derive_seed(seed, "agent_init"));
  params.tensors.w_embed = orthogonal_init(kEmbedDim, params.input_dim(), 1.0, rng);
  params.tensors.w_actor1 = orthogonal_init(kHeadDim, kEmbedDim, 1.0, rng);
  params.tensors.w_actor2 = orthogonal_init(pool_size, kHeadDim, 0.01, rng);
  params.tensors.w_critic1 = orthogonal_init(kHeadDim, kEmbedDim, 1.0, rng);
  params.tensors.w_critic2 = orthogonal_init(1, kHeadDim, 1.0, rng);
  return params;
}

VectorXd action_mask(double s_dim, int pool_size, int high_count) {
  VectorXd mask = VectorXd::Zero(pool_size);
  if (s_dim > 0.5) {
    for (int l = high_count; l < pool_size; ++l) mask[l] = kMaskSurrogate;
  }
  return mask;
}

ForwardResult forward(const AgentParameters& params, const VectorXd& state,
                      const VectorXd& mask) {
  if (state.size() != params.input_dim()) {
    throw std::invalid_argument("forward: state dimension mismatch");
  }
  if (mask.size() != params.pool_size) {
    throw std::invalid_argument("forward: mask dimension mismatch");
  }
  const TensorSet& t = params.tensors;
  ForwardResult r;
  r.embedding = (t.w_embed * state + t.b_embed).array().tanh();
  r.h_actor = (t.w_actor1 * r.embedding + t.b_actor1).array().tanh();
  r.logits = t.w_actor2 * r.h_actor + t.b_actor2;

  VectorXd masked = r.logits + mask;
  const double top = masked.maxCoeff();
  VectorXd expd = (masked.array() - top).exp();
  // surrogate-masked entries are forced to exactly zero, then renormalized
  for (int l = 0; l < params.pool_size; ++l) {
    if (mask[l] != 0.0) expd[l] = 0.0;
  }
  r.policy = expd / expd.sum();

  r.h_critic = (t.w_critic1 * r.embedding + t.b_critic1).array().tanh();
  r.value = (t.w_critic2 * r.h_critic + t.b_critic2)(0);
  return r;
}

ActionSample sample_action(const AgentParameters& params, const VectorXd& state,
                           const VectorXd& mask, Rng& rng, bool greedy) {
  ForwardResult fwd = forward(params, state, mask);
  ActionSample out;
  out.value = fwd.value;
  if (greedy) {
    int best = -1;
    double best_p = -1.0;
    for (int l = 0; l < params.pool_size; ++l) {
      if (fwd.policy[l] > best_p) {
        best_p = fwd.policy[l];
        best = l;
      }
    }
    out.action = best;
  } else {
    const double u = rng.uniform01();
    double acc = 0.0;
    int last_unmasked = -1;
    out.action = -1;
    for (int l = 0; l < params.pool_size; ++l) {
      if (fwd.policy[l] <= 0.0) continue;
      last_unmasked = l;
      acc += fwd.policy[l];
      if (u < acc) {
        out.action = l;
        break;
      }
    }
    if (out.action < 0) out.action = last_unmasked;  // rounding tail
  }
  if (out.action < 0 || fwd.policy[out.action] <= 0.0) {
    throw std::logic_error("sample_action: no unmasked action available");
  }
  out.log_prob = std::log(fwd.policy[out.action]);
  return out;
}

double policy_entropy(const VectorXd& policy) {
  double h = 0.0;
  for (Eigen::Index l = 0; l < policy.size(); ++l) {
    if (policy[l] > 0.0) h -= policy[l] * std::log(policy[l]);
  }
  return h;
}

namespace {

struct SampleLoss {
  double policy_loss, value_loss, entropy;
  double d_logit_coeff;  // d loss / d log pi(a)
  double d_value;        // d loss / d V
  double entropy_coef;
};

SampleLoss sample_loss_terms(const ForwardResult& fwd, const PpoSample& s,
                             const PpoHyper& hyper) {
  SampleLoss out{};
  const double log_prob = std::log(fwd.policy[s.action]);
  const double ratio = std::exp(log_prob - s.old_log_prob);
  const double surr1 = ratio * s.advantage;
  const double clipped = std::clamp(ratio, 1.0 - hyper.clip_epsilon, 1.0 + hyper.clip_epsilon);
  const double surr2 = clipped * s.advantage;
  out.policy_loss = -std::min(surr1, surr2);
  // gradient flows only through the unclipped branch of the min
  out.d_logit_coeff = surr1 <= surr2 ? -ratio * s.advantage : 0.0;

  const double v = fwd.value;
  const double v_clip = s.old_value + std::clamp(v - s.old_value, -hyper.clip_epsilon,
                                                 hyper.clip_epsilon);
  const double err = v - s.ret;
  const double err_clip = v_clip - s.ret;
  if (err * err >= err_clip * err_clip) {
    out.value_loss = err * err;
    out.d_value = 2.0 * err;
  } else {
    out.value_loss = err_clip * err_clip;
    const bool pass_through = std::abs(v - s.old_value) < hyper.clip_epsilon;
    out.d_value = pass_through ? 2.0 * err_clip : 0.0;
  }
  out.d_value *= hyper.value_coef;
  out.entropy = policy_entropy(fwd.policy);
  out.entropy_coef = hyper.entropy_coef;
  return out;
}

}  // namespace

GradResult gradients(const AgentParameters& params, std::span<const PpoSample> batch,
                     const PpoHyper& hyper) {
  if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
  const TensorSet& t = params.tensors;
  GradResult result;
  result.gradients = TensorSet::zeros(params.pool_size);
  TensorSet& g = result.gradients;

  for (std::size_t idx = 0; idx < batch.size(); ++idx) {
    const PpoSample& s = batch[idx];
    ForwardResult fwd = forward(params, s.state, s.mask);
    SampleLoss loss = sample_loss_terms(fwd, s, hyper);

    const double sample_total =
        loss.policy_loss + hyper.value_coef * loss.value_loss -
        hyper.entropy_coef * loss.entropy;
    if (!std::isfinite(sample_total)) {
      throw std::runtime_error("gradients: non-finite loss at batch index " +
                               std::to_string(idx));
    }
    result.stats.policy_loss += loss.policy_loss;
    result.stats.value_loss += loss.value_loss;
    result.stats.entropy += loss.entropy;
    result.stats.total += sample_total;

    // d loss / d logits: the log-prob path plus the entropy bonus; masked
    // entries hold zero probability and receive zero gradient.
    VectorXd d_logits(params.pool_size);
    for (int l = 0; l < params.pool_size; ++l) {
      const double p = fwd.policy[l];
      const double dlp = (l == s.action ? 1.0 : 0.0) - p;
      double d_entropy = 0.0;
      if (p > 0.0) d_entropy = -p * (std::log(p) + loss.entropy);
      d_logits[l] = loss.d_logit_coeff * dlp - loss.entropy_coef * d_entropy;
    }

    // actor head
    g.w_actor2 += d_logits * fwd.h_actor.transpose();
    g.b_actor2 += d_logits;
    VectorXd d_ha = t.w_actor2.transpose() * d_logits;
    VectorXd d_pre_a =
        d_ha.cwiseProduct((1.0 - fwd.h_actor.array().square()).matrix());
    g.w_actor1 += d_pre_a * fwd.embedding.transpose();
    g.b_actor1 += d_pre_a;

    // critic head
    VectorXd d_hc = t.w_critic2.transpose() * VectorXd::Constant(1, loss.d_value);
    g.w_critic2 += loss.d_value * fwd.h_critic.transpose();
    g.b_critic2[0] += loss.d_value;
    VectorXd d_pre_c =
        d_hc.cwiseProduct((1.0 - fwd.h_critic.array().square()).matrix());
    g.w_critic1 += d_pre_c * fwd.embedding.transpose();
    g.b_critic1 += d_pre_c;

    // shared embedding
    VectorXd d_embed =
        t.w_actor1.transpose() * d_pre_a + t.w_critic1.transpose() * d_pre_c;
    VectorXd d_pre_e =
        d_embed.cwiseProduct((1.0 - fwd.embedding.array().square()).matrix());
    g.w_embed += d_pre_e * s.state.transpose();
    g.b_embed += d_pre_e;
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  g.scale(inv);
  result.stats.policy_loss *= inv;
  result.stats.value_loss *= inv;
  result.stats.entropy *= inv;
  result.stats.total *= inv;
  return result;
}

double batch_loss(const AgentParameters& params, std::span<const PpoSample> batch,
                  const PpoHyper& hyper) {
  double total = 0.0;
  for (const PpoSample& s : batch) {
    ForwardResult fwd = forward(params, s.state, s.mask);
    SampleLoss loss = sample_loss_terms(fwd, s, hyper);
    total += loss.policy_loss + hyper.value_coef * loss.value_loss -
             hyper.entropy_coef * loss.entropy;
  }
  return total / static_cast<double>(batch.size());
}

AdamOptimizer::AdamOptimizer(int pool_size, double beta1, double beta2,
                             double epsilon)
    : m_(TensorSet::zeros(pool_size)),
      v_(TensorSet::zeros(pool_size)),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {}

void AdamOptimizer::apply(AgentParameters& params, const TensorSet& gradients,
                          double lr) {
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = (beta2_ * v.array() + (1.0 - beta2_) * grad.array().square()).matrix();
    auto m_hat = m.array() / correction1;
    auto v_hat = v.array() / correction2;
    param.array() -= lr * m_hat / (v_hat.sqrt() + epsilon_);
  };

  auto pm = params.tensors.matrices();
  auto mm = m_.matrices();
  auto vm = v_.matrices();
  auto gm = gradients.matrices();
  for (std::size_t i = 0; i < pm.size(); ++i) update(*pm[i], *mm[i], *vm[i], *gm[i]);
  auto pv = params.tensors.vectors();
  auto mv = m_.vectors();
  auto vv = v_.vectors();
  auto gv = gradients.vectors();
  for (std::size_t i = 0; i < pv.size(); ++i) update(*pv[i], *mv[i], *vv[i], *gv[i]);
}

double clip_gradient_norm(TensorSet& gradients, double max_norm) {
  const double norm = std::sqrt(gradients.squared_norm());
  if (norm > max_norm && norm > 0.0) gradients.scale(max_norm / norm);
  return norm;
}

namespace {
constexpr char kCheckpointMagic[8] = {'H', 'L', 'S', 'A', 'G', 'T', '0', '1'};
}

void save_checkpoint(const AgentParameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, 8);
  auto write_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  write_u32(1);  // version
  write_u32(static_cast<std::uint32_t>(params.pool_size));
  write_u32(static_cast<std::uint32_t>(params.high_count));
  write_u32(static_cast<std::uint32_t>(params.input_dim()));
  auto write_matrix = [&](const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  };
  for (const auto* m : params.tensors.matrices()) write_matrix(*m);
  for (const auto* v : params.tensors.vectors()) write_matrix(*v);
  if (!out.good()) throw CheckpointError("write failure: " + path);
}

AgentParameters load_checkpoint(const std::string& path, int expected_pool_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in.good() || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not an agent checkpoint: " + path);
  }
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint32_t version = read_u32();
  if (version != 1) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const int pool_size = static_cast<int>(read_u32());
  const int high_count = static_cast<int>(read_u32());
  const int input_dim = static_cast<int>(read_u32());
  if (expected_pool_size >= 0 && pool_size != expected_pool_size) {
    throw CheckpointError("checkpoint pool size " + std::to_string(pool_size) +
                          " does not match configured pool size " +
                          std::to_string(expected_pool_size));
  }
  AgentParameters params;
  params.pool_size = pool_size;
  params.high_count = high_count;
  params.tensors = TensorSet::zeros(pool_size);
  if (input_dim != params.input_dim()) {
    throw CheckpointError("checkpoint input dimension mismatch");
  }
  auto read_matrix = [&](MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        m(i, j) = v;
      }
    }
  };
  for (auto* m : params.tensors.matrices()) read_matrix(*m);
  VectorXd tmp;
  for (auto* v : params.tensors.vectors()) {
    MatrixXd col(v->size(), 1);
    read_matrix(col);
    *v = col.col(0);
  }
  if (!in.good()) throw CheckpointError("truncated checkpoint: " + path);
  return params;
}

}  // namespace hlsgo::agent
