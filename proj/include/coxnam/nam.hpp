#pragma once

// Neural additive model: one scalar-in/scalar-out feed-forward subnetwork per
// feature, summed into a log-risk psi(x). Three output heads:
//   base      psi = sum_k g_k(x_k) + b
//   lasso     psi = sum_k beta_k g_k(x_k) + b                 (+ lambda |beta|_1)
//   shortcut  psi = sum_k [a_k g_k(x_k) + (1 - a_k) w_k x_k] + b
//                                            (+ lambda |a|_1 + mu |W|_2^2)
// Training minimises sum_i v_i sum_j (Phi_ij - psi(x_i))^2 tau_j plus the
// head's penalty with Adam.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "coxnam/errors.hpp"

namespace coxnam {

enum class Variant { base, lasso, shortcut };
enum class Activation { relu, tanh };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::base:
      return "base";
    case Variant::lasso:
      return "lasso";
    case Variant::shortcut:
      return "shortcut";
  }
  return "base";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "lasso") return Variant::lasso;
  if (s == "shortcut") return Variant::shortcut;
  throw UsageError("unknown variant '" + s + "' (base|lasso|shortcut)");
}

inline const char* to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw UsageError("unknown activation '" + s + "' (relu|tanh)");
}

struct NamConfig {
  std::vector<int> hidden_sizes{64, 32};
  Activation activation = Activation::relu;
  double learning_rate = 1e-3;
  int epochs = 1000;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  Variant variant = Variant::base;

  void validate() const {
    if (hidden_sizes.empty()) throw UsageError("hidden sizes must be nonempty");
    for (int h : hidden_sizes) {
      if (h < 1) throw UsageError("hidden sizes must be positive");
    }
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
    if (epochs < 1) throw UsageError("epochs must be positive");
    if (batch_size < 0) throw UsageError("batch size must be >= 0");
  }
};

// Regression targets for one explanation run. phi is row-major N x (s+1).
struct TargetBatch {
  std::vector<std::vector<double>> points;
  std::vector<double> phi;
  std::vector<double> tau;
  std::vector<double> weights;
  double epsilon = 1e-5;

  std::size_t rows() const { return points.size(); }
  std::size_t cols() const { return tau.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return phi[i * tau.size() + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {phi.data() + i * tau.size(), tau.size()};
  }

  void validate(std::size_t m) const {
    if (points.empty()) throw DataError("target batch is empty");
    if (tau.empty()) throw DataError("target batch has no intervals");
    if (phi.size() != points.size() * tau.size()) {
      throw AlignmentError("target matrix shape does not match point count");
    }
    if (weights.size() != points.size()) {
      throw AlignmentError("one weight per point is required");
    }
    for (const auto& x : points) {
      if (x.size() != m) throw DataError("target point has wrong dimension");
      for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("non-finite target point");
      }
    }
    for (double v : phi) {
      if (!std::isfinite(v)) throw NumericError("non-finite target value");
    }
    for (double t : tau) {
      if (!std::isfinite(t) || !(t > 0.0)) {
        throw NumericError("interval widths must be positive");
      }
    }
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        throw NumericError("weights must be finite and nonnegative");
      }
    }
  }
};

struct ShapeValues {
  std::vector<double> g;
  double psi = 0.0;
};

class NamModel {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weights = 0;  // offset of out x in row-major weights
    std::size_t biases = 0;   // offset of out biases
  };

  NamModel() = default;

  NamModel(std::size_t m, NamConfig config) : m_(m), config_(std::move(config)) {
    config_.validate();
    if (m_ == 0) throw UsageError("model needs at least one feature");
    std::size_t offset = 0;
    subnets_.resize(m_);
    for (auto& layers : subnets_) {
      std::size_t in = 1;
      std::vector<int> widths = config_.hidden_sizes;
      widths.push_back(1);
      for (int w : widths) {
        Layer l;
        l.in = in;
        l.out = static_cast<std::size_t>(w);
        l.weights = offset;
        offset += l.in * l.out;
        l.biases = offset;
        offset += l.out;
        layers.push_back(l);
        in = l.out;
      }
    }
    network_size_ = offset;
    bias_ = offset++;
    if (config_.variant == Variant::lasso) {
      beta_ = offset;
      offset += m_;
    } else if (config_.variant == Variant::shortcut) {
      alpha_ = offset;
      offset += m_;
      omega_ = offset;
      offset += m_;
    }
    params_.assign(offset, 0.0);
  }

  std::size_t num_features() const { return m_; }
  const NamConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Subnetwork parameters occupy [0, network_size()).
  std::size_t network_size() const { return network_size_; }
  const std::vector<Layer>& layers(std::size_t k) const { return subnets_[k]; }

  double& bias() { return params_[bias_]; }
  double bias() const { return params_[bias_]; }

  std::size_t bias_index() const { return bias_; }
  std::optional<std::size_t> beta_offset() const { return beta_; }
  std::optional<std::size_t> alpha_offset() const { return alpha_; }
  std::optional<std::size_t> omega_offset() const { return omega_; }

  double beta(std::size_t k) const { return beta_ ? params_[*beta_ + k] : 1.0; }
  double alpha(std::size_t k) const {
    return alpha_ ? std::clamp(params_[*alpha_ + k], 0.0, 1.0) : 1.0;
  }
  double omega(std::size_t k) const {
    return omega_ ? params_[*omega_ + k] : 0.0;
  }
  void set_beta(std::size_t k, double v) { params_.at(beta_.value() + k) = v; }
  void set_alpha(std::size_t k, double v) {
    params_.at(alpha_.value() + k) = v;
  }
  void set_omega(std::size_t k, double v) {
    params_.at(omega_.value() + k) = v;
  }

  // Scalar output of subnetwork k.
  double subnet(std::size_t k, double xk) const {
    thread_local std::vector<double> a, b;
    a.assign(1, xk);
    const auto& ls = subnets_[k];
    for (std::size_t li = 0; li < ls.size(); ++li) {
      const Layer& l = ls[li];
      b.assign(l.out, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        double z = params_[l.biases + o];
        const double* w = params_.data() + l.weights + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) z += w[i] * a[i];
        b[o] = li + 1 < ls.size() ? activate(z) : z;
      }
      std::swap(a, b);
    }
    return a[0];
  }

  // Variant-specific contribution of feature k, excluding the global bias.
  double contribution(std::size_t k, double xk, double gk) const {
    switch (config_.variant) {
      case Variant::base:
        return gk;
      case Variant::lasso:
        return beta(k) * gk;
      case Variant::shortcut:
        return alpha(k) * gk + (1.0 - alpha(k)) * omega(k) * xk;
    }
    return gk;
  }

  double contribution(std::size_t k, double xk) const {
    return contribution(k, xk, subnet(k, xk));
  }

  ShapeValues forward(std::span<const double> x) const {
    if (x.size() != m_) {
      throw DataError("input has " + std::to_string(x.size()) +
                      " features, model expects " + std::to_string(m_));
    }
    ShapeValues out;
    out.g.resize(m_);
    out.psi = bias();
    for (std::size_t k = 0; k < m_; ++k) {
      out.g[k] = subnet(k, x[k]);
      out.psi += contribution(k, x[k], out.g[k]);
    }
    return out;
  }

  double psi(std::span<const double> x) const { return forward(x).psi; }

  double activate(double z) const {
    return config_.activation == Activation::relu ? std::max(z, 0.0)
                                                  : std::tanh(z);
  }
  // Derivative expressed through the activation output.
  double activate_grad(double z, double a) const {
    return config_.activation == Activation::relu ? (z > 0.0 ? 1.0 : 0.0)
                                                  : 1.0 - a * a;
  }

 private:
  std::size_t m_ = 0;
  NamConfig config_;
  std::vector<std::vector<Layer>> subnets_;
  std::vector<double> params_;
  std::size_t network_size_ = 0;
  std::size_t bias_ = 0;
  std::optional<std::size_t> beta_, alpha_, omega_;
};

inline constexpr double kOutputInitScale = 0.1;

inline NamModel init_model(std::size_t m, const NamConfig& config) {
  NamModel model(m, config);
  std::mt19937_64 rng(config.seed);
  auto params = model.params();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& ls = model.layers(k);
    for (std::size_t li = 0; li < ls.size(); ++li) {
      const auto& l = ls[li];
      // Output layers start small so the initial shape functions are close
      // to flat.
      const double scale = std::sqrt(6.0 / static_cast<double>(l.in)) *
                           (li + 1 == ls.size() ? kOutputInitScale : 1.0);
      std::uniform_real_distribution<double> u(-scale, scale);
      for (std::size_t i = 0; i < l.in * l.out; ++i) {
        params[l.weights + i] = u(rng);
      }
      // Spread first-layer kinks across the standardized input range.
      for (std::size_t o = 0; o < l.out; ++o) {
        params[l.biases + o] = li == 0 ? u(rng) : 0.0;
      }
    }
  }
  model.bias() = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (model.beta_offset()) model.set_beta(k, 1.0);
    if (model.alpha_offset()) {
      model.set_alpha(k, 0.5);
      model.set_omega(k, 0.0);
    }
  }
  return model;
}

struct Regularization {
  double lambda = 0.0;
  double mu = 0.0;
};

// Per-row reduction of the target matrix. Because
//   sum_j tau_j (Phi_ij - psi)^2 = A (psi - psi*_i)^2 + R_i
// with A = sum_j tau_j, psi*_i the tau-weighted row mean and R_i the
// residual spread, the loss only needs (psi*_i, R_i) per row.
struct TargetSummary {
  double tau_sum = 0.0;
  std::vector<double> psi_star;
  std::vector<double> spread;

  explicit TargetSummary(const TargetBatch& batch) {
    for (double t : batch.tau) tau_sum += t;
    psi_star.resize(batch.rows());
    spread.resize(batch.rows());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      const auto row = batch.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) acc += batch.tau[j] * row[j];
      const double mean = acc / tau_sum;
      double r = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double d = row[j] - mean;
        r += batch.tau[j] * d * d;
      }
      psi_star[i] = mean;
      spread[i] = r;
    }
  }
};

namespace detail {

// Activations of one subnetwork over a batch, layer-major: act[l] holds
// out_l x n values.
struct SubnetPass {
  std::size_t n = 0;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> act;
};

inline void subnet_forward(const NamModel& model, std::size_t k,
                           std::span<const double> xk, SubnetPass& pass) {
  const auto& ls = model.layers(k);
  const auto params = model.params();
  const std::size_t n = xk.size();
  pass.n = n;
  pass.pre.resize(ls.size());
  pass.act.resize(ls.size() + 1);
  pass.act[0].assign(xk.begin(), xk.end());
  for (std::size_t li = 0; li < ls.size(); ++li) {
    const auto& l = ls[li];
    auto& z = pass.pre[li];
    z.assign(l.out * n, 0.0);
    const auto& a = pass.act[li];
    for (std::size_t o = 0; o < l.out; ++o) {
      double* zo = z.data() + o * n;
      const double b = params[l.biases + o];
      for (std::size_t r = 0; r < n; ++r) zo[r] = b;
      const double* w = params.data() + l.weights + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        const double wi = w[i];
        const double* ai = a.data() + i * n;
        for (std::size_t r = 0; r < n; ++r) zo[r] += wi * ai[r];
      }
    }
    auto& out = pass.act[li + 1];
    if (li + 1 < ls.size()) {
      out.resize(z.size());
      for (std::size_t q = 0; q < z.size(); ++q) out[q] = model.activate(z[q]);
    } else {
      out = z;
    }
  }
}

// Accumulates sum_r upstream[r] * d g_k(x_r) / d theta into grad.
inline void subnet_backward(const NamModel& model, std::size_t k,
                            const SubnetPass& pass,
                            std::span<const double> upstream,
                            std::span<double> grad) {
  const auto& ls = model.layers(k);
  const auto params = model.params();
  const std::size_t n = pass.n;
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> next;
  for (std::size_t li = ls.size(); li-- > 0;) {
    const auto& l = ls[li];
    if (li + 1 < ls.size()) {
      const auto& z = pass.pre[li];
      const auto& a = pass.act[li + 1];
      for (std::size_t q = 0; q < delta.size(); ++q) {
        delta[q] *= model.activate_grad(z[q], a[q]);
      }
    }
    const auto& a = pass.act[li];
    const bool need_next = li > 0;
    if (need_next) next.assign(l.in * n, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* d = delta.data() + o * n;
      double bsum = 0.0;
      for (std::size_t r = 0; r < n; ++r) bsum += d[r];
      grad[l.biases + o] += bsum;
      const double* w = params.data() + l.weights + o * l.in;
      double* gw = grad.data() + l.weights + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        const double* ai = a.data() + i * n;
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += d[r] * ai[r];
        gw[i] += acc;
        if (need_next) {
          const double wi = w[i];
          double* ni = next.data() + i * n;
          for (std::size_t r = 0; r < n; ++r) ni[r] += wi * d[r];
        }
      }
    }
    if (need_next) std::swap(delta, next);
  }
}

inline double l1_subgradient(double v) {
  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

}  // namespace detail

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Loss and exact gradient over the rows listed in `subset` (all rows when
// empty). The L1 terms use subgradient 0 at the kink.
inline LossAndGradient loss_and_gradient(
    const NamModel& model, const TargetBatch& batch,
    const TargetSummary& summary, Regularization reg,
    std::span<const std::size_t> subset = {}) {
  if (!std::isfinite(reg.lambda) || reg.lambda < 0.0 ||
      !std::isfinite(reg.mu) || reg.mu < 0.0) {
    throw NumericError("regularization strengths must be finite and >= 0");
  }
  const std::size_t m = model.num_features();
  const std::size_t n = subset.empty() ? batch.rows() : subset.size();
  auto row_of = [&](std::size_t r) { return subset.empty() ? r : subset[r]; };
  for (std::size_t r = 0; r < n; ++r) {
    if (batch.points[row_of(r)].size() != m) {
      throw DataError("target point has wrong dimension");
    }
  }

  LossAndGradient out;
  out.gradient.assign(model.params().size(), 0.0);
  auto& grad = out.gradient;
  const auto params = model.params();

  std::vector<detail::SubnetPass> passes(m);
  std::vector<std::vector<double>> xs(m, std::vector<double>(n));
  std::vector<double> psi(n, model.bias());
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t r = 0; r < n; ++r) xs[k][r] = batch.points[row_of(r)][k];
    detail::subnet_forward(model, k, xs[k], passes[k]);
    const auto& g = passes[k].act.back();
    for (std::size_t r = 0; r < n; ++r) {
      psi[r] += model.contribution(k, xs[k][r], g[r]);
    }
  }

  std::vector<double> dpsi(n);
  double bias_grad = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = row_of(r);
    const double v = batch.weights[i];
    const double d = psi[r] - summary.psi_star[i];
    out.loss += v * (summary.tau_sum * d * d + summary.spread[i]);
    dpsi[r] = 2.0 * v * summary.tau_sum * d;
    bias_grad += dpsi[r];
  }
  grad[model.bias_index()] += bias_grad;

  std::vector<double> upstream(n);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& g = passes[k].act.back();
    const auto& x = xs[k];
    double scale = 1.0;
    switch (model.variant()) {
      case Variant::base:
        break;
      case Variant::lasso: {
        scale = model.beta(k);
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += dpsi[r] * g[r];
        grad[*model.beta_offset() + k] += acc;
        break;
      }
      case Variant::shortcut: {
        scale = model.alpha(k);
        double da = 0.0, dw = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          da += dpsi[r] * (g[r] - model.omega(k) * x[r]);
          dw += dpsi[r] * x[r];
        }
        grad[*model.alpha_offset() + k] += da;
        grad[*model.omega_offset() + k] += (1.0 - model.alpha(k)) * dw;
        break;
      }
    }
    for (std::size_t r = 0; r < n; ++r) upstream[r] = dpsi[r] * scale;
    detail::subnet_backward(model, k, passes[k], upstream, grad);
  }

  if (model.variant() == Variant::lasso) {
    for (std::size_t k = 0; k < m; ++k) {
      const double b = params[*model.beta_offset() + k];
      out.loss += reg.lambda * std::abs(b);
      grad[*model.beta_offset() + k] += reg.lambda * detail::l1_subgradient(b);
    }
  }
  if (model.variant() == Variant::shortcut) {
    for (std::size_t k = 0; k < m; ++k) {
      const double a = params[*model.alpha_offset() + k];
      out.loss += reg.lambda * std::abs(a);
      grad[*model.alpha_offset() + k] +=
          reg.lambda * detail::l1_subgradient(a);
    }
    for (std::size_t p = 0; p < model.network_size(); ++p) {
      out.loss += reg.mu * params[p] * params[p];
      grad[p] += 2.0 * reg.mu * params[p];
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("loss is not finite");
  for (double gv : grad) {
    if (!std::isfinite(gv)) throw NumericError("gradient is not finite");
  }
  return out;
}

inline LossAndGradient loss_and_gradient(const NamModel& model,
                                         const TargetBatch& batch,
                                         Regularization reg) {
  batch.validate(model.num_features());
  return loss_and_gradient(model, batch, TargetSummary(batch), reg);
}

inline double loss_value(const NamModel& model, const TargetBatch& batch,
                         Regularization reg) {
  return loss_and_gradient(model, batch, reg).loss;
}

class TrainingDivergedError : public NumericError {
 public:
  TrainingDivergedError(const std::string& what, std::vector<double> trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

struct TrainResult {
  NamModel model;
  std::vector<double> loss_trace;  // full-batch loss before each epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Adam on the full objective. The global bias is first set to its exact
// minimiser given the initial subnetworks. Returns the parameters with the
// lowest full-batch loss seen, so final_loss <= initial_loss.
inline TrainResult train(NamModel model, const TargetBatch& batch,
                         Regularization reg) {
  const NamConfig& config = model.config();
  batch.validate(model.num_features());
  const std::size_t n = batch.rows();

  const TargetSummary summary(batch);

  TrainResult result;
  result.initial_loss = loss_and_gradient(model, batch, summary, reg).loss;

  {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double psi_wo_bias = model.psi(batch.points[i]) - model.bias();
      num += batch.weights[i] * (summary.psi_star[i] - psi_wo_bias);
      den += batch.weights[i];
    }
    if (den > 0.0) model.bias() = num / den;
  }

  const std::size_t np = model.params().size();
  std::vector<double> m1(np, 0.0), m2(np, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double pow1 = 1.0, pow2 = 1.0;

  std::vector<double> best = std::vector<double>(model.params().begin(),
                                                 model.params().end());
  double best_loss = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = config.batch_size <= 0
                             ? n
                             : std::min<std::size_t>(n, config.batch_size);

  auto adam_step = [&](const std::vector<double>& grad) {
    pow1 *= kBeta1;
    pow2 *= kBeta2;
    auto p = model.params();
    for (std::size_t q = 0; q < np; ++q) {
      m1[q] = kBeta1 * m1[q] + (1.0 - kBeta1) * grad[q];
      m2[q] = kBeta2 * m2[q] + (1.0 - kBeta2) * grad[q] * grad[q];
      const double mhat = m1[q] / (1.0 - pow1);
      const double vhat = m2[q] / (1.0 - pow2);
      p[q] -= config.learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
    if (auto a = model.alpha_offset()) {
      for (std::size_t k = 0; k < model.num_features(); ++k) {
        p[*a + k] = std::clamp(p[*a + k], 0.0, 1.0);
      }
    }
  };

  result.loss_trace.reserve(static_cast<std::size_t>(config.epochs) + 1);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    LossAndGradient full;
    try {
      full = loss_and_gradient(model, batch, summary, reg);
    } catch (const NumericError&) {
      throw TrainingDivergedError(
          "training diverged at epoch " + std::to_string(epoch),
          result.loss_trace);
    }
    result.loss_trace.push_back(full.loss);
    if (full.loss < best_loss) {
      best_loss = full.loss;
      std::copy(model.params().begin(), model.params().end(), best.begin());
    }
    if (bs >= n) {
      adam_step(full.gradient);
    } else {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += bs) {
        const std::size_t end = std::min(n, start + bs);
        std::span<const std::size_t> sub(order.data() + start, end - start);
        adam_step(loss_and_gradient(model, batch, summary, reg, sub).gradient);
      }
    }
  }
  double last = 0.0;
  try {
    last = loss_and_gradient(model, batch, summary, reg).loss;
  } catch (const NumericError&) {
    throw TrainingDivergedError("training diverged after the final epoch",
                                result.loss_trace);
  }
  result.loss_trace.push_back(last);
  if (last < best_loss) {
    best_loss = last;
    std::copy(model.params().begin(), model.params().end(), best.begin());
  }
  std::copy(best.begin(), best.end(), model.params().begin());
  result.final_loss = best_loss;
  result.model = std::move(model);
  return result;
}

struct ShapeCurve {
  std::size_t feature = 0;
  std::vector<double> x;
  std::vector<double> contribution;
  double offset = 0.0;    // subtracted mean over the reference points
  bool centered = false;  // false when no reference points were given
};

inline ShapeCurve shape_curve(const NamModel& model, std::size_t k,
                              std::span<const double> grid,
                              std::span<const double> reference) {
  if (k >= model.num_features()) throw DataError("feature index out of range");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw DataError("shape curve grid must be sorted");
  }
  ShapeCurve curve;
  curve.feature = k;
  curve.x.assign(grid.begin(), grid.end());
  if (!reference.empty()) {
    double sum = 0.0;
    for (double r : reference) sum += model.contribution(k, r);
    curve.offset = sum / static_cast<double>(reference.size());
    curve.centered = true;
  }
  curve.contribution.reserve(grid.size());
  for (double x : grid) {
    curve.contribution.push_back(model.contribution(k, x) - curve.offset);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Checkpoint (JSON).

constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const NamConfig& c) {
  return {{"hidden_sizes", c.hidden_sizes},
          {"activation", to_string(c.activation)},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"variant", to_string(c.variant)}};
}

inline NamConfig nam_config_from_json(const nlohmann::json& j) {
  NamConfig c;
  c.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  return c;
}

struct NamCheckpoint {
  NamModel model;
  std::vector<std::string> feature_names;
  nlohmann::json extra = nlohmann::json::object();
};

inline std::string dump_checkpoint(const NamCheckpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "coxnam-nam";
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(ckpt.model.config());
  j["num_features"] = ckpt.model.num_features();
  j["feature_names"] = ckpt.feature_names;
  j["params"] = std::vector<double>(ckpt.model.params().begin(),
                                    ckpt.model.params().end());
  j["extra"] = ckpt.extra;
  return j.dump(1) + "\n";
}

inline NamCheckpoint parse_checkpoint(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "coxnam-nam") throw DataError("not a model checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version");
    }
    NamCheckpoint ckpt;
    const auto m = j.at("num_features").get<std::size_t>();
    ckpt.model = NamModel(m, nam_config_from_json(j.at("config")));
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != ckpt.model.params().size()) {
      throw DataError("checkpoint parameter count does not match its config");
    }
    std::copy(params.begin(), params.end(), ckpt.model.params().begin());
    ckpt.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (ckpt.feature_names.size() != m) {
      throw DataError("checkpoint feature names do not match num_features");
    }
    if (j.contains("extra")) ckpt.extra = j.at("extra");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const NamCheckpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << dump_checkpoint(ckpt);
}

inline NamCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace coxnam
