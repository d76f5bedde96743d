#pragma once

// Ground-truth survival data from Cox models with a known log-risk, and the
// brute-force oracles the test suites check the optimiser against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coxnam/errors.hpp"
#include "coxnam/survival.hpp"

namespace coxnam {

enum class FeatureDistribution { uniform, normal };

// One additive term scale * f(x_k) of a GAM log-risk.
struct ShapeTerm {
  std::string name = "linear";  // zero|linear|sin3|square|cube|tanh|step|abs
  double scale = 1.0;
};

inline double evaluate_shape(const std::string& name, double x) {
  if (name == "zero") return 0.0;
  if (name == "linear") return x;
  if (name == "sin3") return std::sin(3.0 * x);
  if (name == "square") return x * x;
  if (name == "cube") return x * x * x;
  if (name == "tanh") return std::tanh(x);
  if (name == "step") return x > 0.0 ? 1.0 : 0.0;
  if (name == "abs") return std::abs(x);
  throw UsageError("unknown shape function '" + name + "'");
}

struct SyntheticSpec {
  std::size_t n = 500;
  // The log-risk is sum_k terms[k](x_k); linear coefficients b map to
  // {"linear", b_k}. Its size fixes m.
  std::vector<ShapeTerm> terms;
  double weibull_scale = 1.0;
  double weibull_shape = 1.0;
  double censoring_rate = 0.0;
  FeatureDistribution distribution = FeatureDistribution::uniform;
  double box = 1.0;  // uniform features on [-box, box]
  std::uint64_t seed = 0;

  static SyntheticSpec linear(std::vector<double> b) {
    SyntheticSpec s;
    for (double c : b) s.terms.push_back({"linear", c});
    return s;
  }

  std::size_t m() const { return terms.size(); }

  double psi(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      acc += terms[k].scale * evaluate_shape(terms[k].name, x[k]);
    }
    return acc;
  }
};

struct SyntheticData {
  SurvivalDataset dataset;
  std::vector<double> psi;          // true log-risk per sample
  std::vector<double> event_times;  // uncensored event times
  double censoring_bound = 0.0;     // c in Uniform[0, c]; 0 when uncensored
  double realized_censoring = 0.0;
};

// Inverse-transform sampling from S(t|x) = exp(-H0(t) exp(psi(x))) with the
// Weibull baseline H0(t) = (t / scale)^shape, then independent uniform
// censoring on [0, c] with c bisected to hit the target censored fraction.
inline SyntheticData generate_cox_data(const SyntheticSpec& spec) {
  if (spec.n < 2) throw UsageError("synthetic data needs n >= 2");
  if (spec.terms.empty()) throw UsageError("synthetic data needs m >= 1");
  if (!(spec.weibull_scale > 0.0) || !(spec.weibull_shape > 0.0)) {
    throw UsageError("Weibull scale and shape must be positive");
  }
  if (!(spec.censoring_rate >= 0.0) || !(spec.censoring_rate < 1.0)) {
    throw UsageError("censoring rate must lie in [0, 1)");
  }
  for (const auto& t : spec.terms) evaluate_shape(t.name, 0.0);

  const std::size_t n = spec.n, m = spec.m();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> box(-spec.box, spec.box);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  std::vector<std::vector<double>> x(n, std::vector<double>(m));
  out.psi.resize(n);
  out.event_times.resize(n);
  std::vector<double> censor_draw(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : x[i]) {
      v = spec.distribution == FeatureDistribution::uniform ? box(rng)
                                                            : normal(rng);
    }
    out.psi[i] = spec.psi(x[i]);
    double u = unit(rng);
    while (u <= 0.0) u = unit(rng);
    const double h = -std::log(u) / std::exp(out.psi[i]);
    out.event_times[i] =
        spec.weibull_scale * std::pow(h, 1.0 / spec.weibull_shape);
    censor_draw[i] = unit(rng);
  }

  auto censored_fraction = [&](double c) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (c * censor_draw[i] < out.event_times[i]) ++k;
    }
    return static_cast<double>(k) / static_cast<double>(n);
  };

  double bound = std::numeric_limits<double>::infinity();
  if (spec.censoring_rate > 0.0) {
    double lo = 0.0;
    double hi = 1.0;
    for (double t : out.event_times) hi = std::max(hi, t);
    double min_draw = 1.0;
    for (double d : censor_draw) min_draw = std::min(min_draw, d);
    hi = 2.0 * hi / std::max(min_draw, 1e-12);
    double best = hi;
    double best_err = std::abs(censored_fraction(hi) - spec.censoring_rate);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double f = censored_fraction(mid);
      const double err = std::abs(f - spec.censoring_rate);
      if (err < best_err) best = mid, best_err = err;
      if (f > spec.censoring_rate) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    if (best_err > 0.05) {
      throw DataError("censoring calibration failed: achieved " +
                      std::to_string(censored_fraction(best)) + " for target " +
                      std::to_string(spec.censoring_rate));
    }
    bound = best;
  }

  std::vector<Sample> samples(n);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::isinf(bound) ? bound : bound * censor_draw[i];
    samples[i].features = x[i];
    samples[i].event = out.event_times[i] <= c;
    samples[i].time = samples[i].event ? out.event_times[i] : c;
    if (!samples[i].event) ++censored;
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < m; ++k) names.push_back("x" + std::to_string(k + 1));
  out.dataset = SurvivalDataset(std::move(samples), std::move(names),
                                std::vector<FeatureKind>(m, FeatureKind::numeric));
  out.censoring_bound = std::isinf(bound) ? 0.0 : bound;
  out.realized_censoring = static_cast<double>(censored) / static_cast<double>(n);
  return out;
}

// Per-row minimiser of sum_j (Phi_ij - psi)^2 tau_j: the tau-weighted mean.
inline std::vector<double> oracle_psi_star(std::span<const double> phi,
                                           std::span<const double> tau) {
  if (tau.empty() || phi.size() % tau.size() != 0) {
    throw DataError("target matrix and interval widths disagree");
  }
  double tau_sum = 0.0;
  for (double t : tau) tau_sum += t;
  const std::size_t rows = phi.size() / tau.size();
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < tau.size(); ++j) {
      acc += tau[j] * phi[i * tau.size() + j];
    }
    out[i] = acc / tau_sum;
  }
  return out;
}

using LossFunction = std::function<double(std::span<const double>)>;

// Central differences (L(theta + h e_p) - L(theta - h e_p)) / 2h.
inline std::vector<double> finite_difference_gradient(
    const LossFunction& loss, std::span<const double> params, double h) {
  if (!(h > 0.0)) throw UsageError("finite-difference step must be positive");
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> grad(theta.size());
  for (std::size_t p = 0; p < theta.size(); ++p) {
    const double saved = theta[p];
    theta[p] = saved + h;
    const double up = loss(theta);
    theta[p] = saved - h;
    const double down = loss(theta);
    theta[p] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("loss is not finite near parameter " +
                         std::to_string(p));
    }
    grad[p] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace coxnam
