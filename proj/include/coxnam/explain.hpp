#pragma once

// Explanation pipeline: sample a neighbourhood (or take the whole training
// set), query the black box for CHFs, turn them into log-ratio targets
// against a baseline CHF and fit a neural additive model to them.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coxnam/errors.hpp"
#include "coxnam/nam.hpp"
#include "coxnam/survival.hpp"

namespace coxnam {

// Anything mapping a feature vector to a CHF on a fixed grid.
template <typename F>
concept ChfPredictor = requires(const F& f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<PiecewiseChf>;
};

enum class ExplainMode { local, global };

inline const char* to_string(ExplainMode m) {
  return m == ExplainMode::local ? "local" : "global";
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Largest pairwise Euclidean distance between dataset rows.
inline double dataset_diameter(const SurvivalDataset& dataset) {
  if (dataset.size() < 2) {
    throw DataError("dataset diameter needs at least 2 points");
  }
  double best = 0.0;
  const auto& s = dataset.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      best = std::max(best, euclidean(s[i].features, s[j].features));
    }
  }
  return best;
}

// Gaussian draws around x with std = scale * diameter on numeric coordinates;
// categorical coordinates keep x's value.
inline std::vector<std::vector<double>> generate_perturbations(
    std::span<const double> x, const SurvivalDataset& dataset, std::size_t n,
    std::uint64_t seed, double scale = 0.1) {
  if (n < 1) throw UsageError("number of perturbations must be positive");
  if (x.size() != dataset.num_features()) {
    throw DataError("explained point has wrong dimension");
  }
  const double diameter = dataset_diameter(dataset);
  if (!(diameter > 0.0)) {
    throw DataError("dataset diameter is zero; perturbation scale undefined");
  }
  const double sd = scale * diameter;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  const auto& kinds = dataset.feature_kinds();
  std::vector<std::vector<double>> points(n, std::vector<double>(x.begin(), x.end()));
  for (auto& p : points) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (kinds[k] == FeatureKind::numeric) p[k] += noise(rng);
    }
  }
  return points;
}

// v_k = max(0, 1 - sqrt(|x - x_k| / r)).
inline std::vector<double> neighborhood_weights(
    std::span<const double> x, const std::vector<std::vector<double>>& points,
    double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw UsageError("neighbourhood radius must be positive");
  }
  std::vector<double> w;
  w.reserve(points.size());
  for (const auto& p : points) {
    w.push_back(std::max(0.0, 1.0 - std::sqrt(euclidean(x, p) / r)));
  }
  return w;
}

struct Neighborhood {
  std::vector<double> center;
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  double radius = 0.0;
};

// The radius is the distance to the farthest generated point.
inline Neighborhood make_neighborhood(std::span<const double> x,
                                      const SurvivalDataset& dataset,
                                      std::size_t n, std::uint64_t seed,
                                      double scale = 0.1) {
  Neighborhood nb;
  nb.center.assign(x.begin(), x.end());
  nb.points = generate_perturbations(x, dataset, n, seed, scale);
  for (const auto& p : nb.points) {
    nb.radius = std::max(nb.radius, euclidean(x, p));
  }
  if (nb.radius > 0.0) {
    nb.weights = neighborhood_weights(x, nb.points, nb.radius);
  } else {
    nb.weights.assign(nb.points.size(), 1.0);
  }
  return nb;
}

// Phi_ij = ln max(H_j(x_i), eps) - ln max(H0_j, eps).
template <ChfPredictor BlackBox>
TargetBatch build_targets(const BlackBox& blackbox, const PiecewiseChf& baseline,
                          std::vector<std::vector<double>> points,
                          std::vector<double> weights, double epsilon = 1e-5) {
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  if (points.size() != weights.size()) {
    throw AlignmentError("one weight per point is required");
  }
  const std::size_t s = baseline.size();
  std::vector<double> log_base(s);
  for (std::size_t j = 0; j < s; ++j) {
    log_base[j] = std::log(std::max(baseline[j], epsilon));
  }
  TargetBatch batch;
  batch.epsilon = epsilon;
  batch.tau = baseline.grid()->widths();
  batch.phi.resize(points.size() * s);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PiecewiseChf h = blackbox(std::span<const double>(points[i]));
    if (!same_grid(h.grid(), baseline.grid())) {
      throw AlignmentError(
          "black-box CHF and baseline CHF are on different grids");
    }
    for (std::size_t j = 0; j < s; ++j) {
      batch.phi[i * s + j] = std::log(std::max(h[j], epsilon)) - log_base[j];
    }
  }
  batch.points = std::move(points);
  batch.weights = std::move(weights);
  return batch;
}

struct ExplainOptions {
  NamConfig nam;
  Regularization reg;
  std::size_t n_points = 100;
  double epsilon = 1e-5;
  double perturbation_scale = 0.1;
  std::size_t curve_points = 50;
  std::uint64_t seed = 0;
};

struct FeatureCoefficients {
  double beta = 1.0;
  double alpha = 1.0;
  double omega = 0.0;
  double one_minus_alpha() const { return 1.0 - alpha; }
  double linear_weight() const { return (1.0 - alpha) * omega; }
};

struct TraceSummary {
  std::size_t epochs = 0;
  double initial = 0.0;
  double final = 0.0;
  double minimum = 0.0;
};

struct Explanation {
  ExplainMode mode = ExplainMode::global;
  Variant variant = Variant::base;
  Regularization reg;
  double epsilon = 1e-5;
  std::vector<std::string> feature_names;
  std::vector<FeatureKind> feature_kinds;
  std::vector<double> center;  // local mode only
  NamModel model;
  std::vector<ShapeCurve> curves;
  std::vector<FeatureCoefficients> coefficients;
  std::vector<std::vector<double>> reference;  // points used for centering
  std::vector<double> weights;
  double final_loss = 0.0;
  TraceSummary trace;
  std::optional<double> c_blackbox;
  std::optional<double> c_surrogate;

  // Widest spread of a centered curve; the usual importance read-out.
  double curve_range(std::size_t k) const {
    const auto& c = curves.at(k).contribution;
    if (c.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    return *hi - *lo;
  }
};

inline std::vector<double> curve_grid(std::span<const double> values,
                                      FeatureKind kind, std::size_t points) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (kind == FeatureKind::category || sorted.size() <= 1 || points < 2) {
    return sorted;
  }
  const double lo = sorted.front(), hi = sorted.back();
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) /
                       static_cast<double>(points - 1);
  }
  grid.back() = hi;
  return grid;
}

inline std::vector<FeatureCoefficients> coefficients_of(const NamModel& model) {
  std::vector<FeatureCoefficients> out(model.num_features());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].beta = model.beta(k);
    out[k].alpha = model.alpha(k);
    out[k].omega = model.omega(k);
  }
  return out;
}

// Fits the NAM to a prepared target batch and extracts centered curves over
// the batch's own points.
inline Explanation fit_explanation(TargetBatch batch,
                                   std::vector<std::string> names,
                                   std::vector<FeatureKind> kinds,
                                   const ExplainOptions& options,
                                   ExplainMode mode) {
  const std::size_t m = names.size();
  if (kinds.empty()) kinds.assign(m, FeatureKind::numeric);
  if (kinds.size() != m) throw DataError("one feature kind per name is required");
  NamConfig cfg = options.nam;
  cfg.seed = options.seed;
  TrainResult trained = train(init_model(m, cfg), batch, options.reg);

  Explanation ex;
  ex.mode = mode;
  ex.variant = cfg.variant;
  ex.reg = options.reg;
  ex.epsilon = options.epsilon;
  ex.feature_names = std::move(names);
  ex.feature_kinds = std::move(kinds);
  ex.model = std::move(trained.model);
  ex.final_loss = trained.final_loss;
  ex.trace.epochs = static_cast<std::size_t>(cfg.epochs);
  ex.trace.initial = trained.initial_loss;
  ex.trace.final = trained.loss_trace.empty() ? trained.final_loss
                                              : trained.loss_trace.back();
  ex.trace.minimum = trained.final_loss;
  ex.coefficients = coefficients_of(ex.model);

  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> column(batch.rows());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      column[i] = batch.points[i][k];
    }
    const std::vector<double> grid =
        curve_grid(column, ex.feature_kinds[k], options.curve_points);
    ex.curves.push_back(shape_curve(ex.model, k, grid, column));
  }
  ex.reference = std::move(batch.points);
  ex.weights = std::move(batch.weights);
  return ex;
}

template <ChfPredictor BlackBox>
Explanation explain_local(const BlackBox& blackbox, const PiecewiseChf& baseline,
                          const SurvivalDataset& dataset,
                          std::span<const double> x,
                          const ExplainOptions& options) {
  Neighborhood nb = make_neighborhood(x, dataset, options.n_points,
                                      options.seed, options.perturbation_scale);
  TargetBatch batch = build_targets(blackbox, baseline, std::move(nb.points),
                                    std::move(nb.weights), options.epsilon);
  Explanation ex = fit_explanation(std::move(batch), dataset.feature_names(),
                                   dataset.feature_kinds(), options,
                                   ExplainMode::local);
  ex.center = std::move(nb.center);
  return ex;
}

template <ChfPredictor BlackBox>
Explanation explain_global(const BlackBox& blackbox,
                           const PiecewiseChf& baseline,
                           const SurvivalDataset& dataset,
                           const ExplainOptions& options) {
  TargetBatch batch =
      build_targets(blackbox, baseline, dataset.feature_rows(),
                    std::vector<double>(dataset.size(), 1.0), options.epsilon);
  return fit_explanation(std::move(batch), dataset.feature_names(),
                         dataset.feature_kinds(), options, ExplainMode::global);
}

struct CIndexPair {
  double blackbox = 0.0;
  double surrogate = 0.0;
};

// Black box ranked by integrated CHF, surrogate by psi(x).
template <ChfPredictor BlackBox>
CIndexPair surrogate_c_index(const NamModel& surrogate,
                             const BlackBox& blackbox,
                             const SurvivalDataset& test) {
  std::vector<double> bb, sg;
  bb.reserve(test.size());
  sg.reserve(test.size());
  for (const auto& s : test.samples()) {
    bb.push_back(integrated_chf(blackbox(std::span<const double>(s.features))));
    sg.push_back(surrogate.psi(s.features));
  }
  const std::vector<double> t = test.times();
  const std::vector<bool> e = test.events();
  return {concordance_index(bb, t, e), concordance_index(sg, t, e)};
}

}  // namespace coxnam
