#pragma once

// Survival-data primitives: censored samples, the event-time grid, piecewise
// constant cumulative hazard / survival functions, the Nelson-Aalen estimator
// and Harrell's concordance index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coxnam/errors.hpp"

namespace coxnam {

enum class FeatureKind { numeric, category };

inline const char* to_string(FeatureKind kind) {
  return kind == FeatureKind::numeric ? "numeric" : "category";
}

struct Sample {
  std::vector<double> features;
  double time = 0.0;
  bool event = false;
};

// A set of right-censored observations (x_i, delta_i, T_i) sharing one
// feature schema. Construction validates; the object is immutable afterwards.
class SurvivalDataset {
 public:
  SurvivalDataset() = default;

  SurvivalDataset(std::vector<Sample> samples,
                  std::vector<std::string> feature_names,
                  std::vector<FeatureKind> feature_kinds)
      : samples_(std::move(samples)),
        names_(std::move(feature_names)),
        kinds_(std::move(feature_kinds)) {
    if (kinds_.empty()) kinds_.assign(names_.size(), FeatureKind::numeric);
    if (kinds_.size() != names_.size()) {
      throw DataError("feature kind count does not match feature name count");
    }
    if (samples_.size() < 2) {
      throw DataError("dataset needs at least 2 samples, got " +
                      std::to_string(samples_.size()));
    }
    bool any_event = false;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      if (s.features.size() != names_.size()) {
        throw DataError("sample " + std::to_string(i) + " has " +
                        std::to_string(s.features.size()) +
                        " features, expected " + std::to_string(names_.size()));
      }
      if (!std::isfinite(s.time) || s.time < 0.0) {
        throw DataError("sample " + std::to_string(i) +
                        " has an invalid event time");
      }
      for (double v : s.features) {
        if (!std::isfinite(v)) {
          throw DataError("sample " + std::to_string(i) +
                          " has a non-finite feature value");
        }
      }
      any_event = any_event || s.event;
    }
    if (!any_event) throw DataError("dataset contains no observed events");
  }

  std::size_t size() const { return samples_.size(); }
  std::size_t num_features() const { return names_.size(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<FeatureKind>& feature_kinds() const { return kinds_; }

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.time);
    return out;
  }

  std::vector<bool> events() const {
    std::vector<bool> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.event);
    return out;
  }

  std::vector<std::vector<double>> feature_rows() const {
    std::vector<std::vector<double>> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.features);
    return out;
  }

 private:
  std::vector<Sample> samples_;
  std::vector<std::string> names_;
  std::vector<FeatureKind> kinds_;
};

// Ordered distinct times t_0 < ... < t_s partitioning [t_0, T] into
// Omega_j = [t_j, t_{j+1}) and Omega_s = [t_s, T], with T = t_s + gamma.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> times, double gamma)
      : times_(std::move(times)), gamma_(gamma) {
    if (times_.size() < 2) {
      throw GridDegenerateError("time grid needs at least 2 distinct times");
    }
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) {
      throw GridDegenerateError("grid horizon offset must be positive");
    }
    widths_.resize(times_.size());
    for (std::size_t j = 0; j + 1 < times_.size(); ++j) {
      widths_[j] = times_[j + 1] - times_[j];
      if (!(widths_[j] > 0.0)) {
        throw GridDegenerateError("grid times must be strictly increasing");
      }
    }
    widths_.back() = gamma_;
  }

  // Number of intervals, s + 1.
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& widths() const { return widths_; }
  double gamma() const { return gamma_; }
  double horizon() const { return times_.back() + gamma_; }
  double start() const { return times_.front(); }

  // Index j with t_j <= t < t_{j+1}; -1 when t < t_0. Times past T map to s.
  std::ptrdiff_t interval_of(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return static_cast<std::ptrdiff_t>(it - times_.begin()) - 1;
  }

  bool operator==(const TimeGrid& other) const {
    return gamma_ == other.gamma_ && times_ == other.times_;
  }

 private:
  std::vector<double> times_;
  double gamma_;
  std::vector<double> widths_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
  return a == b || (a && b && *a == *b);
}

// Cumulative hazard H_j on each grid interval.
class PiecewiseChf {
 public:
  PiecewiseChf(GridPtr grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DataError("CHF requires a grid");
    if (values_.size() != grid_->size()) {
      throw AlignmentError("CHF has " + std::to_string(values_.size()) +
                           " values for a grid of " +
                           std::to_string(grid_->size()) + " intervals");
    }
    for (std::size_t j = 0; j < values_.size(); ++j) {
      if (!std::isfinite(values_[j]) || values_[j] < 0.0) {
        throw NumericError("CHF value at interval " + std::to_string(j) +
                           " is negative or non-finite");
      }
      if (j > 0 && values_[j] < values_[j - 1]) {
        throw NumericError("CHF is decreasing at interval " +
                           std::to_string(j));
      }
    }
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }

  // Right-continuous step evaluation; zero before t_0.
  double at(double t) const {
    const std::ptrdiff_t j = grid_->interval_of(t);
    return j < 0 ? 0.0 : values_[static_cast<std::size_t>(j)];
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

class PiecewiseSf {
 public:
  PiecewiseSf(GridPtr grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {}

  const GridPtr& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

inline GridPtr build_time_grid(const SurvivalDataset& dataset,
                               double gamma_fraction = 0.01) {
  if (!(gamma_fraction > 0.0) || !std::isfinite(gamma_fraction)) {
    throw UsageError("gamma fraction must be positive");
  }
  auto distinct = [&](bool events_only) {
    std::vector<double> t;
    for (const auto& s : dataset.samples()) {
      if (!events_only || s.event) t.push_back(s.time);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  };
  std::vector<double> times = distinct(true);
  if (times.size() < 2) times = distinct(false);
  if (times.size() < 2) {
    throw GridDegenerateError("fewer than 2 distinct observed times");
  }
  const double gamma = gamma_fraction * (times.back() - times.front());
  return std::make_shared<const TimeGrid>(std::move(times), gamma);
}

// Nelson-Aalen step function: jump times and the cumulative value from each
// jump onward.
struct NelsonAalenCurve {
  std::vector<double> jump_times;
  std::vector<double> cumulative;

  double at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }
};

// Estimator over (time, event) pairs; duplicates count with multiplicity.
inline NelsonAalenCurve nelson_aalen_curve(
    std::vector<std::pair<double, bool>> observations) {
  std::sort(observations.begin(), observations.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  NelsonAalenCurve curve;
  const std::size_t n = observations.size();
  double acc = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = observations[i].first;
    const std::size_t at_risk = n - i;
    std::size_t deaths = 0;
    std::size_t k = i;
    for (; k < n && observations[k].first == t; ++k) {
      if (observations[k].second) ++deaths;
    }
    if (deaths > 0) {
      if (at_risk == 0) {
        throw UndefinedMetricError("empty risk set at an event time");
      }
      acc += static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.jump_times.push_back(t);
      curve.cumulative.push_back(acc);
    }
    i = k;
  }
  return curve;
}

inline PiecewiseChf curve_on_grid(const NelsonAalenCurve& curve,
                                  const GridPtr& grid) {
  std::vector<double> values(grid->size());
  for (std::size_t j = 0; j < grid->size(); ++j) {
    values[j] = curve.at(grid->times()[j]);
  }
  return PiecewiseChf(grid, std::move(values));
}

inline PiecewiseChf nelson_aalen(const SurvivalDataset& dataset,
                                 const GridPtr& grid) {
  std::vector<std::pair<double, bool>> obs;
  obs.reserve(dataset.size());
  for (const auto& s : dataset.samples()) obs.emplace_back(s.time, s.event);
  return curve_on_grid(nelson_aalen_curve(std::move(obs)), grid);
}

inline PiecewiseSf chf_to_sf(const PiecewiseChf& chf) {
  std::vector<double> s(chf.size());
  for (std::size_t j = 0; j < chf.size(); ++j) s[j] = std::exp(-chf[j]);
  return PiecewiseSf(chf.grid(), std::move(s));
}

// Value on target interval j is the source CHF evaluated at t_j.
inline PiecewiseChf project_chf(const PiecewiseChf& chf,
                                const GridPtr& target) {
  if (same_grid(chf.grid(), target)) return PiecewiseChf(target, chf.values());
  std::vector<double> values(target->size());
  for (std::size_t j = 0; j < target->size(); ++j) {
    values[j] = chf.at(target->times()[j]);
  }
  return PiecewiseChf(target, std::move(values));
}

// Integral of H over [t_0, T]; used as a monotone risk summary.
inline double integrated_chf(const PiecewiseChf& chf) {
  const auto& w = chf.grid()->widths();
  double acc = 0.0;
  for (std::size_t j = 0; j < chf.size(); ++j) acc += chf[j] * w[j];
  return acc;
}

// Harrell's C. Pair (i, k) is admissible iff T_i < T_k and delta_i = 1; it
// scores 1 when risk_i > risk_k and 0.5 on a risk tie.
inline double concordance_index(std::span<const double> risks,
                                std::span<const double> times,
                                const std::vector<bool>& events) {
  const std::size_t n = risks.size();
  if (times.size() != n || events.size() != n) {
    throw DataError("concordance index needs one risk score per sample");
  }
  double concordant = 0.0;
  std::size_t admissible = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(times[i] < times[k])) continue;
      ++admissible;
      if (risks[i] > risks[k]) {
        concordant += 1.0;
      } else if (risks[i] == risks[k]) {
        concordant += 0.5;
      }
    }
  }
  if (admissible == 0) {
    throw UndefinedMetricError("no admissible pairs for the concordance index");
  }
  return concordant / static_cast<double>(admissible);
}

inline double concordance_index(std::span<const double> risks,
                                const SurvivalDataset& dataset) {
  const std::vector<double> t = dataset.times();
  return concordance_index(risks, t, dataset.events());
}

}  // namespace coxnam
