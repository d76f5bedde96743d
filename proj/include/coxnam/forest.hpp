#pragma once

// Random survival forest used as the reference black box: log-rank splitting,
// Nelson-Aalen leaves projected onto a dataset-level time grid, permutation
// feature importance, and a versioned binary file format.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "coxnam/errors.hpp"
#include "coxnam/survival.hpp"

namespace coxnam {

struct ForestConfig {
  int n_trees = 500;
  int min_leaf_events = 15;
  std::optional<int> max_depth;    // unlimited when empty
  int features_per_split = 0;      // 0 selects ceil(sqrt(m))
  std::uint64_t seed = 0;
  bool bootstrap = true;           // disable only for tests
  int threads = 1;
};

// Leaf CHF stored as its steps on the shared grid: value[k] holds on grid
// intervals [index[k], index[k+1]). Zero before index[0].
struct LeafChf {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  static LeafChf from_dense(std::span<const double> dense) {
    LeafChf leaf;
    double prev = 0.0;
    for (std::size_t j = 0; j < dense.size(); ++j) {
      if (dense[j] != prev) {
        leaf.index.push_back(static_cast<std::uint32_t>(j));
        leaf.value.push_back(dense[j]);
        prev = dense[j];
      }
    }
    return leaf;
  }

  // Adds this step function to acc (length = grid size).
  void add_to(std::span<double> acc) const {
    for (std::size_t k = 0; k < index.size(); ++k) {
      const std::size_t end =
          k + 1 < index.size() ? index[k + 1] : acc.size();
      for (std::size_t j = index[k]; j < end; ++j) acc[j] += value[k];
    }
  }

  std::vector<double> dense(std::size_t grid_size) const {
    std::vector<double> out(grid_size, 0.0);
    add_to(out);
    return out;
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;     // index into the tree's leaves
};

class SurvivalTree {
 public:
  SurvivalTree() = default;
  SurvivalTree(std::vector<TreeNode> nodes, std::vector<LeafChf> leaves)
      : nodes_(std::move(nodes)), leaves_(std::move(leaves)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<LeafChf>& leaves() const { return leaves_; }

  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t node = 0;
    while (nodes_[node].feature >= 0) {
      const TreeNode& n = nodes_[node];
      node = static_cast<std::size_t>(
          x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                : n.right);
    }
    return static_cast<std::size_t>(nodes_[node].leaf);
  }

  const LeafChf& route(std::span<const double> x) const {
    return leaves_[leaf_index(x)];
  }

  bool uses_feature(std::size_t k) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const TreeNode& n) {
      return n.feature == static_cast<std::int32_t>(k);
    });
  }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<LeafChf> leaves_;
};

class SurvivalForest {
 public:
  SurvivalForest() = default;
  SurvivalForest(GridPtr grid, std::vector<SurvivalTree> trees,
                 std::vector<std::string> feature_names,
                 std::vector<FeatureKind> feature_kinds,
                 ForestConfig config = {})
      : grid_(std::move(grid)),
        trees_(std::move(trees)),
        names_(std::move(feature_names)),
        kinds_(std::move(feature_kinds)),
        config_(config) {
    if (!grid_) throw DataError("forest requires a grid");
    if (trees_.empty()) throw DataError("forest requires at least one tree");
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<SurvivalTree>& trees() const { return trees_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<FeatureKind>& feature_kinds() const { return kinds_; }
  std::size_t num_features() const { return names_.size(); }
  const ForestConfig& config() const { return config_; }

  // Opaque caller-owned payload carried through serialization (the CLI keeps
  // the fitted preprocessing schema here).
  const std::string& metadata() const { return metadata_; }
  void set_metadata(std::string m) { metadata_ = std::move(m); }

  bool is_single_leaf() const {
    return std::all_of(trees_.begin(), trees_.end(), [](const auto& t) {
      return t.nodes().size() == 1;
    });
  }

  PiecewiseChf predict_chf(std::span<const double> x) const {
    if (x.size() != names_.size()) {
      throw DataError("input has " + std::to_string(x.size()) +
                      " features, forest expects " +
                      std::to_string(names_.size()));
    }
    std::vector<double> acc(grid_->size(), 0.0);
    for (const auto& tree : trees_) tree.route(x).add_to(acc);
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (double& v : acc) v *= inv;
    return PiecewiseChf(grid_, std::move(acc));
  }

  PiecewiseChf operator()(std::span<const double> x) const {
    return predict_chf(x);
  }

  double predict_risk(std::span<const double> x) const {
    return integrated_chf(predict_chf(x));
  }

 private:
  GridPtr grid_;
  std::vector<SurvivalTree> trees_;
  std::vector<std::string> names_;
  std::vector<FeatureKind> kinds_;
  ForestConfig config_;
  std::string metadata_;
};

struct TimedEvent {
  double time = 0.0;
  bool event = false;
};

// Two-sample log-rank chi-square statistic (O - E)^2 / V.
inline double log_rank_statistic(std::span<const TimedEvent> left,
                                 std::span<const TimedEvent> right) {
  if (left.empty() || right.empty()) {
    throw DataError("log-rank statistic needs two nonempty groups");
  }
  std::vector<double> times;
  for (const auto& s : left) if (s.event) times.push_back(s.time);
  for (const auto& s : right) if (s.event) times.push_back(s.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  double diff = 0.0;
  double var = 0.0;
  for (double t : times) {
    double y_left = 0.0, y = 0.0, d_left = 0.0, d = 0.0;
    for (const auto& s : left) {
      if (s.time >= t) y_left += 1.0, y += 1.0;
      if (s.event && s.time == t) d_left += 1.0, d += 1.0;
    }
    for (const auto& s : right) {
      if (s.time >= t) y += 1.0;
      if (s.event && s.time == t) d += 1.0;
    }
    const double p = y_left / y;
    diff += d_left - d * p;
    if (y > 1.0) var += d * p * (1.0 - p) * (y - d) / (y - 1.0);
  }
  return var > 0.0 ? diff * diff / var : 0.0;
}

namespace detail {

struct SplitCandidate {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double statistic = 0.0;
};

// Exhaustive sweep over midpoints of consecutive distinct values of one
// feature. Both children must keep at least min_events events.
inline SplitCandidate best_split_for_feature(
    std::span<const std::vector<double>> x, std::span<const TimedEvent> y,
    std::span<const std::size_t> rows, std::size_t feature, int min_events) {
  SplitCandidate best;
  best.feature = static_cast<std::int32_t>(feature);

  std::vector<double> death_times;
  for (std::size_t r : rows) if (y[r].event) death_times.push_back(y[r].time);
  std::sort(death_times.begin(), death_times.end());
  death_times.erase(std::unique(death_times.begin(), death_times.end()),
                    death_times.end());
  const std::size_t nd = death_times.size();
  if (nd == 0) return best;

  std::vector<double> at_risk(nd, 0.0), deaths(nd, 0.0);
  std::vector<std::size_t> risk_end(rows.size()), death_slot(rows.size());
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t total_events = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TimedEvent& s = y[rows[i]];
    risk_end[i] = static_cast<std::size_t>(
        std::upper_bound(death_times.begin(), death_times.end(), s.time) -
        death_times.begin());
    for (std::size_t d = 0; d < risk_end[i]; ++d) at_risk[d] += 1.0;
    if (s.event) {
      death_slot[i] = risk_end[i] - 1;
      deaths[death_slot[i]] += 1.0;
      ++total_events;
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = x[rows[a]][feature], vb = x[rows[b]][feature];
    return va < vb || (va == vb && a < b);
  });

  std::vector<double> risk_left(nd, 0.0), deaths_left(nd, 0.0);
  std::size_t left_events = 0;
  for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
    const std::size_t i = order[pos];
    for (std::size_t d = 0; d < risk_end[i]; ++d) risk_left[d] += 1.0;
    if (y[rows[i]].event) {
      deaths_left[death_slot[i]] += 1.0;
      ++left_events;
    }
    const double here = x[rows[i]][feature];
    const double next = x[rows[order[pos + 1]]][feature];
    if (!(here < next)) continue;
    if (left_events < static_cast<std::size_t>(min_events) ||
        total_events - left_events < static_cast<std::size_t>(min_events)) {
      continue;
    }
    double diff = 0.0, var = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const double p = risk_left[d] / at_risk[d];
      diff += deaths_left[d] - deaths[d] * p;
      if (at_risk[d] > 1.0) {
        var += deaths[d] * p * (1.0 - p) * (at_risk[d] - deaths[d]) /
               (at_risk[d] - 1.0);
      }
    }
    const double stat = var > 0.0 ? diff * diff / var : 0.0;
    if (stat > best.statistic) {
      best.statistic = stat;
      best.threshold = 0.5 * (here + next);
    }
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> x,
              std::span<const TimedEvent> y, const GridPtr& grid,
              const ForestConfig& config, std::size_t mtry,
              std::mt19937_64& rng)
      : x_(x), y_(y), grid_(grid), config_(config), mtry_(mtry), rng_(rng) {}

  SurvivalTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return SurvivalTree(std::move(nodes_), std::move(leaves_));
  }

 private:
  std::int32_t grow(std::vector<std::size_t> rows, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    std::size_t events = 0;
    for (std::size_t r : rows) events += y_[r].event ? 1 : 0;
    const bool depth_ok = !config_.max_depth || depth < *config_.max_depth;
    SplitCandidate best;
    if (depth_ok &&
        events >= 2 * static_cast<std::size_t>(config_.min_leaf_events)) {
      best = choose_split(rows);
    }
    if (best.feature < 0 || !(best.statistic > 0.0)) {
      make_leaf(id, rows);
      return id;
    }

    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(best.feature);
    for (std::size_t r : rows) {
      (x_[r][f] <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const std::int32_t l = grow(std::move(left), depth + 1);
    const std::int32_t r = grow(std::move(right), depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitCandidate choose_split(std::span<const std::size_t> rows) {
    const std::size_t m = x_.front().size();
    std::vector<std::size_t> features(m);
    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t k = 0; k < mtry_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, m - 1);
      std::swap(features[k], features[pick(rng_)]);
    }
    SplitCandidate best;
    for (std::size_t k = 0; k < mtry_; ++k) {
      SplitCandidate c = best_split_for_feature(x_, y_, rows, features[k],
                                                config_.min_leaf_events);
      if (c.statistic > best.statistic) best = c;
    }
    return best;
  }

  void make_leaf(std::int32_t id, std::span<const std::size_t> rows) {
    std::vector<std::pair<double, bool>> obs;
    obs.reserve(rows.size());
    for (std::size_t r : rows) obs.emplace_back(y_[r].time, y_[r].event);
    const PiecewiseChf chf = curve_on_grid(nelson_aalen_curve(obs), grid_);
    nodes_[static_cast<std::size_t>(id)].leaf =
        static_cast<std::int32_t>(leaves_.size());
    leaves_.push_back(LeafChf::from_dense(chf.values()));
  }

  std::span<const std::vector<double>> x_;
  std::span<const TimedEvent> y_;
  const GridPtr& grid_;
  const ForestConfig& config_;
  std::size_t mtry_;
  std::mt19937_64& rng_;
  std::vector<TreeNode> nodes_;
  std::vector<LeafChf> leaves_;
};

// Independent stream per tree so serial and threaded fits agree.
inline std::mt19937_64 tree_rng(std::uint64_t seed, std::size_t tree) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tree),
                    static_cast<std::uint32_t>(0x5eed7ee5u)};
  return std::mt19937_64(seq);
}

}  // namespace detail

inline SurvivalForest fit_forest(const SurvivalDataset& dataset,
                                 const ForestConfig& config,
                                 GridPtr grid = nullptr) {
  if (config.n_trees < 1) throw UsageError("forest needs at least one tree");
  if (config.min_leaf_events < 1) {
    throw UsageError("min leaf events must be positive");
  }
  const std::size_t m = dataset.num_features();
  if (m == 0) throw DataError("dataset has no features");
  std::size_t mtry = config.features_per_split > 0
                         ? static_cast<std::size_t>(config.features_per_split)
                         : static_cast<std::size_t>(
                               std::ceil(std::sqrt(static_cast<double>(m))));
  if (mtry > m) throw UsageError("features per split exceeds feature count");
  if (!grid) grid = build_time_grid(dataset);

  const std::vector<std::vector<double>> x = dataset.feature_rows();
  std::vector<TimedEvent> y;
  y.reserve(dataset.size());
  for (const auto& s : dataset.samples()) y.push_back({s.time, s.event});

  const auto n_trees = static_cast<std::size_t>(config.n_trees);
  std::vector<SurvivalTree> trees(n_trees);
  auto fit_one = [&](std::size_t t) {
    std::mt19937_64 rng = detail::tree_rng(config.seed, t);
    std::vector<std::size_t> rows(dataset.size());
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, dataset.size() - 1);
      for (auto& r : rows) r = draw(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(x, y, grid, config, mtry, rng);
    trees[t] = builder.build(std::move(rows));
  };

  const std::size_t workers = std::min<std::size_t>(
      n_trees, static_cast<std::size_t>(std::max(1, config.threads)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_trees; ++t) fit_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < n_trees; t = next++) fit_one(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return SurvivalForest(std::move(grid), std::move(trees),
                        dataset.feature_names(), dataset.feature_kinds(),
                        config);
}

inline std::vector<double> forest_risks(const SurvivalForest& forest,
                                        const SurvivalDataset& dataset) {
  std::vector<double> risk;
  risk.reserve(dataset.size());
  for (const auto& s : dataset.samples()) {
    risk.push_back(forest.predict_risk(s.features));
  }
  return risk;
}

// Mean drop of the C-index when one feature column is shuffled.
inline std::vector<double> permutation_importance(
    const SurvivalForest& forest, const SurvivalDataset& dataset,
    int n_repeats, std::uint64_t seed) {
  if (n_repeats < 1) throw UsageError("n_repeats must be positive");
  const std::vector<double> times = dataset.times();
  const std::vector<bool> events = dataset.events();
  const double baseline =
      concordance_index(forest_risks(forest, dataset), times, events);

  const std::size_t m = dataset.num_features();
  std::vector<std::vector<double>> rows = dataset.feature_rows();
  std::vector<double> scores(m, 0.0);
  std::mt19937_64 rng(seed);
  std::vector<double> risk(rows.size());
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> column(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][k];
    double total = 0.0;
    for (int rep = 0; rep < n_repeats; ++rep) {
      std::vector<double> shuffled = column;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> xi = rows[i];
        xi[k] = shuffled[i];
        risk[i] = forest.predict_risk(xi);
      }
      total += baseline - concordance_index(risk, times, events);
    }
    scores[k] = total / n_repeats;
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Binary format, little-endian host layout:
//   "CXNFRST" '\0', u32 version, config, schema, metadata, grid, trees.

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t count(std::size_t item_bytes) {
    const auto n = get<std::uint64_t>();
    if (item_bytes > 0 && n > (bytes_.size() - pos_) / item_bytes) {
      throw DataError("forest file is truncated or corrupt");
    }
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError("forest file is truncated or corrupt");
    }
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kForestMagic[8] = {'C', 'X', 'N', 'F', 'R', 'S', 'T', '\0'};
constexpr std::uint32_t kForestVersion = 1;

}  // namespace detail

inline std::vector<char> serialize_forest(const SurvivalForest& forest) {
  detail::ByteWriter w;
  for (char c : detail::kForestMagic) w.put(c);
  w.put(detail::kForestVersion);

  const ForestConfig& c = forest.config();
  w.put<std::int32_t>(c.n_trees);
  w.put<std::int32_t>(c.min_leaf_events);
  w.put<std::int32_t>(c.max_depth.value_or(-1));
  w.put<std::int32_t>(c.features_per_split);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint8_t>(c.bootstrap ? 1 : 0);

  w.put<std::uint64_t>(forest.num_features());
  for (std::size_t k = 0; k < forest.num_features(); ++k) {
    w.put_string(forest.feature_names()[k]);
    w.put<std::uint8_t>(
        forest.feature_kinds()[k] == FeatureKind::numeric ? 0 : 1);
  }
  w.put_string(forest.metadata());

  const TimeGrid& g = *forest.grid();
  w.put<std::uint64_t>(g.size());
  for (double t : g.times()) w.put(t);
  w.put(g.gamma());

  w.put<std::uint64_t>(forest.trees().size());
  for (const auto& tree : forest.trees()) {
    w.put<std::uint64_t>(tree.nodes().size());
    for (const auto& n : tree.nodes()) {
      w.put(n.feature);
      w.put(n.threshold);
      w.put(n.left);
      w.put(n.right);
      w.put(n.leaf);
    }
    w.put<std::uint64_t>(tree.leaves().size());
    for (const auto& leaf : tree.leaves()) {
      w.put<std::uint64_t>(leaf.index.size());
      for (std::size_t k = 0; k < leaf.index.size(); ++k) {
        w.put(leaf.index[k]);
        w.put(leaf.value[k]);
      }
    }
  }
  return w.bytes();
}

inline SurvivalForest deserialize_forest(std::vector<char> bytes) {
  detail::ByteReader r(std::move(bytes));
  for (char expected : detail::kForestMagic) {
    if (r.get<char>() != expected) throw DataError("not a forest file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != detail::kForestVersion) {
    throw DataError("unsupported forest file version " +
                    std::to_string(version));
  }
  ForestConfig c;
  c.n_trees = r.get<std::int32_t>();
  c.min_leaf_events = r.get<std::int32_t>();
  const auto depth = r.get<std::int32_t>();
  if (depth >= 0) c.max_depth = depth;
  c.features_per_split = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  c.bootstrap = r.get<std::uint8_t>() != 0;

  const std::size_t m = r.count(9);
  std::vector<std::string> names(m);
  std::vector<FeatureKind> kinds(m);
  for (std::size_t k = 0; k < m; ++k) {
    names[k] = r.get_string();
    kinds[k] = r.get<std::uint8_t>() == 0 ? FeatureKind::numeric
                                          : FeatureKind::category;
  }
  std::string metadata = r.get_string();

  std::vector<double> times(r.count(sizeof(double)));
  for (double& t : times) t = r.get<double>();
  const double gamma = r.get<double>();
  auto grid = std::make_shared<const TimeGrid>(std::move(times), gamma);

  std::vector<SurvivalTree> trees(r.count(8));
  for (auto& tree : trees) {
    std::vector<TreeNode> nodes(r.count(28));
    for (auto& n : nodes) {
      n.feature = r.get<std::int32_t>();
      n.threshold = r.get<double>();
      n.left = r.get<std::int32_t>();
      n.right = r.get<std::int32_t>();
      n.leaf = r.get<std::int32_t>();
    }
    std::vector<LeafChf> leaves(r.count(8));
    for (auto& leaf : leaves) {
      const std::size_t steps = r.count(12);
      leaf.index.resize(steps);
      leaf.value.resize(steps);
      for (std::size_t k = 0; k < steps; ++k) {
        leaf.index[k] = r.get<std::uint32_t>();
        leaf.value[k] = r.get<double>();
        if (leaf.index[k] >= grid->size()) {
          throw DataError("forest leaf refers past the time grid");
        }
      }
    }
    for (const auto& n : nodes) {
      const auto limit = static_cast<std::int32_t>(nodes.size());
      if (n.feature >= static_cast<std::int32_t>(m) ||
          (n.feature >= 0 && (n.left <= 0 || n.left >= limit ||
                              n.right <= 0 || n.right >= limit)) ||
          (n.feature < 0 &&
           (n.leaf < 0 || n.leaf >= static_cast<std::int32_t>(leaves.size())))) {
        throw DataError("forest file has an invalid tree node");
      }
    }
    if (nodes.empty()) throw DataError("forest file has an empty tree");
    tree = SurvivalTree(std::move(nodes), std::move(leaves));
  }
  if (!r.done()) throw DataError("forest file has trailing bytes");

  SurvivalForest forest(std::move(grid), std::move(trees), std::move(names),
                        std::move(kinds), c);
  forest.set_metadata(std::move(metadata));
  return forest;
}

inline void save_forest(const SurvivalForest& forest, const std::string& path) {
  const std::vector<char> bytes = serialize_forest(forest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write forest file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing forest file: " + path);
}

inline SurvivalForest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open forest file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return deserialize_forest(std::move(bytes));
}

}  // namespace coxnam
