#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "coxnam/forest.hpp"
#include "coxnam/synthetic.hpp"

using namespace coxnam;

namespace {

// Chi-square from per-time 2x2 tables, written out independently.
double oracle_log_rank(const std::vector<TimedEvent>& a,
                       const std::vector<TimedEvent>& b) {
  std::vector<TimedEvent> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::vector<double> ts;
  for (const auto& s : all) {
    if (s.event) ts.push_back(s.time);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  double o = 0, e = 0, v = 0;
  for (double t : ts) {
    const auto risk = [&](const std::vector<TimedEvent>& g) {
      return static_cast<double>(std::count_if(
          g.begin(), g.end(), [&](const TimedEvent& s) { return s.time >= t; }));
    };
    const auto died = [&](const std::vector<TimedEvent>& g) {
      return static_cast<double>(std::count_if(g.begin(), g.end(), [&](const TimedEvent& s) {
        return s.event && s.time == t;
      }));
    };
    const double n1 = risk(a), n = n1 + risk(b), d1 = died(a), d = d1 + died(b);
    o += d1;
    e += d * n1 / n;
    if (n > 1) v += n1 * (n - n1) * d * (n - d) / (n * n * (n - 1));
  }
  return v > 0 ? (o - e) * (o - e) / v : 0.0;
}

SurvivalDataset linear_data(std::uint64_t seed, std::size_t n = 200) {
  SyntheticSpec spec = SyntheticSpec::linear({1.0, 0.5, 0.0});
  spec.n = n;
  spec.censoring_rate = 0.2;
  spec.seed = seed;
  return generate_cox_data(spec).dataset;
}

}  // namespace

TEST(LogRank, HandCase) {
  const std::vector<TimedEvent> l{{1, true}, {3, true}}, r{{2, true}, {4, false}};
  EXPECT_NEAR(log_rank_statistic(l, r), 8.0 / 13.0, 1e-12);
  EXPECT_NEAR(oracle_log_rank(l, r), 8.0 / 13.0, 1e-12);
}

TEST(LogRank, SymmetricNullAndNoEvents) {
  const std::vector<TimedEvent> a{{1, true}, {2, false}, {5, true}, {3, true}};
  const std::vector<TimedEvent> b{{2, true}, {4, true}, {6, false}};
  EXPECT_DOUBLE_EQ(log_rank_statistic(a, b), log_rank_statistic(b, a));
  EXPECT_NEAR(log_rank_statistic(a, a), 0.0, 1e-15);
  const std::vector<TimedEvent> c{{1, false}}, d{{2, false}};
  EXPECT_EQ(log_rank_statistic(c, d), 0.0);
  EXPECT_THROW(log_rank_statistic({}, a), DataError);
}

TEST(LogRank, MatchesOracleOnRandomGroups) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> t(1, 10);
  std::bernoulli_distribution ev(0.7);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<TimedEvent> a(1 + rep % 7), b(1 + rep % 5);
    for (auto& s : a) s = {static_cast<double>(t(rng)), ev(rng)};
    for (auto& s : b) s = {static_cast<double>(t(rng)), ev(rng)};
    EXPECT_NEAR(log_rank_statistic(a, b), oracle_log_rank(a, b), 1e-10);
  }
}

TEST(Split, SweepMatchesBruteForce) {
  const auto data = linear_data(9, 60);
  const auto x = data.feature_rows();
  std::vector<TimedEvent> y;
  for (const auto& s : data.samples()) y.push_back({s.time, s.event});
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t f = 0; f < 3; ++f) {
    const auto c = detail::best_split_for_feature(x, y, rows, f, 3);
    std::vector<double> v;
    for (auto& r : x) v.push_back(r[f]);
    std::sort(v.begin(), v.end());
    double best = 0.0, thr = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const double mid = 0.5 * (v[i] + v[i + 1]);
      std::vector<TimedEvent> l, r;
      for (std::size_t k = 0; k < x.size(); ++k) (x[k][f] <= mid ? l : r).push_back(y[k]);
      const auto events = [](const std::vector<TimedEvent>& g) {
        return std::count_if(g.begin(), g.end(), [](auto& s) { return s.event; });
      };
      if (events(l) < 3 || events(r) < 3) continue;
      const double s = oracle_log_rank(l, r);
      if (s > best + 1e-12) best = s, thr = mid;
    }
    EXPECT_NEAR(c.statistic, best, 1e-9);
    EXPECT_DOUBLE_EQ(c.threshold, thr);
  }
}

TEST(Forest, SeparatingFeatureAtRoot) {
  std::vector<Sample> s;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> noise(0, 1);
  for (int i = 0; i < 40; ++i) {
    const double g = i % 2;
    s.push_back({{noise(rng), g, noise(rng)}, g ? 100 + i : 1 + 0.1 * i, true});
  }
  const SurvivalDataset data(std::move(s), {"a", "group", "b"}, {});
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.min_leaf_events = 3;
  cfg.features_per_split = 3;
  const auto forest = fit_forest(data, cfg);
  for (const auto& tree : forest.trees()) {
    EXPECT_EQ(tree.nodes()[0].feature, 1);
  }
}

TEST(Forest, SingleTreeLeavesAreNelsonAalen) {
  const auto data = linear_data(4, 30);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.min_leaf_events = 1;
  cfg.features_per_split = 3;
  const auto forest = fit_forest(data, cfg);
  const auto& tree = forest.trees()[0];
  std::map<std::size_t, std::vector<std::pair<double, bool>>> members;
  for (const auto& s : data.samples()) {
    members[tree.leaf_index(s.features)].emplace_back(s.time, s.event);
  }
  for (const auto& s : data.samples()) {
    const auto leaf = tree.leaf_index(s.features);
    const auto expected =
        curve_on_grid(nelson_aalen_curve(members[leaf]), forest.grid());
    const auto got = forest.predict_chf(s.features);
    for (std::size_t j = 0; j < got.size(); ++j) {
      EXPECT_NEAR(got[j], expected[j], 1e-12);
    }
  }
}

TEST(Forest, MeanOfLeafCurves) {
  auto grid = std::make_shared<const TimeGrid>(std::vector<double>{1, 2}, 0.1);
  auto leaf_tree = [](std::vector<double> v) {
    TreeNode leaf;
    leaf.leaf = 0;
    return SurvivalTree({leaf}, {LeafChf::from_dense(v)});
  };
  std::vector<SurvivalTree> trees{leaf_tree({0.2, 0.4}), leaf_tree({0.4, 0.8})};
  const SurvivalForest f(grid, trees, {"x"}, {});
  const auto h = f.predict_chf(std::vector<double>{0.0});
  EXPECT_NEAR(h[0], 0.3, 1e-15);
  EXPECT_NEAR(h[1], 0.6, 1e-15);
  const SurvivalForest same(grid, {leaf_tree({0.1, 0.5}), leaf_tree({0.1, 0.5})},
                            {"x"}, {});
  EXPECT_EQ(same.predict_chf(std::vector<double>{3.0}).values(),
            (std::vector<double>{0.1, 0.5}));
  EXPECT_THROW(f.predict_chf(std::vector<double>{1.0, 2.0}), DataError);
}

TEST(Forest, MonotoneAndDeterministic) {
  const auto data = linear_data(2);
  ForestConfig cfg;
  cfg.n_trees = 20;
  cfg.seed = 42;
  const auto a = fit_forest(data, cfg);
  cfg.threads = 3;
  const auto b = fit_forest(data, cfg);
  EXPECT_EQ(serialize_forest(a), serialize_forest(b));
  for (const auto& s : data.samples()) {
    const auto h = a.predict_chf(s.features);
    for (std::size_t j = 1; j < h.size(); ++j) EXPECT_GE(h[j], h[j - 1]);
  }
  cfg.n_trees = 40;
  EXPECT_EQ(*fit_forest(data, cfg).grid(), *a.grid());
}

TEST(Forest, TooSmallGivesSingleLeaf) {
  const SurvivalDataset d({{{0.0}, 1, true}, {{1.0}, 2, true}, {{2.0}, 3, false}},
                          {"x"}, {});
  ForestConfig cfg;
  cfg.n_trees = 3;
  const auto f = fit_forest(d, cfg);
  EXPECT_TRUE(f.is_single_leaf());
}

TEST(Forest, SerializationRoundTrip) {
  const auto data = linear_data(6);
  ForestConfig cfg;
  cfg.n_trees = 5;
  auto f = fit_forest(data, cfg);
  f.set_metadata("{\"k\":1}");
  const auto bytes = serialize_forest(f);
  const auto g = deserialize_forest(bytes);
  EXPECT_EQ(serialize_forest(g), bytes);
  EXPECT_EQ(g.metadata(), f.metadata());
  EXPECT_EQ(g.predict_chf(data[0].features).values(),
            f.predict_chf(data[0].features).values());
  auto broken = bytes;
  broken.resize(broken.size() / 2);
  EXPECT_THROW(deserialize_forest(broken), DataError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_forest(bad_magic), DataError);
}

TEST(Importance, UnusedFeatureScoresZero) {
  const auto data = linear_data(12);
  ForestConfig cfg;
  cfg.n_trees = 30;
  cfg.seed = 5;
  cfg.max_depth = 1;
  cfg.features_per_split = 3;
  const auto forest = fit_forest(data, cfg);
  bool x3_used = false;
  for (const auto& t : forest.trees()) x3_used = x3_used || t.uses_feature(2);
  ASSERT_FALSE(x3_used);
  const auto scores = permutation_importance(forest, data, 20, 2);
  EXPECT_LT(std::abs(scores[2]), 0.01);
  EXPECT_GT(scores[0], 0.02);
}

TEST(Importance, DuplicateColumnDoesNotExceedSingle) {
  const auto data = linear_data(13);
  std::vector<Sample> dup;
  for (const auto& s : data.samples()) {
    auto f = s.features;
    f.push_back(s.features[0]);
    dup.push_back({f, s.time, s.event});
  }
  const SurvivalDataset d2(dup, {"x1", "x2", "x3", "x1copy"}, {});
  ForestConfig cfg;
  cfg.n_trees = 60;
  cfg.seed = 3;
  const auto alone = permutation_importance(fit_forest(data, cfg), data, 10, 4);
  const auto both = permutation_importance(fit_forest(d2, cfg), d2, 10, 4);
  EXPECT_LE(both[0], alone[0] + 0.01);
  EXPECT_LE(both[3], alone[0] + 0.01);
}
