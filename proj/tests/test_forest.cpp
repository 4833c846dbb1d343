#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kbforge/errors.hpp"
#include "kbforge/forest.hpp"
#include "kbforge/rng.hpp"
#include "test_support.hpp"

namespace kbforge {
namespace {

using testing::make_record;

struct Dataset2 {
  std::vector<FlowRecord> records;
  std::vector<double> target;
};

Dataset2 random_data(std::uint64_t seed, std::size_t n, std::size_t active_features) {
  Rng rng(seed);
  Dataset2 d;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v{};
    for (std::size_t f = 0; f < active_features; ++f) v[f] = std::floor(rng.uniform(0, 20));
    d.records.emplace_back(v);
    d.target.push_back(rng.uniform(-1, 1) + (v[0] > 10 ? 2.0 : 0.0));
  }
  return d;
}

double sse(const std::vector<double>& ys) {
  if (ys.empty()) return 0.0;
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double s = 0.0;
  for (double y : ys) s += (y - mean) * (y - mean);
  return s;
}

struct OracleSplit {
  Feature feature;
  double threshold;
  double gain;
};

// Exhaustive reference: every feature, every midpoint, direct SSE sums.
OracleSplit brute_force_root(const Dataset2& d, std::size_t min_leaf) {
  OracleSplit best{Feature::FlowDuration, 0.0, 0.0};
  bool found = false;
  const double parent = sse(d.target);
  for (Feature f : features_alphabetical()) {
    std::vector<double> values;
    for (const auto& r : d.records) values.push_back(r.value(f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = values[i] + (values[i + 1] - values[i]) / 2.0;
      std::vector<double> left, right;
      for (std::size_t r = 0; r < d.records.size(); ++r) {
        (d.records[r].value(f) <= t ? left : right).push_back(d.target[r]);
      }
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      const double gain = parent - sse(left) - sse(right);
      if (!found || gain > best.gain * (1 + 1e-9)) {
        best = {f, t, gain};
        found = true;
      }
    }
  }
  return best;
}

ForestParams stump_params() {
  ForestParams p;
  p.num_trees = 1;
  p.max_depth = 1;
  p.min_samples_leaf = 3;
  p.bootstrap = false;
  p.threads = 1;
  return p;
}

TEST(FitForest, RootSplitMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = random_data(seed, 60, 4);
    const auto forest = fit_forest(d.records, d.target, stump_params(), 0);
    const auto& root = std::get<SplitNode>(forest.trees[0].nodes[0]);
    const auto oracle = brute_force_root(d, 3);
    EXPECT_EQ(root.feature, oracle.feature) << "seed " << seed;
    EXPECT_DOUBLE_EQ(root.threshold, oracle.threshold) << "seed " << seed;
    EXPECT_NEAR(root.weighted_mse_reduction * 60.0, oracle.gain, 1e-9 * oracle.gain);
  }
}

TEST(FitForest, TiesResolveAlphabetically) {
  // Rate and Srate carry identical information; "Rate" sorts first.
  std::vector<FlowRecord> records;
  std::vector<double> target;
  for (int i = 0; i < 20; ++i) {
    const double v = i < 10 ? 1.0 : 5.0;
    records.push_back(make_record({{Feature::Rate, v}, {Feature::Srate, v}}));
    target.push_back(i < 10 ? 0.0 : 1.0);
  }
  const auto forest = fit_forest(records, target, stump_params(), 0);
  const auto& root = std::get<SplitNode>(forest.trees[0].nodes[0]);
  EXPECT_EQ(root.feature, Feature::Rate);
  EXPECT_DOUBLE_EQ(root.threshold, 3.0);
}

TEST(FitForest, FullDepthTreeInterpolatesDistinctRows) {
  const auto d = random_data(3, 80, 6);
  ForestParams p;
  p.num_trees = 1;
  p.max_depth = 64;
  p.min_samples_leaf = 1;
  p.bootstrap = false;
  const auto forest = fit_forest(d.records, d.target, p, 0);
  // Rows sharing a feature vector cannot be separated; compare with their mean.
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t j = 0; j < d.records.size(); ++j) {
      if (d.records[j] == d.records[i]) {
        sum += d.target[j];
        ++n;
      }
    }
    EXPECT_NEAR(predict(forest, d.records[i]), sum / n, 1e-9);
  }
}

TEST(FitForest, LeavesRespectMinSamplesAndDepth) {
  const auto d = random_data(4, 200, 5);
  ForestParams p;
  p.num_trees = 5;
  p.max_depth = 4;
  p.min_samples_leaf = 7;
  const auto forest = fit_forest(d.records, d.target, p, 11);
  for (const auto& tree : forest.trees) {
    EXPECT_LE(tree.depth(), 4u);
    for (const auto& node : tree.nodes) {
      if (const auto* leaf = std::get_if<LeafNode>(&node)) EXPECT_GE(leaf->sample_count, 7u);
      if (const auto* split = std::get_if<SplitNode>(&node)) EXPECT_GT(split->weighted_mse_reduction, 0.0);
    }
  }
}

TEST(FitForest, ResultIndependentOfThreadCount) {
  const auto d = random_data(5, 300, 8);
  ForestParams p;
  p.num_trees = 12;
  p.threads = 1;
  const auto a = feature_importance(fit_forest(d.records, d.target, p, 42));
  p.threads = 5;
  const auto b = feature_importance(fit_forest(d.records, d.target, p, 42));
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.ranking, b.ranking);
}

TEST(FitForest, SeedChangesBootstrap) {
  const auto d = random_data(6, 300, 8);
  ForestParams p;
  p.num_trees = 4;
  const auto a = feature_importance(fit_forest(d.records, d.target, p, 1));
  const auto b = feature_importance(fit_forest(d.records, d.target, p, 2));
  EXPECT_NE(a.scores, b.scores);
}

TEST(FitForest, InputValidation) {
  const auto d = random_data(7, 10, 2);
  EXPECT_THROW(fit_forest({}, {}, ForestParams{}, 0), DataError);
  EXPECT_THROW(fit_forest(d.records, std::span(d.target).first(5), ForestParams{}, 0), DataError);
  std::vector<FlowRecord> same(5, make_record({{Feature::Rate, 1.0}}));
  std::vector<double> t = {0, 1, 0, 1, 0};
  EXPECT_THROW(fit_forest(same, t, ForestParams{}, 0), DataError);
  ForestParams bad;
  bad.num_trees = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ForestParams{};
  bad.min_samples_leaf = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(FeatureImportance, NormalizedAndRankedDescending) {
  const auto d = random_data(8, 400, 10);
  ForestParams p;
  p.num_trees = 10;
  const auto report = feature_importance(fit_forest(d.records, d.target, p, 3));
  double total = 0.0;
  for (double s : report.scores) {
    EXPECT_GE(s, 0.0);
    total += s;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  ASSERT_EQ(report.ranking.size(), kFeatureCount);
  for (std::size_t i = 1; i < report.ranking.size(); ++i) {
    EXPECT_GE(report.score(report.ranking[i - 1]), report.score(report.ranking[i]));
  }
  EXPECT_EQ(report.ranking.front(), Feature::FlowDuration);
}

TEST(FeatureImportance, StumpGivesAllWeightToSplitFeature) {
  const auto d = random_data(9, 60, 4);
  const auto report = feature_importance(fit_forest(d.records, d.target, stump_params(), 0));
  const auto oracle = brute_force_root(d, 3);
  EXPECT_DOUBLE_EQ(report.score(oracle.feature), 1.0);
}

TEST(FeatureImportance, ZeroScoresTieAlphabetically) {
  std::array<double, kFeatureCount> raw{};
  raw[index_of(Feature::Weight)] = 2.0;
  const auto report = make_report(raw);
  EXPECT_EQ(report.ranking[0], Feature::Weight);
  EXPECT_EQ(report.ranking[1], Feature::AckCount);
  EXPECT_EQ(report.rank_of(Feature::Weight), 0u);
}

TEST(RankFeaturesForAttack, RequiresBothClasses) {
  std::vector<FlowRecord> records = {make_record({{Feature::Rate, 1}}, AttackLabel::UdpFlood),
                                     make_record({{Feature::Rate, 2}}, AttackLabel::UdpFlood)};
  EXPECT_THROW(rank_features_for_attack(records, AttackLabel::UdpFlood, {}, 0), DataError);
  EXPECT_THROW(rank_features_for_attack(records, AttackLabel::TcpFlood, {}, 0), DataError);
}

TEST(ImportanceReport, JsonAndCsvExports) {
  const auto d = random_data(10, 100, 3);
  ForestParams p;
  p.num_trees = 3;
  const auto report = feature_importance(fit_forest(d.records, d.target, p, 0));
  const auto back = report_from_json(to_json(report));
  EXPECT_EQ(back.scores, report.scores);
  EXPECT_EQ(back.ranking, report.ranking);
  const auto csv = report_to_csv(report);
  EXPECT_EQ(csv.rfind("feature,importance\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(kFeatureCount + 1));
  const auto bars = render_ranked_bars(report, AttackLabel::UdpFlood, 5);
  EXPECT_NE(bars.find("DDoS-UDP_Flood"), std::string::npos);
}

}  // namespace
}  // namespace kbforge
