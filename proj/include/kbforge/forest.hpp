#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kbforge/features.hpp"
#include "kbforge/flow_data.hpp"

namespace kbforge {

struct ForestParams {
  int num_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 5;
  bool bootstrap = true;
  /// Worker threads for training; 0 picks hardware concurrency. Results do not
  /// depend on this value.
  unsigned threads = 0;

  /// Throws ConfigError on num_trees, max_depth or min_samples_leaf below 1.
  void validate() const;
};

struct SplitNode {
  Feature feature;
  double threshold;  // left: value <= threshold, right: value > threshold
  std::size_t left;
  std::size_t right;
  /// Parent MSE minus the sample-weighted MSE of the two children; > 0.
  double weighted_mse_reduction;
  std::size_t sample_count;
};

struct LeafNode {
  double value;
  std::size_t sample_count;
};

using TreeNode = std::variant<SplitNode, LeafNode>;

/// Nodes stored in preorder; the root is nodes[0].
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const FlowRecord& record) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;
};

struct Forest {
  std::vector<Tree> trees;
  ForestParams params;
  std::uint64_t seed = 0;
};

/// Trains a regression forest with the exhaustive CART split search over all
/// registry features. Candidate thresholds are midpoints between consecutive
/// distinct values; equal-scoring splits resolve to the alphabetically first
/// feature, then the smaller threshold. Tree t is grown on a bootstrap
/// resample drawn from Rng(seed ^ t).
///
/// Determinism is defined over (record order, params, seed): with bootstrap on,
/// resampling draws record indices, so reordering the input changes the
/// resamples. With bootstrap off the chosen splits depend only on the record
/// multiset.
///
/// Throws DataError for fewer than 2 distinct feature vectors or a target
/// size that differs from the record count.
Forest fit_forest(std::span<const FlowRecord> records, std::span<const double> target,
                  const ForestParams& params, std::uint64_t seed);

/// Mean of the per-tree leaf values.
double predict(const Forest& forest, const FlowRecord& record);

struct ImportanceReport {
  /// Indexed by Feature; nonnegative, sums to 1 unless all zero.
  std::array<double, kFeatureCount> scores{};
  /// Scores descending, ties alphabetical.
  std::vector<Feature> ranking;

  double score(Feature f) const { return scores[index_of(f)]; }
  std::size_t rank_of(Feature f) const;
};

/// Each split contributes (node samples / root samples) x its MSE reduction to
/// its tree's importance for that feature; the per-tree totals are averaged
/// over the forest and normalized to sum to 1.
ImportanceReport feature_importance(const Forest& forest);

/// Builds ranking from raw scores (normalizing them if any is positive).
ImportanceReport make_report(std::array<double, kFeatureCount> raw_scores);

/// One-vs-rest: target 1.0 for records labeled `attack`, 0.0 otherwise.
/// Throws DataError when either class is empty.
ImportanceReport rank_features_for_attack(std::span<const FlowRecord> records, AttackLabel attack,
                                          const ForestParams& params, std::uint64_t seed);

nlohmann::json to_json(const ImportanceReport& report);
ImportanceReport report_from_json(const nlohmann::json& j);

/// "feature,importance" rows in rank order.
std::string report_to_csv(const ImportanceReport& report);

/// Rank-ordered horizontal bar chart for the top `top_n` features.
std::string render_ranked_bars(const ImportanceReport& report, AttackLabel attack,
                               std::size_t top_n = 20, std::size_t width = 40);

}  // namespace kbforge
