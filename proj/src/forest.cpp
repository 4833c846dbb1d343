#include "kbforge/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "kbforge/errors.hpp"
#include "kbforge/rng.hpp"

namespace kbforge {

void ForestParams::validate() const {
  if (num_trees < 1) throw ConfigError("num_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
}

double Tree::predict(const FlowRecord& record) const {
  std::size_t at = 0;
  for (;;) {
    const auto& node = nodes[at];
    if (const auto* leaf = std::get_if<LeafNode>(&node)) return leaf->value;
    const auto& split = std::get<SplitNode>(node);
    at = record.value(split.feature) <= split.threshold ? split.left : split.right;
  }
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> depth_of(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth_of[i]);
    if (const auto* split = std::get_if<SplitNode>(&nodes[i])) {
      depth_of[split->left] = depth_of[i] + 1;
      depth_of[split->right] = depth_of[i] + 1;
    }
  }
  return deepest;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) {
    return std::holds_alternative<LeafNode>(n);
  }));
}

namespace {

// Column-major copy of the training matrix plus one global sort per feature.
struct TrainingData {
  std::size_t rows = 0;
  std::vector<double> columns;                       // [feature * rows + row]
  std::vector<std::vector<std::uint32_t>> presorted;  // per feature, rows by value
  std::vector<double> target;

  double at(Feature f, std::uint32_t row) const { return columns[index_of(f) * rows + row]; }
};

TrainingData prepare(std::span<const FlowRecord> records, std::span<const double> target) {
  TrainingData data;
  data.rows = records.size();
  data.columns.resize(kFeatureCount * data.rows);
  for (std::size_t r = 0; r < data.rows; ++r) {
    for (Feature f : all_features()) data.columns[index_of(f) * data.rows + r] = records[r].value(f);
  }
  data.presorted.resize(kFeatureCount);
  for (Feature f : all_features()) {
    auto& order = data.presorted[index_of(f)];
    order.resize(data.rows);
    std::iota(order.begin(), order.end(), 0U);
    const double* col = data.columns.data() + index_of(f) * data.rows;
    std::stable_sort(order.begin(), order.end(),
                     [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  data.target.assign(target.begin(), target.end());
  return data;
}

struct Candidate {
  Feature feature{};
  double threshold = 0.0;
  double gain = 0.0;  // reduction of the node's summed squared error
};

// Grows one tree over weighted rows (weight = bootstrap multiplicity). Every
// node owns the same [begin, end) range in each feature's order array.
class TreeBuilder {
 public:
  TreeBuilder(const TrainingData& data, const ForestParams& params, std::vector<std::uint32_t> weight)
      : data_(data), params_(params), weight_(std::move(weight)) {
    for (Feature f : all_features()) {
      auto& order = order_[index_of(f)];
      for (std::uint32_t row : data_.presorted[index_of(f)]) {
        if (weight_[row] > 0) order.push_back(row);
      }
    }
    goes_left_.assign(data_.rows, 0);
    scratch_.reserve(order_[0].size());
  }

  Tree build() {
    Tree tree;
    grow(tree, 0, order_[0].size(), 0);
    return tree;
  }

 private:
  std::size_t grow(Tree& tree, std::size_t begin, std::size_t end, int depth) {
    const auto& rows = order_[0];
    double samples = 0.0;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      samples += weight_[rows[i]];
      sum += weight_[rows[i]] * data_.target[rows[i]];
    }
    const double mean = sum / samples;
    double sse = 0.0;
    bool pure = true;
    const double first = data_.target[rows[begin]];
    for (std::size_t i = begin; i < end; ++i) {
      const double d = data_.target[rows[i]] - mean;
      sse += weight_[rows[i]] * d * d;
      if (data_.target[rows[i]] != first) pure = false;
    }

    const auto node_index = tree.nodes.size();
    const auto sample_count = static_cast<std::size_t>(samples);
    tree.nodes.emplace_back(LeafNode{mean, sample_count});
    if (pure || depth >= params_.max_depth || samples < 2.0 * params_.min_samples_leaf) {
      return node_index;
    }

    const auto best = find_split(begin, end, mean, sse, samples);
    if (!best) return node_index;

    // Mark membership, then stable-partition every feature's range.
    std::size_t left_rows = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = rows[i];
      goes_left_[row] = data_.at(best->feature, row) <= best->threshold ? 1 : 0;
      left_rows += goes_left_[row];
    }
    for (auto& order : order_) {
      scratch_.clear();
      auto out = order.begin() + static_cast<std::ptrdiff_t>(begin);
      for (std::size_t i = begin; i < end; ++i) {
        if (goes_left_[order[i]]) {
          *out++ = order[i];
        } else {
          scratch_.push_back(order[i]);
        }
      }
      std::copy(scratch_.begin(), scratch_.end(), out);
    }

    const auto mid = begin + left_rows;
    const auto left = grow(tree, begin, mid, depth + 1);
    const auto right = grow(tree, mid, end, depth + 1);
    tree.nodes[node_index] = SplitNode{best->feature, best->threshold, left, right,
                                       best->gain / samples, sample_count};
    return node_index;
  }

  std::optional<Candidate> find_split(std::size_t begin, std::size_t end, double mean, double sse,
                                      double samples) const {
    const double min_leaf = params_.min_samples_leaf;
    const double min_gain = 1e-12 * sse;
    std::optional<Candidate> best;
    for (Feature f : features_alphabetical()) {
      const auto& order = order_[index_of(f)];
      double n_left = 0.0;
      double s_left = 0.0;   // sums of centered targets
      double sq_left = 0.0;
      double total_s = 0.0;
      double total_sq = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const double w = weight_[order[i]];
        const double d = data_.target[order[i]] - mean;
        total_s += w * d;
        total_sq += w * d * d;
      }
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const auto row = order[i];
        const double w = weight_[row];
        const double d = data_.target[row] - mean;
        n_left += w;
        s_left += w * d;
        sq_left += w * d * d;
        const double lo = data_.at(f, row);
        const double hi = data_.at(f, order[i + 1]);
        if (lo == hi) continue;
        const double n_right = samples - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double s_right = total_s - s_left;
        const double sq_right = total_sq - sq_left;
        const double child_sse = (sq_left - s_left * s_left / n_left) +
                                 (sq_right - s_right * s_right / n_right);
        const double gain = sse - child_sse;
        if (gain <= min_gain) continue;
        // Equal gains up to rounding keep the earlier (alphabetical, smaller
        // threshold) candidate.
        if (best && gain <= best->gain * (1.0 + 1e-12)) continue;
        double threshold = lo + (hi - lo) / 2.0;
        if (!(threshold < hi)) threshold = lo;
        best = Candidate{f, threshold, gain};
      }
    }
    return best;
  }

  const TrainingData& data_;
  const ForestParams& params_;
  std::vector<std::uint32_t> weight_;
  std::array<std::vector<std::uint32_t>, kFeatureCount> order_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
};

std::vector<std::uint32_t> resample_weights(std::size_t rows, bool bootstrap, std::uint64_t seed) {
  std::vector<std::uint32_t> weight(rows, bootstrap ? 0U : 1U);
  if (bootstrap) {
    Rng rng(seed);
    for (std::size_t i = 0; i < rows; ++i) ++weight[rng.index(rows)];
  }
  return weight;
}

}  // namespace

Forest fit_forest(std::span<const FlowRecord> records, std::span<const double> target,
                  const ForestParams& params, std::uint64_t seed) {
  params.validate();
  if (records.empty()) throw DataError("cannot fit a forest on empty input");
  if (target.size() != records.size()) throw DataError("target size differs from record count");
  for (double y : target) {
    if (!std::isfinite(y)) throw DataError("target contains a non-finite value");
  }
  {
    std::vector<const FeatureVector*> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(&r.values());
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return *a < *b; });
    if (*rows.front() == *rows.back()) throw DataError("need at least 2 distinct records");
  }

  const auto data = prepare(records, target);
  Forest forest;
  forest.params = params;
  forest.seed = seed;
  forest.trees.resize(static_cast<std::size_t>(params.num_trees));

  auto train = [&](std::size_t t) {
    TreeBuilder builder(data, params, resample_weights(data.rows, params.bootstrap, seed ^ t));
    forest.trees[t] = builder.build();
  };

  unsigned workers = params.threads ? params.threads : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(params.num_trees));
  if (workers <= 1) {
    for (std::size_t t = 0; t < forest.trees.size(); ++t) train(t);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < forest.trees.size(); t += workers) train(t);
      });
    }
  }
  return forest;
}

double predict(const Forest& forest, const FlowRecord& record) {
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += tree.predict(record);
  return sum / static_cast<double>(forest.trees.size());
}

std::size_t ImportanceReport::rank_of(Feature f) const {
  return static_cast<std::size_t>(std::find(ranking.begin(), ranking.end(), f) - ranking.begin());
}

ImportanceReport make_report(std::array<double, kFeatureCount> raw_scores) {
  ImportanceReport report;
  double total = 0.0;
  for (double s : raw_scores) total += std::max(0.0, s);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    report.scores[i] = total > 0.0 ? std::max(0.0, raw_scores[i]) / total : 0.0;
  }
  const auto alpha = features_alphabetical();
  report.ranking.assign(alpha.begin(), alpha.end());
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](Feature a, Feature b) {
    return report.score(a) > report.score(b);
  });
  return report;
}

ImportanceReport feature_importance(const Forest& forest) {
  std::array<double, kFeatureCount> raw{};
  for (const auto& tree : forest.trees) {
    const auto root_samples = static_cast<double>(std::visit(
        [](const auto& n) { return n.sample_count; }, tree.nodes.front()));
    for (const auto& node : tree.nodes) {
      if (const auto* split = std::get_if<SplitNode>(&node)) {
        raw[index_of(split->feature)] +=
            static_cast<double>(split->sample_count) / root_samples * split->weighted_mse_reduction;
      }
    }
  }
  for (auto& v : raw) v /= static_cast<double>(forest.trees.size());
  return make_report(raw);
}

ImportanceReport rank_features_for_attack(std::span<const FlowRecord> records, AttackLabel attack,
                                          const ForestParams& params, std::uint64_t seed) {
  std::vector<double> target;
  target.reserve(records.size());
  std::size_t positives = 0;
  for (const auto& r : records) {
    const bool hit = r.label() == attack;
    positives += hit;
    target.push_back(hit ? 1.0 : 0.0);
  }
  if (positives == 0) {
    throw DataError("no records labeled " + std::string(render_label(attack)));
  }
  if (positives == records.size()) {
    throw DataError("no records outside " + std::string(render_label(attack)));
  }
  return feature_importance(fit_forest(records, target, params, seed));
}

nlohmann::json to_json(const ImportanceReport& report) {
  nlohmann::json scores = nlohmann::json::object();
  nlohmann::json ranking = nlohmann::json::array();
  for (Feature f : report.ranking) {
    scores[std::string(canonical_name(f))] = report.score(f);
    ranking.push_back(std::string(canonical_name(f)));
  }
  return {{"scores", scores}, {"ranking", ranking}};
}

ImportanceReport report_from_json(const nlohmann::json& j) {
  ImportanceReport report;
  for (const auto& [name, value] : j.at("scores").items()) {
    auto f = feature_from_name(name);
    if (!f) throw DataError("unknown feature in importance report: " + name);
    report.scores[index_of(*f)] = value.get<double>();
  }
  for (const auto& name : j.at("ranking")) {
    auto f = feature_from_name(name.get<std::string>());
    if (!f) throw DataError("unknown feature in ranking: " + name.get<std::string>());
    report.ranking.push_back(*f);
  }
  return report;
}

std::string report_to_csv(const ImportanceReport& report) {
  std::ostringstream out;
  out << "feature,importance\n";
  for (Feature f : report.ranking) out << canonical_name(f) << ',' << shortest_repr(report.score(f)) << '\n';
  return out.str();
}

std::string render_ranked_bars(const ImportanceReport& report, AttackLabel attack, std::size_t top_n,
                               std::size_t width) {
  std::ostringstream out;
  out << "Ranked features for " << render_label(attack) << '\n';
  const double top = report.ranking.empty() ? 0.0 : report.score(report.ranking.front());
  std::size_t name_width = 0;
  const auto shown = std::min(top_n, report.ranking.size());
  for (std::size_t i = 0; i < shown; ++i) {
    name_width = std::max(name_width, canonical_name(report.ranking[i]).size());
  }
  for (std::size_t i = 0; i < shown; ++i) {
    const Feature f = report.ranking[i];
    const auto bar = top > 0.0 ? static_cast<std::size_t>(std::lround(report.score(f) / top * width)) : 0;
    char value[32];
    std::snprintf(value, sizeof value, "%.4f", report.score(f));
    std::string name(canonical_name(f));
    name.resize(name_width, ' ');
    out << name << " | " << std::string(bar, '#') << ' ' << value << '\n';
  }
  return out.str();
}

}  // namespace kbforge
