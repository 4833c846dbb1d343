#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "kbforge/detectors.hpp"
#include "kbforge/flow_data.hpp"

namespace kbforge {

class ConfusionMatrix {
 public:
  void add(AttackLabel truth, AttackLabel predicted, std::size_t n = 1);
  std::size_t count(AttackLabel truth, AttackLabel predicted) const {
    return counts_[index_of(truth)][index_of(predicted)];
  }
  std::size_t total() const { return total_; }
  std::size_t correct() const;
  std::size_t class_total(AttackLabel truth) const;
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> counts_{};
  std::size_t total_ = 0;
};

/// Builds a matrix from parallel truth/prediction lists.
ConfusionMatrix confusion_from(std::span<const AttackLabel> truths,
                               std::span<const AttackLabel> predictions);

/// Diagonal share of all samples. Throws DataError when the matrix is empty.
double accuracy(const ConfusionMatrix& cm);

/// Recall per true class; classes without samples are omitted.
std::map<AttackLabel, double> per_class_accuracy(const ConfusionMatrix& cm);

/// {"labels": [...], "counts": [[...]], "total": n}
nlohmann::json to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const nlohmann::json& j);

struct EvalOptions {
  /// Count transport failures into `errors` instead of aborting.
  bool best_effort = false;
  /// Worker threads; 0 picks hardware concurrency. Results do not depend on it.
  unsigned threads = 1;
};

struct EvalOutcome {
  ConfusionMatrix matrix;
  /// Records dropped by transport failures (best-effort runs only).
  std::size_t errors = 0;
};

/// Classifies every record under `kb` and tallies (truth, prediction). In
/// strict mode the first TransportError is rethrown. Throws DataError on an
/// unlabeled record.
EvalOutcome evaluate(Detector& detector, std::span<const FlowRecord> records, const KbContext& kb,
                     const EvalOptions& options = {});

struct GridCell {
  double accuracy = 0.0;
  std::size_t n = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

using GridKey = std::tuple<AttackLabel, KbConfig, std::string>;

class EvaluationGrid {
 public:
  /// Throws DataError unless accuracy is in [0, 1].
  void set(AttackLabel attack, KbConfig config, const std::string& backend, GridCell cell);
  const GridCell* find(AttackLabel attack, KbConfig config, const std::string& backend) const;

  const std::map<GridKey, GridCell>& cells() const { return cells_; }
  bool empty() const { return cells_.empty(); }
  /// Backends in first-insertion order.
  const std::vector<std::string>& backends() const { return backends_; }
  /// Attacks with at least one cell, in label order.
  std::vector<AttackLabel> attacks() const;

  std::size_t n_per_cell = 500;

  friend bool operator==(const EvaluationGrid& a, const EvaluationGrid& b) {
    return a.cells_ == b.cells_ && a.backends_ == b.backends_ && a.n_per_cell == b.n_per_cell;
  }

 private:
  std::map<GridKey, GridCell> cells_;
  std::vector<std::string> backends_;
};

/// Per attack, the configuration with the highest accuracy for `backend`;
/// ties prefer Short KB, then Long KB, then No KB. Throws DataError when the
/// backend has no cells.
std::map<AttackLabel, KbConfig> select_best_kb(const EvaluationGrid& grid,
                                               const std::string& backend);

struct RenderedTable {
  std::string text;
  std::string csv;
  std::string json;
};

/// Attack rows; per backend a No KB / Long KB / Short KB column group.
/// Text shows percentages with two decimals ("-" for missing cells); CSV and
/// JSON carry raw fractions and per-cell counts. Throws DataError when empty.
RenderedTable render_table(const EvaluationGrid& grid);

nlohmann::json to_json(const EvaluationGrid& grid);
EvaluationGrid grid_from_json(const nlohmann::json& j);

/// Row heading used in tables: "ICMP", "UDP", "TCP", "PSHACK", ...
std::string_view short_attack_name(AttackLabel l);

}  // namespace kbforge
