#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kbforge/features.hpp"

namespace kbforge {

using FeatureVector = std::array<double, kFeatureCount>;

/// One flow: a finite value for every registry feature plus an optional
/// ground-truth label. Immutable once built; `with` returns a modified copy.
class FlowRecord {
 public:
  /// Throws DataError if any value is NaN or infinite.
  explicit FlowRecord(const FeatureVector& values,
                      std::optional<AttackLabel> label = std::nullopt);

  double value(Feature f) const { return values_[index_of(f)]; }
  const FeatureVector& values() const { return values_; }
  const std::optional<AttackLabel>& label() const { return label_; }

  FlowRecord with(Feature f, double v) const;
  FlowRecord with_label(std::optional<AttackLabel> label) const;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;

 private:
  FeatureVector values_;
  std::optional<AttackLabel> label_;
};

struct DatasetSummary {
  std::size_t record_count = 0;
  /// Unlabeled records are counted under Unknown.
  std::map<AttackLabel, std::size_t> per_label_counts;
  std::size_t skipped_count = 0;

  void count(const FlowRecord& r);
};

nlohmann::json to_json(const DatasetSummary& s);

struct LoadOptions {
  /// Extra header spellings, checked before the default alias table.
  std::map<std::string, Feature> alias_overrides;
  std::string label_column = "label";
  bool require_labels = true;
};

struct Dataset {
  std::vector<FlowRecord> records;
  DatasetSummary summary;
};

/// Streams CSV rows as records. Rows with a missing, unparsable or non-finite
/// registry value are skipped and counted. Throws DataError when the header
/// lacks a registry feature or (if required) the label column.
DatasetSummary scan_dataset(std::istream& in, const LoadOptions& options,
                            const std::function<void(FlowRecord&&)>& sink);

Dataset load_dataset(std::istream& in, const LoadOptions& options = {});

/// Throws DataError if the file does not exist or cannot be opened.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes the same schema load_dataset reads: canonical feature names in
/// column order, then the label column. Values use the shortest decimal form
/// that parses back to the identical double.
void write_csv(std::ostream& out, std::span<const FlowRecord> records,
               const std::string& label_column = "label");

/// Per label (in AttackLabel order), min(n_per_class, available) records by
/// seeded selection. Within a label, candidates are first put in canonical
/// (feature-vector) order, so the result depends only on the input multiset.
std::vector<FlowRecord> stratified_sample(std::span<const FlowRecord> records,
                                          std::size_t n_per_class, std::uint64_t seed);

/// Splits one CSV line on commas; double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest round-trip decimal rendering of a double.
std::string shortest_repr(double v);

}  // namespace kbforge
