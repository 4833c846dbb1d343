#include "kbforge/flow_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "kbforge/errors.hpp"
#include "kbforge/rng.hpp"

namespace kbforge {

FlowRecord::FlowRecord(const FeatureVector& values, std::optional<AttackLabel> label)
    : values_(values), label_(label) {
  for (Feature f : all_features()) {
    if (!std::isfinite(values_[index_of(f)])) {
      throw DataError("non-finite value for feature '" + std::string(canonical_name(f)) + "'");
    }
  }
}

FlowRecord FlowRecord::with(Feature f, double v) const {
  auto values = values_;
  values[index_of(f)] = v;
  return FlowRecord(values, label_);
}

FlowRecord FlowRecord::with_label(std::optional<AttackLabel> label) const {
  FlowRecord copy = *this;
  copy.label_ = label;
  return copy;
}

void DatasetSummary::count(const FlowRecord& r) {
  ++record_count;
  ++per_label_counts[r.label().value_or(AttackLabel::Unknown)];
}

nlohmann::json to_json(const DatasetSummary& s) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [label, n] : s.per_label_counts) counts[std::string(render_label(label))] = n;
  return {{"record_count", s.record_count},
          {"per_label_counts", counts},
          {"skipped_count", s.skipped_count}};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_finite(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

DatasetSummary scan_dataset(std::istream& in, const LoadOptions& options,
                            const std::function<void(FlowRecord&&)>& sink) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  std::array<std::optional<std::size_t>, kFeatureCount> column_of{};
  std::optional<std::size_t> label_column;

  std::map<std::string, Feature> overrides;
  for (const auto& [name, f] : options.alias_overrides) overrides.emplace(normalize_key(name), f);
  const auto label_key = normalize_key(options.label_column);

  for (std::size_t col = 0; col < header.size(); ++col) {
    const auto key = normalize_key(header[col]);
    if (key == label_key) {
      label_column = col;
      continue;
    }
    std::optional<Feature> f;
    if (auto it = overrides.find(key); it != overrides.end()) {
      f = it->second;
    } else {
      f = feature_from_name(header[col]);
    }
    if (f && !column_of[index_of(*f)]) column_of[index_of(*f)] = col;
  }

  for (Feature f : all_features()) {
    if (!column_of[index_of(f)]) {
      throw DataError("header lacks registry feature '" + std::string(canonical_name(f)) + "'");
    }
  }
  if (options.require_labels && !label_column) {
    throw DataError("label column '" + options.label_column + "' absent");
  }

  DatasetSummary summary;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    FeatureVector values{};
    bool ok = true;
    for (Feature f : all_features()) {
      const auto col = *column_of[index_of(f)];
      std::optional<double> v;
      if (col < fields.size()) v = parse_finite(fields[col]);
      if (!v) {
        ok = false;
        break;
      }
      values[index_of(f)] = *v;
    }
    std::optional<AttackLabel> label;
    if (label_column) {
      if (*label_column < fields.size()) {
        label = canonicalize_label(trim(fields[*label_column]));
      } else {
        ok = false;
      }
    }
    if (!ok) {
      ++summary.skipped_count;
      continue;
    }
    FlowRecord record(values, label);
    summary.count(record);
    sink(std::move(record));
  }
  return summary;
}

Dataset load_dataset(std::istream& in, const LoadOptions& options) {
  Dataset ds;
  ds.summary = scan_dataset(in, options, [&](FlowRecord&& r) { ds.records.push_back(std::move(r)); });
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError("dataset file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  return load_dataset(in, options);
}

std::string shortest_repr(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_csv(std::ostream& out, std::span<const FlowRecord> records,
               const std::string& label_column) {
  for (Feature f : all_features()) out << canonical_name(f) << ',';
  out << label_column << '\n';
  for (const auto& r : records) {
    for (Feature f : all_features()) out << shortest_repr(r.value(f)) << ',';
    if (r.label()) out << render_label(*r.label());
    out << '\n';
  }
}

std::vector<FlowRecord> stratified_sample(std::span<const FlowRecord> records,
                                          std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class == 0) throw DataError("n_per_class must be at least 1");

  std::array<std::vector<const FlowRecord*>, kLabelCount> groups;
  for (const auto& r : records) {
    groups[index_of(r.label().value_or(AttackLabel::Unknown))].push_back(&r);
  }

  std::vector<FlowRecord> out;
  for (AttackLabel label : kAllLabels) {
    auto& group = groups[index_of(label)];
    if (group.empty()) continue;
    std::sort(group.begin(), group.end(),
              [](const FlowRecord* a, const FlowRecord* b) { return a->values() < b->values(); });
    Rng rng(mix64(seed ^ mix64(index_of(label) + 1)));
    const auto take = std::min(n_per_class, group.size());
    // Partial Fisher-Yates: positions [0, take) end up holding the selection.
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(group[i], group[i + rng.index(group.size() - i)]);
      out.push_back(*group[i]);
    }
  }
  return out;
}

}  // namespace kbforge
