#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "kbforge/errors.hpp"
#include "kbforge/flow_data.hpp"
#include "kbforge/rng.hpp"
#include "test_support.hpp"

namespace kbforge {
namespace {

using testing::make_record;

std::string header_row(const std::string& label_column = "label") {
  std::string h;
  for (Feature f : all_features()) h += std::string(canonical_name(f)) + ",";
  return h + label_column + "\n";
}

std::string data_row(double fill, const std::string& label) {
  std::string row;
  for (std::size_t i = 0; i < kFeatureCount; ++i) row += std::to_string(fill + i) + ",";
  return row + label + "\n";
}

TEST(FlowRecord, RejectsNonFiniteValues) {
  FeatureVector v{};
  v[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(FlowRecord{v}, DataError);
  v[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(FlowRecord{v}, DataError);
}

TEST(FlowRecord, WithReturnsModifiedCopy) {
  const auto r = make_record({{Feature::Rate, 5.0}}, AttackLabel::UdpFlood);
  const auto s = r.with(Feature::Rate, 7.0);
  EXPECT_EQ(r.value(Feature::Rate), 5.0);
  EXPECT_EQ(s.value(Feature::Rate), 7.0);
  EXPECT_EQ(s.label(), AttackLabel::UdpFlood);
  EXPECT_THROW(r.with(Feature::Rate, std::nan("")), DataError);
}

TEST(LoadDataset, ParsesRowsAndCountsLabels) {
  std::istringstream in(header_row() + data_row(1, "DDoS-ICMP_Flood") +
                        data_row(2, "DDoS-ICMP_Flood") + data_row(3, "BenignTraffic"));
  const auto ds = load_dataset(in);
  ASSERT_EQ(ds.records.size(), 3u);
  EXPECT_EQ(ds.summary.record_count, 3u);
  EXPECT_EQ(ds.summary.per_label_counts.at(AttackLabel::IcmpFlood), 2u);
  EXPECT_EQ(ds.summary.per_label_counts.at(AttackLabel::Normal), 1u);
  EXPECT_EQ(ds.records[0].value(Feature::FlowDuration), 1.0);
  EXPECT_EQ(ds.records[0].value(Feature::Weight), 46.0);
}

TEST(LoadDataset, SkipsBadRowsAndCountsThem) {
  std::string bad = data_row(1, "DDoS-UDP_Flood");
  bad.replace(0, bad.find(','), "nan");
  std::string missing = data_row(1, "DDoS-UDP_Flood");
  missing.replace(0, missing.find(','), "");
  std::istringstream in(header_row() + bad + missing + "1,2,3\n" + data_row(5, "DDoS-UDP_Flood"));
  const auto ds = load_dataset(in);
  EXPECT_EQ(ds.records.size(), 1u);
  EXPECT_EQ(ds.summary.skipped_count, 3u);
}

TEST(LoadDataset, MissingFeatureColumnThrows) {
  std::string header = header_row();
  header.replace(header.find("IAT"), 3, "XYZ");
  std::istringstream in(header + data_row(1, "Normal"));
  EXPECT_THROW(load_dataset(in), DataError);
}

TEST(LoadDataset, MissingLabelColumnThrowsOnlyWhenRequired) {
  const std::string text = header_row("class") + data_row(1, "Normal");
  std::istringstream strict(text);
  EXPECT_THROW(load_dataset(strict), DataError);
  std::istringstream lenient(text);
  LoadOptions options;
  options.require_labels = false;
  const auto ds = load_dataset(lenient, options);
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_FALSE(ds.records[0].label().has_value());
  EXPECT_EQ(ds.summary.per_label_counts.at(AttackLabel::Unknown), 1u);
}

TEST(LoadDataset, AliasHeadersAndBomAreAccepted) {
  std::string header = header_row();
  header.replace(header.find("Magnitude"), 9, "Magnitue");
  header.replace(header.find("Protocol Type"), 13, "protocol_type");
  std::istringstream in("\xEF\xBB\xBF" + header + data_row(1, "DDoS-TCP_Flood"));
  const auto ds = load_dataset(in);
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_EQ(ds.records[0].value(Feature::Magnitude), 1.0 + index_of(Feature::Magnitude));
}

TEST(LoadDataset, AliasOverridesMapCustomHeaders) {
  std::string header = header_row();
  header.replace(header.find("Weight"), 6, "w8");
  std::istringstream in(header + data_row(1, "Normal"));
  LoadOptions options;
  options.alias_overrides["w8"] = Feature::Weight;
  EXPECT_EQ(load_dataset(in, options).records.size(), 1u);
}

TEST(LoadDataset, MissingFileThrows) {
  EXPECT_THROW(load_dataset(std::filesystem::path("/nonexistent/flows.csv")), DataError);
}

TEST(WriteCsv, RoundTripsExactly) {
  Rng rng(7);
  std::vector<FlowRecord> records;
  for (int i = 0; i < 50; ++i) {
    FeatureVector v{};
    for (auto& x : v) x = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-12, 3));
    records.emplace_back(v, kAllLabels[static_cast<std::size_t>(i) % 8]);
  }
  std::ostringstream out;
  write_csv(out, records);
  std::istringstream in(out.str());
  const auto ds = load_dataset(in);
  ASSERT_EQ(ds.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(ds.records[i], records[i]);
}

TEST(StratifiedSample, TakesAtMostNPerClassAndIsOrderIndependent) {
  std::vector<FlowRecord> records;
  for (int i = 0; i < 30; ++i) {
    records.push_back(make_record({{Feature::Rate, double(i)}}, AttackLabel::UdpFlood));
  }
  for (int i = 0; i < 4; ++i) {
    records.push_back(make_record({{Feature::Rate, double(100 + i)}}, AttackLabel::Normal));
  }
  const auto a = stratified_sample(records, 10, 99);
  std::vector<FlowRecord> reversed(records.rbegin(), records.rend());
  const auto b = stratified_sample(reversed, 10, 99);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 14u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a[i].label(), AttackLabel::UdpFlood);
  for (std::size_t i = 10; i < 14; ++i) EXPECT_EQ(a[i].label(), AttackLabel::Normal);
  EXPECT_NE(stratified_sample(records, 10, 100), a);
  EXPECT_THROW(stratified_sample(records, 0, 1), DataError);
}

TEST(SplitCsvLine, HandlesQuotes) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",d"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(split_csv_line("\"x\"\"y\","), (std::vector<std::string>{"x\"y", ""}));
}

TEST(ShortestRepr, ParsesBackIdentically) {
  for (double v : {0.1, 1.0 / 3.0, 4.39e-06, 83128994.35, -0.0, 1e300}) {
    EXPECT_EQ(std::stod(shortest_repr(v)), v);
  }
}

}  // namespace
}  // namespace kbforge
