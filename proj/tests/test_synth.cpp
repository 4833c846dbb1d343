#include <gtest/gtest.h>

#include <sstream>

#include "kbforge/detectors.hpp"
#include "kbforge/errors.hpp"
#include "kbforge/synth.hpp"

namespace kbforge {
namespace {

SynthSpec spec_with(double jitter, std::size_t n, std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.profiles = reference_profiles();
  spec.jitter = jitter;
  spec.n_per_attack = n;
  spec.seed = seed;
  return spec;
}

TEST(GenerateFlow, IcmpAtZeroJitterIsMedianExact) {
  const auto r = generate_flow(spec_with(0.0, 1), AttackLabel::IcmpFlood, 0);
  EXPECT_EQ(r.value(Feature::ProtocolType), 1.0);
  EXPECT_EQ(r.value(Feature::Icmp), 1.0);
  EXPECT_EQ(r.value(Feature::Min), 42.0);
  EXPECT_EQ(r.value(Feature::TotSum), 441.0);
  EXPECT_EQ(r.value(Feature::Iat), 83128994.35);
  EXPECT_EQ(r.label(), AttackLabel::IcmpFlood);
}

TEST(GenerateFlow, FullJitterStaysInsideBounds) {
  const auto spec = spec_with(1.0, 1, 77);
  const auto background = default_background();
  for (const auto& p : spec.profiles) {
    for (std::size_t i = 0; i < 300; ++i) {
      const auto r = generate_flow(spec, p.attack, i);
      for (Feature f : all_features()) {
        const double v = r.value(f);
        ASSERT_TRUE(std::isfinite(v));
        if (const auto* fp = p.find(f)) {
          EXPECT_GE(v, fp->min);
          EXPECT_LE(v, fp->max);
        } else {
          EXPECT_GE(v, background.at(f).lo);
          EXPECT_LE(v, background.at(f).hi);
        }
      }
    }
  }
}

TEST(GenerateFlow, JitterBoundedBySmallerHalfWidth) {
  const auto spec = spec_with(0.3, 1, 5);
  const auto& udp = spec.profiles[1];
  const auto* rate = udp.find(Feature::Rate);
  const double half = 0.3 * std::min(rate->median - rate->min, rate->max - rate->median);
  for (std::size_t i = 0; i < 200; ++i) {
    const double v = generate_flow(spec, AttackLabel::UdpFlood, i).value(Feature::Rate);
    EXPECT_LE(std::abs(v - rate->median), half * (1 + 1e-12));
  }
}

TEST(GenerateFlow, Deterministic) {
  const auto spec = spec_with(0.3, 1, 9);
  EXPECT_EQ(generate_flow(spec, AttackLabel::TcpFlood, 17), generate_flow(spec, AttackLabel::TcpFlood, 17));
  EXPECT_NE(generate_flow(spec, AttackLabel::TcpFlood, 17), generate_flow(spec, AttackLabel::TcpFlood, 18));
  EXPECT_NE(generate_flow(spec, AttackLabel::TcpFlood, 17),
            generate_flow(spec_with(0.3, 1, 10), AttackLabel::TcpFlood, 17));
}

TEST(GenerateFlow, MissingProfileThrows) {
  EXPECT_THROW(generate_flow(spec_with(0.3, 1), AttackLabel::SynFlood, 0), DataError);
}

TEST(GenerateFlow, BackgroundOverride) {
  auto spec = spec_with(0.0, 1);
  spec.background[Feature::Weight] = {7.0, 7.0};
  EXPECT_EQ(generate_flow(spec, AttackLabel::UdpFlood, 3).value(Feature::Weight), 7.0);
}

TEST(GenerateDataset, CountsAndOrder) {
  const auto ds = generate_dataset(spec_with(0.3, 200));
  ASSERT_EQ(ds.records.size(), 800u);
  EXPECT_EQ(ds.summary.record_count, 800u);
  for (AttackLabel a : {AttackLabel::IcmpFlood, AttackLabel::UdpFlood, AttackLabel::TcpFlood,
                        AttackLabel::PshAckFlood}) {
    EXPECT_EQ(ds.summary.per_label_counts.at(a), 200u);
  }
  EXPECT_EQ(ds.records[0].label(), AttackLabel::IcmpFlood);
  EXPECT_EQ(ds.records[799].label(), AttackLabel::PshAckFlood);
}

TEST(GenerateDataset, SingleRecordPerAttackIsMedianExact) {
  const auto spec = spec_with(0.0, 1);
  const auto ds = generate_dataset(spec);
  ASSERT_EQ(ds.records.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    for (const auto& fp : spec.profiles[i].ranked_features) {
      EXPECT_EQ(ds.records[i].value(fp.feature), fp.median);
    }
  }
}

TEST(GenerateDataset, ZeroJitterIsPerfectForRuleOracle) {
  const auto spec = spec_with(0.0, 50, 21);
  const auto kb = structured_kb(spec.profiles);
  for (const auto& r : generate_dataset(spec).records) {
    EXPECT_EQ(rule_oracle_classify(r, kb), r.label());
  }
}

TEST(GenerateDataset, CsvRoundTrip) {
  const auto ds = generate_dataset(spec_with(0.7, 20, 4));
  std::ostringstream out;
  write_csv(out, ds.records);
  std::istringstream in(out.str());
  EXPECT_EQ(load_dataset(in).records, ds.records);
}

TEST(SynthSpec, Validation) {
  auto s = spec_with(0.3, 0);
  EXPECT_THROW(s.validate(), ConfigError);
  s = spec_with(1.5, 1);
  EXPECT_THROW(s.validate(), ConfigError);
  s = spec_with(0.3, 1);
  s.profiles.push_back(s.profiles[0]);
  EXPECT_THROW(s.validate(), ConfigError);
  s = spec_with(0.3, 1);
  s.background[Feature::Rate] = {5.0, 1.0};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(DefaultBackground, CoversEveryFeatureWithBenignFlags) {
  const auto bg = default_background();
  EXPECT_EQ(bg.size(), kFeatureCount);
  for (Feature f : {Feature::SynFlagNumber, Feature::PshFlagNumber, Feature::Tcp, Feature::Udp,
                    Feature::Icmp, Feature::ProtocolType}) {
    EXPECT_EQ(bg.at(f).lo, 0.0);
    EXPECT_EQ(bg.at(f).hi, 0.0);
  }
}

}  // namespace
}  // namespace kbforge
