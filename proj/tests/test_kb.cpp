#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kbforge/errors.hpp"
#include "kbforge/kb.hpp"
#include "kbforge/numfmt.hpp"
#include "test_support.hpp"

namespace kbforge {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::filesystem::path kGolden = KBFORGE_GOLDEN_DIR;

TEST(NumberFormat, KbStyle) {
  EXPECT_EQ(format_kb_number(42.0), "42.0");
  EXPECT_EQ(format_kb_number(992.72), "992.72");
  EXPECT_EQ(format_kb_number(1569352.1), "1569352.1");
  EXPECT_EQ(format_kb_number(9.166), "9.17");
  EXPECT_EQ(format_kb_number(0.0), "0.0");
  EXPECT_EQ(format_kb_number(4.39e-06), "4.39e-06");
  EXPECT_EQ(format_kb_number(-0.0), "0.0");
  EXPECT_EQ(format_plain_number(450.0), "450");
  EXPECT_EQ(format_plain_number(0.5), "0.5");
  EXPECT_EQ(format_percent(0.978), "97.80%");
  EXPECT_EQ(format_percent(1.0), "100.00%");
}

TEST(CanonicalKb, LongMatchesGoldenFiles) {
  const auto kb = canonical_kb(KbVariant::Long);
  EXPECT_EQ(kb.source, KbSource::Canonical);
  ASSERT_EQ(kb.entries.size(), 4u);
  for (const auto& [label, text] : kb.entries) {
    EXPECT_EQ(text + "\n", read_file(kGolden / "long" / (std::string(render_label(label)) + ".txt")))
        << render_label(label);
  }
  EXPECT_EQ(kb.combined(), read_file(kGolden / "long" / "combined.txt"));
}

TEST(CanonicalKb, ShortMatchesGoldenFiles) {
  const auto kb = canonical_kb(KbVariant::Short);
  ASSERT_EQ(kb.entries.size(), 7u);
  for (const auto& [label, text] : kb.entries) {
    EXPECT_EQ(text + "\n",
              read_file(kGolden / "short" / (std::string(render_label(label)) + ".txt")));
  }
  EXPECT_EQ(kb.combined(), read_file(kGolden / "short" / "combined.txt"));
}

TEST(CanonicalKb, EntriesAreLfOnly) {
  for (auto v : {KbVariant::Long, KbVariant::Short}) {
    for (const auto& [label, text] : canonical_kb(v).entries) {
      EXPECT_EQ(text.find('\r'), std::string::npos);
      EXPECT_NE(text.back(), '\n');
    }
  }
}

TEST(RenderLongKb, ConstantAndRangedBullets) {
  const std::vector<AttackProfile> profiles = {
      {AttackLabel::IcmpFlood,
       2,
       {{Feature::ProtocolType, 1, 1, 1}, {Feature::Min, 42.0, 42.0, 992.72}}}};
  const auto kb = render_long_kb(profiles);
  EXPECT_EQ(kb.variant, KbVariant::Long);
  EXPECT_EQ(kb.source, KbSource::Generated);
  EXPECT_EQ(kb.entries.at(AttackLabel::IcmpFlood),
            "If the attack is DDoS ICMP flood, it should exhibit the following characteristics:\n"
            "- Protocol Type: Has to be 1.0.\n"
            "- Min Packet Size: Ranges from 42.0 to 992.72, commonly at 42.0.");
}

TEST(RenderLongKb, EmptyProfileThrows) {
  const std::vector<AttackProfile> profiles = {{AttackLabel::IcmpFlood, 10, {}}};
  EXPECT_THROW(render_long_kb(profiles), DataError);
}

TEST(RenderShortKb, CanonicalKeysReproduceReferenceLinesWithLabelColon) {
  const auto kb = render_short_kb(canonical_key_features());
  const auto ref = canonical_kb(KbVariant::Short);
  for (AttackLabel a : kAttackLabels) {
    if (a == AttackLabel::UdpFlood || a == AttackLabel::SynFlood ||
        a == AttackLabel::SynonymousIpFlood) {
      continue;
    }
    EXPECT_EQ(kb.entries.at(a), ref.entries.at(a)) << render_label(a);
  }
  // The reference UDP line abbreviates IAT, the SYN line lacks the colon, and
  // "Multiple source IPs" has no flow feature behind it.
  EXPECT_EQ(kb.entries.at(AttackLabel::UdpFlood),
            "DDoS-UDP_Flood: Protocol: UDP; High packet rate; Low Inter-Arrival Time (IAT).");
  EXPECT_EQ(kb.entries.at(AttackLabel::SynFlood), "DDoS-SYN_Flood: Elevated SYN flag.");
  EXPECT_EQ(kb.entries.at(AttackLabel::SynonymousIpFlood),
            "DDoS-SynonymousIP_Flood: High SYN counts.");
}

TEST(RenderShortKb, MissingAttackThrows) {
  auto keys = canonical_key_features();
  keys.per_attack.erase(AttackLabel::RstFinFlood);
  EXPECT_THROW(render_short_kb(keys), DataError);
}

TEST(Describe, Vocabulary) {
  EXPECT_EQ(describe({Feature::ProtocolType, {DescriptorKind::MustEqual, 17, 0}}), "Protocol: UDP");
  EXPECT_EQ(describe({Feature::Udp, {DescriptorKind::MustEqual, 1, 0}}), "UDP Indicator: 1.0");
  EXPECT_EQ(describe({Feature::Iat, {DescriptorKind::Low}}), "Low Inter-Arrival Time (IAT)");
  EXPECT_EQ(describe({Feature::SynCount, {DescriptorKind::High}}), "High SYN counts");
  EXPECT_EQ(describe({Feature::Min, {DescriptorKind::Range, 48.74, 468.37}}),
            "Min Packet Size between 48.74 and 468.37");
}

TEST(DeriveKeyFeatures, ReferenceProfiles) {
  const auto profiles = reference_profiles();
  const auto keys = derive_key_features(profiles);
  ASSERT_EQ(keys.per_attack.size(), 4u);
  for (const auto& [attack, list] : keys.per_attack) {
    EXPECT_GE(list.size(), 1u);
    EXPECT_LE(list.size(), 3u);
  }
  // Protocol Type is pinned to 1 for ICMP and 6 for TCP and separates them
  // from every other attack that profiles it.
  const auto& icmp = keys.per_attack.at(AttackLabel::IcmpFlood);
  EXPECT_EQ(icmp.front(), (KeyFeature{Feature::ProtocolType, {DescriptorKind::MustEqual, 1, 0}}));
  const auto& tcp = keys.per_attack.at(AttackLabel::TcpFlood);
  EXPECT_NE(std::find(tcp.begin(), tcp.end(),
                      KeyFeature{Feature::ProtocolType, {DescriptorKind::MustEqual, 6, 0}}),
            tcp.end());
}

// Independent reimplementation of the separation score.
double oracle_separation(const AttackProfile& self, Feature f,
                         const std::vector<AttackProfile>& all) {
  const auto* mine = self.find(f);
  double sum = 0;
  int n = 0;
  for (const auto& other : all) {
    if (other.attack == self.attack) continue;
    const auto* theirs = other.find(f);
    if (!theirs) continue;
    ++n;
    const bool nested = (mine->min <= theirs->min && theirs->max <= mine->max) ||
                        (theirs->min <= mine->min && mine->max <= theirs->max);
    if (nested) continue;
    const double width = std::max(mine->max, theirs->max) - std::min(mine->min, theirs->min);
    sum += std::abs((mine->min + mine->max) / 2 - (theirs->min + theirs->max) / 2) / width;
  }
  return n ? sum / n : 0.0;
}

TEST(DeriveKeyFeatures, PicksHighestSeparationScores) {
  const auto profiles = reference_profiles();
  const auto keys = derive_key_features(profiles);
  for (const auto& p : profiles) {
    const auto& chosen = keys.per_attack.at(p.attack);
    double worst_chosen = 1e9;
    for (const auto& k : chosen) worst_chosen = std::min(worst_chosen, oracle_separation(p, k.feature, profiles));
    for (const auto& fp : p.ranked_features) {
      const bool picked = std::any_of(chosen.begin(), chosen.end(),
                                      [&](const KeyFeature& k) { return k.feature == fp.feature; });
      if (!picked) EXPECT_LE(oracle_separation(p, fp.feature, profiles), worst_chosen);
    }
  }
}

TEST(DeriveKeyFeatures, NeedsTwoProfiles) {
  const auto profiles = reference_profiles();
  EXPECT_THROW(derive_key_features(std::span(profiles).first(1)), DataError);
}

TEST(StructuredKb, ConstraintShapes) {
  const std::vector<AttackProfile> profiles = {
      {AttackLabel::IcmpFlood,
       2,
       {{Feature::ProtocolType, 1, 1, 1}, {Feature::Min, 42.0, 42.0, 992.72}}}};
  const auto kb = structured_kb(profiles);
  const auto& c = kb.per_attack.at(AttackLabel::IcmpFlood);
  ASSERT_EQ(c.size(), 3u);
  const auto& m = std::get<MandatoryEquals>(c[0].kind);
  EXPECT_EQ(m.value, 1.0);
  EXPECT_EQ(m.tolerance, kConstantTolerance);
  const auto& r = std::get<InRange>(c[1].kind);
  EXPECT_EQ(r.lo, 42.0);
  EXPECT_EQ(r.hi, 992.72);
  const auto& t = std::get<TypicalNear>(c[2].kind);
  EXPECT_EQ(t.value, 42.0);
  EXPECT_DOUBLE_EQ(t.tolerance, 0.05 * (992.72 - 42.0));
  EXPECT_THROW(structured_kb({}), DataError);
}

TEST(StructuredKb, JsonRoundTrip) {
  const auto profiles = reference_profiles();
  const auto kb = structured_kb(profiles);
  const auto j = to_json(kb);
  EXPECT_EQ(to_json(structured_kb_from_json(j)), j);
}

TEST(WriteKbFiles, LayoutAndContent) {
  testing::TempDir dir("kbfiles");
  const auto kb = canonical_kb(KbVariant::Short);
  const auto written = write_kb_files(kb, dir.path());
  EXPECT_EQ(written.size(), 8u);
  EXPECT_EQ(read_file(dir.path() / "short" / "combined.txt"), kb.combined());
  EXPECT_EQ(read_file(dir.path() / "short" / "DDoS-UDP_Flood.txt"),
            "DDoS-UDP_Flood: Protocol: UDP; High packet rate; Low IAT.\n");
}

TEST(ReferenceProfiles, WellFormed) {
  const auto profiles = reference_profiles();
  ASSERT_EQ(profiles.size(), 4u);
  for (const auto& p : profiles) {
    EXPECT_LE(p.ranked_features.size(), kDefaultTopK);
    for (const auto& f : p.ranked_features) {
      EXPECT_LE(f.min, f.median);
      EXPECT_LE(f.median, f.max);
    }
  }
  const auto* icmp_min = profiles[0].find(Feature::Min);
  ASSERT_NE(icmp_min, nullptr);
  EXPECT_EQ(icmp_min->median, 42.0);
  EXPECT_TRUE(profiles[0].find(Feature::ProtocolType)->is_constant());
}

}  // namespace
}  // namespace kbforge
