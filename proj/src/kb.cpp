#include "kbforge/kb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kbforge/errors.hpp"
#include "kbforge/numfmt.hpp"

namespace kbforge {

std::string_view to_string(KbVariant v) { return v == KbVariant::Long ? "long" : "short"; }

std::string_view to_string(KbSource s) {
  return s == KbSource::Canonical ? "canonical" : "generated";
}

std::string KnowledgeBase::combined() const {
  std::string out;
  const char* separator = variant == KbVariant::Long ? "\n\n" : "\n";
  for (AttackLabel label : kAllLabels) {
    auto it = entries.find(label);
    if (it == entries.end()) continue;
    if (!out.empty()) out += separator;
    out += it->second;
  }
  out += '\n';
  return out;
}

namespace {

std::string_view flag_token(Feature f) {
  switch (f) {
    case Feature::FinFlagNumber:
    case Feature::FinCount:
      return "FIN";
    case Feature::SynFlagNumber:
    case Feature::SynCount:
      return "SYN";
    case Feature::RstFlagNumber:
    case Feature::RstCount:
      return "RST";
    case Feature::PshFlagNumber:
      return "PSH";
    case Feature::AckFlagNumber:
    case Feature::AckCount:
      return "ACK";
    case Feature::EceFlagNumber:
      return "ECE";
    case Feature::CwrFlagNumber:
      return "CWR";
    case Feature::UrgCount:
      return "URG";
    default:
      return canonical_name(f);
  }
}

bool is_flag_number(Feature f) {
  return index_of(f) >= index_of(Feature::FinFlagNumber) &&
         index_of(f) <= index_of(Feature::CwrFlagNumber);
}

std::string magnitude_phrase(Feature f) {
  switch (f) {
    case Feature::Rate:
      return "packet rate";
    case Feature::Srate:
      return "source packet rate";
    case Feature::Drate:
      return "destination packet rate";
    default:
      break;
  }
  if (is_flag_number(f)) return std::string(flag_token(f)) + " flag";
  if (is_flag_feature(f)) return std::string(flag_token(f)) + " counts";
  return std::string(display_name(f));
}

std::string protocol_name(double v) {
  if (v == 1.0) return "ICMP";
  if (v == 6.0) return "TCP";
  if (v == 17.0) return "UDP";
  return format_kb_number(v);
}

}  // namespace

std::string describe(const KeyFeature& key) {
  const auto& d = key.descriptor;
  switch (d.kind) {
    case DescriptorKind::MustEqual:
      if (key.feature == Feature::ProtocolType) return "Protocol: " + protocol_name(d.a);
      return std::string(display_name(key.feature)) + ": " + format_kb_number(d.a);
    case DescriptorKind::High:
      return "High " + magnitude_phrase(key.feature);
    case DescriptorKind::Low:
      return "Low " + magnitude_phrase(key.feature);
    case DescriptorKind::Elevated:
      return "Elevated " + magnitude_phrase(key.feature);
    case DescriptorKind::Range:
      return std::string(display_name(key.feature)) + " between " + format_kb_number(d.a) +
             " and " + format_kb_number(d.b);
    case DescriptorKind::Typical:
      return std::string(display_name(key.feature)) + " near " + format_kb_number(d.a);
  }
  return {};
}

KnowledgeBase render_long_kb(std::span<const AttackProfile> profiles) {
  KnowledgeBase kb;
  kb.variant = KbVariant::Long;
  kb.source = KbSource::Generated;
  for (const auto& profile : profiles) {
    if (profile.ranked_features.empty()) {
      throw DataError("empty profile for " + std::string(render_label(profile.attack)));
    }
    std::string text = "If the attack is " + std::string(prose_name(profile.attack)) +
                       ", it should exhibit the following characteristics:";
    for (const auto& p : profile.ranked_features) {
      text += "\n- ";
      text += display_name(p.feature);
      if (p.is_constant(kConstantTolerance)) {
        text += ": Has to be " + format_kb_number(p.median) + ".";
      } else {
        text += ": Ranges from " + format_kb_number(p.min) + " to " + format_kb_number(p.max) +
                ", commonly at " + format_kb_number(p.median) + ".";
      }
    }
    kb.entries[profile.attack] = std::move(text);
  }
  return kb;
}

KnowledgeBase render_short_kb(const KeyFeatureSet& keys) {
  KnowledgeBase kb;
  kb.variant = KbVariant::Short;
  kb.source = KbSource::Generated;
  for (AttackLabel attack : kAttackLabels) {
    auto it = keys.per_attack.find(attack);
    if (it == keys.per_attack.end() || it->second.empty()) {
      throw DataError("no key features for " + std::string(render_label(attack)));
    }
    const auto& list = it->second;
    std::vector<std::string> phrases;
    for (std::size_t i = 0; i < list.size();) {
      const bool mergeable = list[i].descriptor.kind == DescriptorKind::Elevated &&
                             is_flag_number(list[i].feature);
      if (!mergeable) {
        phrases.push_back(describe(list[i]));
        ++i;
        continue;
      }
      // A run of elevated flag numbers collapses into one phrase:
      // "Elevated PSH and ACK flags".
      std::vector<std::string_view> tokens;
      while (i < list.size() && list[i].descriptor.kind == DescriptorKind::Elevated &&
             is_flag_number(list[i].feature)) {
        tokens.push_back(flag_token(list[i].feature));
        ++i;
      }
      std::string phrase = "Elevated ";
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t > 0) phrase += t + 1 == tokens.size() ? " and " : ", ";
        phrase += tokens[t];
      }
      phrase += tokens.size() == 1 ? " flag" : " flags";
      phrases.push_back(std::move(phrase));
    }
    std::string line(render_label(attack));
    line += ": ";
    for (std::size_t p = 0; p < phrases.size(); ++p) {
      if (p > 0) line += "; ";
      line += phrases[p];
    }
    line += '.';
    kb.entries[attack] = std::move(line);
  }
  return kb;
}

KnowledgeBase canonical_kb(KbVariant variant) {
  KnowledgeBase kb;
  kb.variant = variant;
  kb.source = KbSource::Canonical;
  if (variant == KbVariant::Long) {
    kb.entries[AttackLabel::IcmpFlood] =
        R"kb(If the attack is DDoS ICMP flood, it should exhibit the following characteristics:
- Protocol Type: Has to be 1.0 for ICMP.
- ICMP Indicator: Has to be 1.0 for ICMP.
- Min Packet Size: Ranges from 42.0 to 992.72, commonly at 42.0.
- Magnitude: Intensity ranges from 9.17 to 59.80, with a typical value near 9.17.
- Average Packet Size (AVG): Spans from 42.0 to 1885.5, often around 42.0.
- Total Sum of Packets (Tot sum): Between 42.0 and 19764.8, commonly near 441.0.
- Max Packet Size: Has to be around 42.0.
- Total Size of Packets (Tot size): Has to be 42.0.
- Inter-Arrival Time (IAT): Very high, between 0.0 and 100179851.34, with a median around 83128994.35.)kb";
    kb.entries[AttackLabel::UdpFlood] =
        R"kb(    If the attack is DDoS UDP flood, it should exhibit the following characteristics:
- Protocol Type: Close to 17.0, corresponding to the UDP protocol.
- UDP Indicator: Must be 1.0, confirming the presence of UDP packets."
- Inter-Arrival Time (IAT): Extremely varied, ranging from 4.39e-06 to 99748506.47, with a typical value around 83102993.47, reflecting high-frequency bursts.
- Rate and Source Rate (Srate): Both range from 6.01 to 1569352.19, with a common value near 7480.80, indicating high packet transmission volumes.
- Magnitude: Represents traffic intensity, ranging from 9.97 to 41.16, typically about 10.0.
- Minimum Packet Size (Min): Between 48.74 and 468.37, commonly close to 50.0, reflecting packet-level characteristics.
- Total Packet Size (Tot size): Spans from 49.88 to 1075.46, with a frequent value near 50.0.
- Total Sum of Packets (Tot sum): Ranges from 150.0 to 11576.45, with a typical value around 525.0, capturing the cumulative packet behavior.)kb";
    kb.entries[AttackLabel::TcpFlood] =
        R"kb(    If the attack is DDoS TCP flood, it should exhibit the following characteristics:
    - Protocol Type: Close to 6.0, corresponding to the TCP protocol.
    - PSH Flag Number: Should be 0.0, reflecting minimal push flags in typical TCP flood behavior.
    - TCP Indicator: Often 1.0, confirming the use of the TCP protocol.
    - URG Count: Typically 0.0, indicating no urgency flags in normal TCP traffic.
    - SYN Flag Number: Typically 0.0, showing the absence or minimal use of SYN flags in regular traffic.
    - Flow Duration: Ranges from 0.0 to 1270.90 seconds, often 0.0 in shorter-lived connections characteristic of flood traffic.
    - FIN Count: Typically 0.0, but can reach up to 0.45 in some TCP exchanges.
    - ACK Flag Number: Mostly 0.0, indicating limited acknowledgment flags in standard TCP flood traffic.)kb";
    kb.entries[AttackLabel::PshAckFlood] =
        R"kb('DDoS-PSHACK_Flood': (
    If the attack is DDoS PSHACK flood, it should exhibit the following characteristics:
    - PSH Flag Number: Must be 1.0, indicating the presence of single push flags in the traffic.
    - ACK Flag Number: Often 1.0, but can occasionally be 0.0, distinguishing it from other TCP floods.
    - URG Count: Typically 1.0 but can reach up to 367.51, reflecting the occasional use of urgency flags.
    - RST Count: Usually 1.0, highlighting the frequent use of reset flags in the attack.
    - Inter-Arrival Time (IAT): Ranges from 1.50e-05 to 99998229.53, with a common value around 83318215.96, indicating high-frequency bursts.
    - Total Packet Size (Tot size): Between 53.76 and 1177.9, typically around 54.0, showing consistent packet sizes.
    - Magnitude: Varies in intensity from 10.33 to 40.65, with a common value near 10.39.
    - Average Packet Size (AVG): Ranges from 53.34 to 1079.47, often close to 54.0, showing consistent averages.
    - Maximum Packet Size (Max): Spans from 53.76 to 3022.11, with typical values around 54.0.
))kb";
  } else {
    kb.entries[AttackLabel::IcmpFlood] =
        "DDoS-ICMP_Flood: Protocol: ICMP; High packet rate; Low Inter-Arrival Time (IAT).";
    kb.entries[AttackLabel::UdpFlood] = "DDoS-UDP_Flood: Protocol: UDP; High packet rate; Low IAT.";
    kb.entries[AttackLabel::TcpFlood] =
        "DDoS-TCP_Flood: Protocol: TCP; High packet rate; Elevated SYN flag.";
    kb.entries[AttackLabel::PshAckFlood] = "DDoS-PSHACK_Flood: Elevated PSH and ACK flags.";
    kb.entries[AttackLabel::SynFlood] = "DDoS-SYN_Flood Elevated SYN flag.";
    kb.entries[AttackLabel::RstFinFlood] = "DDoS-RSTFIN_Flood: Elevated RST and FIN flags.";
    kb.entries[AttackLabel::SynonymousIpFlood] =
        "DDoS-SynonymousIP_Flood: Multiple source IPs; High SYN counts.";
  }
  return kb;
}

namespace {

double lower_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

double separation(const FeatureProfile& a, const FeatureProfile& b) {
  const bool a_contains_b = a.min <= b.min && b.max <= a.max;
  const bool b_contains_a = b.min <= a.min && a.max <= b.max;
  if (a_contains_b || b_contains_a) return 0.0;
  const double width = std::max(a.max, b.max) - std::min(a.min, b.min);
  if (width <= 0.0) return 0.0;
  const double mid_a = (a.min + a.max) / 2.0;
  const double mid_b = (b.min + b.max) / 2.0;
  return std::fabs(mid_a - mid_b) / width;
}

}  // namespace

KeyFeatureSet derive_key_features(std::span<const AttackProfile> profiles) {
  if (profiles.size() < 2) throw DataError("key features need at least two attack profiles");

  KeyFeatureSet keys;
  for (const auto& profile : profiles) {
    struct Scored {
      std::size_t rank;
      double score;
    };
    std::vector<Scored> scored;
    for (std::size_t rank = 0; rank < profile.ranked_features.size(); ++rank) {
      const auto& mine = profile.ranked_features[rank];
      double total = 0.0;
      std::size_t others = 0;
      for (const auto& other : profiles) {
        if (other.attack == profile.attack) continue;
        if (const auto* theirs = other.find(mine.feature)) {
          total += separation(mine, *theirs);
          ++others;
        }
      }
      scored.push_back({rank, others ? total / static_cast<double>(others) : 0.0});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });

    auto& list = keys.per_attack[profile.attack];
    for (std::size_t i = 0; i < std::min<std::size_t>(3, scored.size()); ++i) {
      const auto& p = profile.ranked_features[scored[i].rank];
      KeyFeature key{p.feature, {}};
      if (p.is_constant(kConstantTolerance)) {
        key.descriptor = {DescriptorKind::MustEqual, p.median, 0.0};
      } else {
        std::vector<double> medians;
        for (const auto& other : profiles) {
          if (const auto* q = other.find(p.feature)) medians.push_back(q->median);
        }
        const double cross = lower_median(medians);
        if (medians.size() > 1 && p.median > cross) {
          key.descriptor = {is_flag_feature(p.feature) ? DescriptorKind::Elevated : DescriptorKind::High,
                            0.0, 0.0};
        } else if (medians.size() > 1 && p.median < cross) {
          key.descriptor = {DescriptorKind::Low, 0.0, 0.0};
        } else {
          key.descriptor = {DescriptorKind::Range, p.min, p.max};
        }
      }
      list.push_back(key);
    }
  }
  return keys;
}

KeyFeatureSet canonical_key_features() {
  using F = Feature;
  using K = DescriptorKind;
  KeyFeatureSet keys;
  keys.per_attack[AttackLabel::IcmpFlood] = {
      {F::ProtocolType, {K::MustEqual, 1.0, 0.0}}, {F::Rate, {K::High}}, {F::Iat, {K::Low}}};
  keys.per_attack[AttackLabel::UdpFlood] = {
      {F::ProtocolType, {K::MustEqual, 17.0, 0.0}}, {F::Rate, {K::High}}, {F::Iat, {K::Low}}};
  keys.per_attack[AttackLabel::TcpFlood] = {{F::ProtocolType, {K::MustEqual, 6.0, 0.0}},
                                            {F::Rate, {K::High}},
                                            {F::SynFlagNumber, {K::Elevated}}};
  keys.per_attack[AttackLabel::PshAckFlood] = {{F::PshFlagNumber, {K::Elevated}},
                                               {F::AckFlagNumber, {K::Elevated}}};
  keys.per_attack[AttackLabel::SynFlood] = {{F::SynFlagNumber, {K::Elevated}}};
  keys.per_attack[AttackLabel::RstFinFlood] = {{F::RstFlagNumber, {K::Elevated}},
                                               {F::FinFlagNumber, {K::Elevated}}};
  keys.per_attack[AttackLabel::SynonymousIpFlood] = {{F::SynCount, {K::High}}};
  return keys;
}

StructuredKb structured_kb(std::span<const AttackProfile> profiles) {
  if (profiles.empty()) throw DataError("structured KB needs at least one profile");
  StructuredKb kb;
  for (const auto& profile : profiles) {
    if (profile.ranked_features.empty()) {
      throw DataError("empty profile for " + std::string(render_label(profile.attack)));
    }
    auto& constraints = kb.per_attack[profile.attack];
    for (const auto& p : profile.ranked_features) {
      if (p.is_constant(kConstantTolerance)) {
        constraints.push_back({p.feature, MandatoryEquals{p.median, kConstantTolerance}});
      } else {
        constraints.push_back({p.feature, InRange{p.min, p.max}});
        constraints.push_back(
            {p.feature, TypicalNear{p.median, kTypicalFraction * (p.max - p.min)}});
      }
    }
  }
  return kb;
}

nlohmann::json to_json(const StructuredKb& kb) {
  nlohmann::json attacks = nlohmann::json::object();
  for (const auto& [attack, constraints] : kb.per_attack) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : constraints) {
      nlohmann::json item = {{"feature", std::string(canonical_name(c.feature))}};
      std::visit(
          [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, MandatoryEquals>) {
              item["kind"] = "mandatory_equals";
              item["value"] = k.value;
              item["tolerance"] = k.tolerance;
            } else if constexpr (std::is_same_v<T, InRange>) {
              item["kind"] = "in_range";
              item["lo"] = k.lo;
              item["hi"] = k.hi;
            } else {
              item["kind"] = "typical_near";
              item["value"] = k.value;
              item["tolerance"] = k.tolerance;
            }
          },
          c.kind);
      list.push_back(std::move(item));
    }
    attacks[std::string(render_label(attack))] = std::move(list);
  }
  return {{"per_attack", attacks}};
}

StructuredKb structured_kb_from_json(const nlohmann::json& j) {
  StructuredKb kb;
  for (const auto& [label, list] : j.at("per_attack").items()) {
    const auto attack = canonicalize_label(label);
    if (!is_attack(attack)) throw DataError("structured KB entry for non-attack label: " + label);
    auto& constraints = kb.per_attack[attack];
    for (const auto& item : list) {
      const auto name = item.at("feature").get<std::string>();
      const auto f = feature_from_name(name);
      if (!f) throw DataError("unknown feature in structured KB: " + name);
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "mandatory_equals") {
        constraints.push_back(
            {*f, MandatoryEquals{item.at("value").get<double>(), item.at("tolerance").get<double>()}});
      } else if (kind == "in_range") {
        const double lo = item.at("lo").get<double>();
        const double hi = item.at("hi").get<double>();
        if (lo > hi) throw DataError("in_range constraint with lo > hi for " + name);
        constraints.push_back({*f, InRange{lo, hi}});
      } else if (kind == "typical_near") {
        constraints.push_back(
            {*f, TypicalNear{item.at("value").get<double>(), item.at("tolerance").get<double>()}});
      } else {
        throw DataError("unknown constraint kind: " + kind);
      }
    }
  }
  return kb;
}

nlohmann::json to_json(const KeyFeatureSet& keys) {
  static constexpr const char* kKinds[] = {"must_equal", "high", "low", "elevated", "range", "typical"};
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [attack, list] : keys.per_attack) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& key : list) {
      items.push_back({{"feature", std::string(canonical_name(key.feature))},
                       {"descriptor", kKinds[static_cast<int>(key.descriptor.kind)]},
                       {"a", key.descriptor.a},
                       {"b", key.descriptor.b},
                       {"text", describe(key)}});
    }
    out[std::string(render_label(attack))] = std::move(items);
  }
  return out;
}

std::vector<std::filesystem::path> write_kb_files(const KnowledgeBase& kb,
                                                  const std::filesystem::path& dir) {
  const auto root = dir / std::string(to_string(kb.variant));
  std::filesystem::create_directories(root);
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    written.push_back(path);
  };
  for (const auto& [attack, text] : kb.entries) {
    write(root / (std::string(render_label(attack)) + ".txt"), text + "\n");
  }
  write(root / "combined.txt", kb.combined());
  return written;
}

}  // namespace kbforge
