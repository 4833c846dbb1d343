#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace kbforge {

// Flow features of the CICIoT 2023 schema, in dataset column order.
enum class Feature : std::uint8_t {
  FlowDuration,
  HeaderLength,
  ProtocolType,
  Duration,
  Rate,
  Srate,
  Drate,
  FinFlagNumber,
  SynFlagNumber,
  RstFlagNumber,
  PshFlagNumber,
  AckFlagNumber,
  EceFlagNumber,
  CwrFlagNumber,
  AckCount,
  SynCount,
  FinCount,
  UrgCount,
  RstCount,
  Http,
  Https,
  Dns,
  Telnet,
  Smtp,
  Ssh,
  Irc,
  Tcp,
  Udp,
  Dhcp,
  Arp,
  Icmp,
  IPv,
  Llc,
  TotSum,
  Min,
  Max,
  Avg,
  Std,
  TotSize,
  Iat,
  Number,
  Magnitude,
  Radius,
  Covariance,
  Variance,
  Weight,
};

inline constexpr std::size_t kFeatureCount = 46;

constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }

/// All registry features in column order.
std::span<const Feature> all_features();

/// Registry features sorted by case-insensitive canonical name. This is the
/// order used for every alphabetical tie-break.
std::span<const Feature> features_alphabetical();

std::string_view canonical_name(Feature f);

/// Human-facing name used in long knowledge-base bullets ("Min Packet Size").
std::string_view display_name(Feature f);

/// Lowercase, with spaces, underscores, hyphens and other punctuation removed.
std::string normalize_key(std::string_view raw);

/// Resolves a header or config spelling through the default alias table.
std::optional<Feature> feature_from_name(std::string_view raw);

bool is_flag_feature(Feature f);

enum class AttackLabel : std::uint8_t {
  IcmpFlood,
  UdpFlood,
  TcpFlood,
  PshAckFlood,
  SynFlood,
  RstFinFlood,
  SynonymousIpFlood,
  Normal,
  Unknown,
};

inline constexpr std::size_t kLabelCount = 9;

constexpr std::size_t index_of(AttackLabel l) { return static_cast<std::size_t>(l); }

/// The seven DDoS attack labels in fixed precedence order.
inline constexpr std::array<AttackLabel, 7> kAttackLabels = {
    AttackLabel::IcmpFlood,   AttackLabel::UdpFlood,    AttackLabel::TcpFlood,
    AttackLabel::PshAckFlood, AttackLabel::SynFlood,    AttackLabel::RstFinFlood,
    AttackLabel::SynonymousIpFlood,
};

/// Every label, attacks first, then Normal and Unknown.
inline constexpr std::array<AttackLabel, kLabelCount> kAllLabels = {
    AttackLabel::IcmpFlood,   AttackLabel::UdpFlood,    AttackLabel::TcpFlood,
    AttackLabel::PshAckFlood, AttackLabel::SynFlood,    AttackLabel::RstFinFlood,
    AttackLabel::SynonymousIpFlood, AttackLabel::Normal, AttackLabel::Unknown,
};

constexpr bool is_attack(AttackLabel l) {
  return l != AttackLabel::Normal && l != AttackLabel::Unknown;
}

/// "DDoS-ICMP_Flood", ..., "Normal", "Unknown".
std::string_view render_label(AttackLabel l);

/// "DDoS ICMP flood" as used in long knowledge-base headers.
std::string_view prose_name(AttackLabel l);

/// Total: unmatched input maps to Unknown. Accepts "Unknow", a missing
/// "DDoS-" prefix, any case and any separators. "BenignTraffic" maps to Normal.
AttackLabel canonicalize_label(std::string_view raw);

}  // namespace kbforge
