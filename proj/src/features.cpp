#include "kbforge/features.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <utility>

namespace kbforge {

namespace {

struct FeatureInfo {
  Feature feature;
  std::string_view canonical;
  std::string_view display;
};

constexpr std::array<FeatureInfo, kFeatureCount> kRegistry = {{
    {Feature::FlowDuration, "Flow Duration", "Flow Duration"},
    {Feature::HeaderLength, "Header Length", "Header Length"},
    {Feature::ProtocolType, "Protocol Type", "Protocol Type"},
    {Feature::Duration, "Duration", "Duration (TTL)"},
    {Feature::Rate, "Rate", "Rate"},
    {Feature::Srate, "Srate", "Source Rate (Srate)"},
    {Feature::Drate, "Drate", "Destination Rate (Drate)"},
    {Feature::FinFlagNumber, "FIN Flag Number", "FIN Flag Number"},
    {Feature::SynFlagNumber, "SYN Flag Number", "SYN Flag Number"},
    {Feature::RstFlagNumber, "RST Flag Number", "RST Flag Number"},
    {Feature::PshFlagNumber, "PSH Flag Number", "PSH Flag Number"},
    {Feature::AckFlagNumber, "ACK Flag Number", "ACK Flag Number"},
    {Feature::EceFlagNumber, "ECE Flag Number", "ECE Flag Number"},
    {Feature::CwrFlagNumber, "CWR Flag Number", "CWR Flag Number"},
    {Feature::AckCount, "ACK Count", "ACK Count"},
    {Feature::SynCount, "SYN Count", "SYN Count"},
    {Feature::FinCount, "FIN Count", "FIN Count"},
    {Feature::UrgCount, "URG Count", "URG Count"},
    {Feature::RstCount, "RST Count", "RST Count"},
    {Feature::Http, "HTTP", "HTTP Indicator"},
    {Feature::Https, "HTTPS", "HTTPS Indicator"},
    {Feature::Dns, "DNS", "DNS Indicator"},
    {Feature::Telnet, "Telnet", "Telnet Indicator"},
    {Feature::Smtp, "SMTP", "SMTP Indicator"},
    {Feature::Ssh, "SSH", "SSH Indicator"},
    {Feature::Irc, "IRC", "IRC Indicator"},
    {Feature::Tcp, "TCP", "TCP Indicator"},
    {Feature::Udp, "UDP", "UDP Indicator"},
    {Feature::Dhcp, "DHCP", "DHCP Indicator"},
    {Feature::Arp, "ARP", "ARP Indicator"},
    {Feature::Icmp, "ICMP", "ICMP Indicator"},
    {Feature::IPv, "IPv", "IP Indicator (IPv)"},
    {Feature::Llc, "LLC", "LLC Indicator"},
    {Feature::TotSum, "Tot sum", "Total Sum of Packets (Tot sum)"},
    {Feature::Min, "Min", "Min Packet Size"},
    {Feature::Max, "Max", "Max Packet Size"},
    {Feature::Avg, "AVG", "Average Packet Size (AVG)"},
    {Feature::Std, "Std", "Packet Size Deviation (Std)"},
    {Feature::TotSize, "Tot size", "Total Size of Packets (Tot size)"},
    {Feature::Iat, "IAT", "Inter-Arrival Time (IAT)"},
    {Feature::Number, "Number", "Number of Packets"},
    {Feature::Magnitude, "Magnitude", "Magnitude"},
    {Feature::Radius, "Radius", "Radius"},
    {Feature::Covariance, "Covariance", "Covariance"},
    {Feature::Variance, "Variance", "Variance"},
    {Feature::Weight, "Weight", "Weight"},
}};

// Spellings beyond the canonical names themselves. Keys are compared after
// normalize_key, so "fin_flag_number" already matches "FIN Flag Number".
constexpr std::array<std::pair<std::string_view, Feature>, 22> kAliases = {{
    {"Magnitue", Feature::Magnitude},
    {"Protocol", Feature::ProtocolType},
    {"Min Packet Size", Feature::Min},
    {"Minimum Packet Size", Feature::Min},
    {"Max Packet Size", Feature::Max},
    {"Maximum Packet Size", Feature::Max},
    {"Average Packet Size", Feature::Avg},
    {"Total Sum of Packets", Feature::TotSum},
    {"Total Size of Packets", Feature::TotSize},
    {"Total Packet Size", Feature::TotSize},
    {"Inter-Arrival Time", Feature::Iat},
    {"Source Rate", Feature::Srate},
    {"Destination Rate", Feature::Drate},
    {"ICMP Indicator", Feature::Icmp},
    {"UDP Indicator", Feature::Udp},
    {"TCP Indicator", Feature::Tcp},
    {"Tot Length", Feature::TotSize},
    {"flow_duration", Feature::FlowDuration},
    {"Header_Length", Feature::HeaderLength},
    {"Packet Rate", Feature::Rate},
    {"TTL", Feature::Duration},
    {"Packets", Feature::Number},
}};

const std::unordered_map<std::string, Feature>& alias_table() {
  static const auto table = [] {
    std::unordered_map<std::string, Feature> m;
    for (const auto& info : kRegistry) {
      m.emplace(normalize_key(info.canonical), info.feature);
      m.emplace(normalize_key(info.display), info.feature);
    }
    for (const auto& [alias, f] : kAliases) m.emplace(normalize_key(alias), f);
    return m;
  }();
  return table;
}

struct LabelInfo {
  AttackLabel label;
  std::string_view rendered;
  std::string_view prose;
};

constexpr std::array<LabelInfo, kLabelCount> kLabels = {{
    {AttackLabel::IcmpFlood, "DDoS-ICMP_Flood", "DDoS ICMP flood"},
    {AttackLabel::UdpFlood, "DDoS-UDP_Flood", "DDoS UDP flood"},
    {AttackLabel::TcpFlood, "DDoS-TCP_Flood", "DDoS TCP flood"},
    {AttackLabel::PshAckFlood, "DDoS-PSHACK_Flood", "DDoS PSHACK flood"},
    {AttackLabel::SynFlood, "DDoS-SYN_Flood", "DDoS SYN flood"},
    {AttackLabel::RstFinFlood, "DDoS-RSTFIN_Flood", "DDoS RSTFIN flood"},
    {AttackLabel::SynonymousIpFlood, "DDoS-SynonymousIP_Flood", "DDoS SynonymousIP flood"},
    {AttackLabel::Normal, "Normal", "normal traffic"},
    {AttackLabel::Unknown, "Unknown", "unknown traffic"},
}};

}  // namespace

std::span<const Feature> all_features() {
  static const auto features = [] {
    std::array<Feature, kFeatureCount> out{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = kRegistry[i].feature;
    return out;
  }();
  return features;
}

std::span<const Feature> features_alphabetical() {
  static const auto features = [] {
    std::array<Feature, kFeatureCount> out{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = kRegistry[i].feature;
    auto lower = [](std::string_view s) {
      std::string r(s);
      for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return r;
    };
    std::sort(out.begin(), out.end(), [&](Feature a, Feature b) {
      return lower(canonical_name(a)) < lower(canonical_name(b));
    });
    return out;
  }();
  return features;
}

std::string_view canonical_name(Feature f) { return kRegistry[index_of(f)].canonical; }

std::string_view display_name(Feature f) { return kRegistry[index_of(f)].display; }

std::string normalize_key(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

std::optional<Feature> feature_from_name(std::string_view raw) {
  const auto& table = alias_table();
  auto it = table.find(normalize_key(raw));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

bool is_flag_feature(Feature f) {
  return index_of(f) >= index_of(Feature::FinFlagNumber) &&
         index_of(f) <= index_of(Feature::RstCount);
}

std::string_view render_label(AttackLabel l) { return kLabels[index_of(l)].rendered; }

std::string_view prose_name(AttackLabel l) { return kLabels[index_of(l)].prose; }

AttackLabel canonicalize_label(std::string_view raw) {
  auto key = normalize_key(raw);
  if (key.starts_with("ddos")) key.erase(0, 4);
  static const std::unordered_map<std::string, AttackLabel> table = {
      {"icmpflood", AttackLabel::IcmpFlood},
      {"udpflood", AttackLabel::UdpFlood},
      {"tcpflood", AttackLabel::TcpFlood},
      {"pshackflood", AttackLabel::PshAckFlood},
      {"synflood", AttackLabel::SynFlood},
      {"rstfinflood", AttackLabel::RstFinFlood},
      {"synonymousipflood", AttackLabel::SynonymousIpFlood},
      {"normal", AttackLabel::Normal},
      {"benign", AttackLabel::Normal},
      {"benigntraffic", AttackLabel::Normal},
      {"unknown", AttackLabel::Unknown},
      {"unknow", AttackLabel::Unknown},
  };
  auto it = table.find(key);
  return it == table.end() ? AttackLabel::Unknown : it->second;
}

}  // namespace kbforge
