#include "kbforge/prompting.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "kbforge/errors.hpp"
#include "kbforge/numfmt.hpp"

namespace kbforge {

std::string_view to_string(QualTag tag) {
  switch (tag) {
    case QualTag::High:
      return "High";
    case QualTag::Low:
      return "Low";
    case QualTag::Elevated:
      return "Elevated";
    case QualTag::Normal:
      return "Normal";
  }
  return "Normal";
}

void QualitativeThresholds::validate() const {
  if (!std::isfinite(rate_high) || !std::isfinite(iat_low) || !std::isfinite(flag_elevated)) {
    throw ConfigError("qualitative thresholds must be finite");
  }
}

QualitativeThresholds derive_thresholds(std::span<const AttackProfile> profiles,
                                        std::span<const FlowRecord> normal_traffic) {
  QualitativeThresholds t;
  std::vector<double> medians;
  for (const auto& p : profiles) {
    if (const auto* rate = p.find(Feature::Rate)) medians.push_back(rate->median);
  }
  if (!medians.empty()) {
    std::sort(medians.begin(), medians.end());
    t.rate_high = medians[(medians.size() - 1) / 2];
  }
  if (!normal_traffic.empty()) {
    std::vector<double> iat;
    iat.reserve(normal_traffic.size());
    for (const auto& r : normal_traffic) iat.push_back(r.value(Feature::Iat));
    std::sort(iat.begin(), iat.end());
    t.iat_low = iat[(iat.size() - 1) / 4];
  }
  return t;
}

namespace {

std::string protocol_name(const FlowRecord& r) {
  const double proto = r.value(Feature::ProtocolType);
  if (proto == 1.0) return "ICMP";
  if (proto == 6.0) return "TCP";
  if (proto == 17.0) return "UDP";
  if (r.value(Feature::Tcp) >= 0.5) return "TCP";
  if (r.value(Feature::Udp) >= 0.5) return "UDP";
  if (r.value(Feature::Icmp) >= 0.5) return "ICMP";
  return format_plain_number(proto);
}

constexpr std::array<std::pair<const char*, Feature>, 5> kFlagBlock = {{
    {"SYN", Feature::SynFlagNumber},
    {"PSH", Feature::PshFlagNumber},
    {"ACK", Feature::AckFlagNumber},
    {"RST", Feature::RstFlagNumber},
    {"FIN", Feature::FinFlagNumber},
}};

}  // namespace

std::string describe_flow(const FlowRecord& record, const PromptOptions& options) {
  std::string out = "Network Traffic Data:\n";
  if (options.mode == FlowRenderMode::Numeric) {
    std::span<const Feature> features = options.features;
    if (features.empty()) features = all_features();
    for (Feature f : features) {
      out += "- ";
      out += display_name(f);
      out += ": " + format_plain_number(record.value(f)) + "\n";
    }
    return out;
  }

  const auto& t = options.thresholds;
  const double rate = record.value(Feature::Rate);
  const double iat = record.value(Feature::Iat);
  out += "- Protocol Type: " + protocol_name(record) + "\n";
  out += "- Packet Rate: " + format_plain_number(rate) + " packets/sec (" +
         std::string(to_string(t.rate_tag(rate))) + ")\n";
  out += "- Inter-Arrival Time (IAT): " + std::string(to_string(t.iat_tag(iat))) + "\n";
  out += "- TCP Flags:\n";
  for (const auto& [name, feature] : kFlagBlock) {
    out += "    - ";
    out += name;
    out += ": " + std::string(to_string(t.flag_tag(record.value(feature)))) + "\n";
  }
  return out;
}

std::span<const AttackLabel> option_labels() {
  static constexpr std::array<AttackLabel, kLabelCount> kOptions = {
      AttackLabel::IcmpFlood,   AttackLabel::UdpFlood,          AttackLabel::TcpFlood,
      AttackLabel::PshAckFlood, AttackLabel::SynFlood,          AttackLabel::RstFinFlood,
      AttackLabel::SynonymousIpFlood, AttackLabel::Unknown, AttackLabel::Normal,
  };
  return kOptions;
}

std::string instruction_sentence() {
  std::string s =
      "Based on the knowledge base, determine the most likely attack type from the following "
      "list: (";
  bool first = true;
  for (AttackLabel l : option_labels()) {
    if (!first) s += ", ";
    s += render_label(l);
    first = false;
  }
  s += ").";
  return s;
}

Prompt build_prompt(const FlowRecord& record, const KnowledgeBase* kb,
                    const PromptOptions& options) {
  Prompt p;
  if (kb != nullptr) {
    p.kb_variant = kb->variant;
    p.text += "Knowledge Base:\n";
    p.text += kb->combined();
    p.text += "\n";
  }
  p.text += describe_flow(record, options);
  p.text += "\n";
  p.text += instruction_sentence();
  p.text += "\nAnswer with exactly one label from the list and nothing else.\n";
  p.record_digest = record_digest(record);
  return p;
}

std::string record_digest(const FlowRecord& record) {
  std::string canonical;
  for (Feature f : all_features()) {
    canonical += canonical_name(f);
    canonical += '=';
    canonical += shortest_repr(record.value(f));
    canonical += '\n';
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xF];
  }
  return hex;
}

namespace {

struct LabelCore {
  std::string_view core;
  AttackLabel label;
};

constexpr std::array<LabelCore, 10> kCores = {{
    {"icmpflood", AttackLabel::IcmpFlood},
    {"udpflood", AttackLabel::UdpFlood},
    {"tcpflood", AttackLabel::TcpFlood},
    {"pshackflood", AttackLabel::PshAckFlood},
    {"synflood", AttackLabel::SynFlood},
    {"rstfinflood", AttackLabel::RstFinFlood},
    {"synonymousipflood", AttackLabel::SynonymousIpFlood},
    {"normal", AttackLabel::Normal},
    {"unknown", AttackLabel::Unknown},
    {"unknow", AttackLabel::Unknown},
}};

constexpr std::size_t kMaxWordsPerLabel = 6;

std::optional<AttackLabel> match_core(std::string_view joined) {
  if (joined.substr(0, 4) == "ddos") {
    for (const auto& c : kCores) {
      if (joined.substr(4) == c.core) return c.label;
    }
  }
  for (const auto& c : kCores) {
    if (joined == c.core) return c.label;
  }
  return std::nullopt;
}

}  // namespace

AttackLabel parse_response(std::string_view text) {
  // Words are maximal alphanumeric runs; a label may span several adjacent
  // words ("DDoS-SYN_Flood" -> ddos, syn, flood).
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc)) {
      current += static_cast<char>(std::tolower(uc));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));

  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string joined;
    std::optional<AttackLabel> longest;
    for (std::size_t j = i; j < words.size() && j < i + kMaxWordsPerLabel; ++j) {
      joined += words[j];
      if (auto hit = match_core(joined)) longest = hit;
    }
    if (longest) return *longest;
  }
  return AttackLabel::Unknown;
}

}  // namespace kbforge
