#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbforge/flow_data.hpp"
#include "kbforge/kb.hpp"

namespace kbforge {

enum class FlowRenderMode { Numeric, Qualitative };

enum class QualTag { High, Low, Elevated, Normal };

std::string_view to_string(QualTag tag);

/// Cutoffs for the qualitative flow rendering. Every tag function is total:
///   Rate/Srate: High if value > rate_high, else Normal
///   IAT:        Low  if value < iat_low,   else Normal
///   flags:      Elevated if value >= flag_elevated, else Normal
struct QualitativeThresholds {
  double rate_high = 7480.8;
  double iat_low = 2.0e7;
  double flag_elevated = 0.5;

  /// Throws ConfigError on a non-finite cutoff.
  void validate() const;

  QualTag rate_tag(double v) const { return v > rate_high ? QualTag::High : QualTag::Normal; }
  QualTag iat_tag(double v) const { return v < iat_low ? QualTag::Low : QualTag::Normal; }
  QualTag flag_tag(double v) const {
    return v >= flag_elevated ? QualTag::Elevated : QualTag::Normal;
  }
};

/// rate_high: median of the Rate medians over the attack profiles that carry
/// Rate. iat_low: 25th percentile (lower) of IAT over `normal_traffic`.
/// Either falls back to the default when its source is empty.
QualitativeThresholds derive_thresholds(std::span<const AttackProfile> profiles,
                                        std::span<const FlowRecord> normal_traffic);

struct PromptOptions {
  FlowRenderMode mode = FlowRenderMode::Qualitative;
  QualitativeThresholds thresholds;
  /// Numeric mode only: features to list, in order. Empty lists all.
  std::vector<Feature> features;
};

/// "Network Traffic Data:" block. Numeric: "- <Name>: <value>" per feature.
/// Qualitative: protocol name, packet rate with tag, IAT tag, TCP flag block.
std::string describe_flow(const FlowRecord& record, const PromptOptions& options = {});

struct Prompt {
  std::string text;
  std::optional<KbVariant> kb_variant;
  std::string record_digest;
};

/// The nine answer options in prompt order: seven attacks, Unknown, Normal.
std::span<const AttackLabel> option_labels();

/// "Based on the knowledge base, ... from the following list: (...)."
std::string instruction_sentence();

/// Optional "Knowledge Base:" section, the flow description, the instruction
/// with the option list, and a one-label answer directive.
Prompt build_prompt(const FlowRecord& record, const KnowledgeBase* kb,
                    const PromptOptions& options = {});

/// Hex SHA-256 of "<canonical name>=<shortest repr>\n" over all features in
/// column order. Labels are not part of the digest.
std::string record_digest(const FlowRecord& record);

/// First label mentioned in `text` (case-insensitive; hyphens, underscores and
/// spaces between words ignored; optional "DDoS" prefix). "Unknow" is accepted
/// for Unknown. Unknown when nothing matches.
AttackLabel parse_response(std::string_view text);

}  // namespace kbforge
