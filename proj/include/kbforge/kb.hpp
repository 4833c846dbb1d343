#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kbforge/features.hpp"
#include "kbforge/profile.hpp"

namespace kbforge {

enum class KbVariant { Long, Short };
enum class KbSource { Canonical, Generated };

std::string_view to_string(KbVariant v);
std::string_view to_string(KbSource s);

/// Rendered knowledge-base text, one entry per attack. Entries are LF-only and
/// carry no trailing newline.
struct KnowledgeBase {
  KbVariant variant = KbVariant::Long;
  KbSource source = KbSource::Generated;
  std::map<AttackLabel, std::string> entries;

  /// Entries in attack order; long entries separated by a blank line, short
  /// entries one per line. Ends with a newline.
  std::string combined() const;
};

enum class DescriptorKind { MustEqual, High, Low, Elevated, Range, Typical };

/// Closed descriptor vocabulary: must-equal(a), high, low, elevated,
/// range(a, b), typical(a).
struct Descriptor {
  DescriptorKind kind = DescriptorKind::Range;
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

struct KeyFeature {
  Feature feature{};
  Descriptor descriptor;

  friend bool operator==(const KeyFeature&, const KeyFeature&) = default;
};

struct KeyFeatureSet {
  std::map<AttackLabel, std::vector<KeyFeature>> per_attack;
};

/// Qualitative phrase for one key feature ("High packet rate").
std::string describe(const KeyFeature& key);

struct MandatoryEquals {
  double value;
  double tolerance;
};
struct InRange {
  double lo;
  double hi;
};
struct TypicalNear {
  double value;
  double tolerance;
};

struct Constraint {
  Feature feature{};
  std::variant<MandatoryEquals, InRange, TypicalNear> kind;
};

/// Machine-checkable form of a knowledge base, consumed by the rule oracle.
struct StructuredKb {
  std::map<AttackLabel, std::vector<Constraint>> per_attack;

  bool empty() const { return per_attack.empty(); }
};

inline constexpr double kConstantTolerance = 1e-6;
inline constexpr double kTypicalFraction = 0.05;

/// Header line plus one bullet per ranked feature: "Has to be v" for constant
/// profiles, otherwise "Ranges from min to max, commonly at median".
/// Throws DataError on an empty profile.
KnowledgeBase render_long_kb(std::span<const AttackProfile> profiles);

/// "<label>: <descriptor>; <descriptor>." per attack. Throws DataError when
/// any of the seven attacks is missing or has no descriptors.
KnowledgeBase render_short_kb(const KeyFeatureSet& keys);

/// The reference texts: four long entries, seven short entries.
KnowledgeBase canonical_kb(KbVariant variant);

/// Up to three features per attack whose ranges are best separated from the
/// other attacks' ranges for the same feature.
///
/// Separation of attack A on feature f is the mean over every other attack B
/// that also profiles f of
///   0                                         if one range contains the other
///   |mid_A - mid_B| / (max(hi) - min(lo))     otherwise
/// and 0 when no other attack profiles f. Ties fall back to importance rank.
/// Descriptors: must-equal for constant profiles; for flag features
/// elevated/low, otherwise high/low, by comparing the median with the
/// lower median of all attacks' medians for f; range when neither applies.
/// Throws DataError for fewer than two profiles.
KeyFeatureSet derive_key_features(std::span<const AttackProfile> profiles);

/// Key features matching the reference short knowledge base for all seven
/// attacks ("Multiple source IPs" has no flow feature and is omitted).
KeyFeatureSet canonical_key_features();

/// MandatoryEquals(v, 1e-6) for constant profiles; otherwise InRange(min, max)
/// plus TypicalNear(median, 5% of the range). Throws DataError on empty input.
StructuredKb structured_kb(std::span<const AttackProfile> profiles);

nlohmann::json to_json(const StructuredKb& kb);
StructuredKb structured_kb_from_json(const nlohmann::json& j);

nlohmann::json to_json(const KeyFeatureSet& keys);

/// Writes `<dir>/<variant>/<label>.txt` per entry plus `combined.txt`.
/// Returns the files written.
std::vector<std::filesystem::path> write_kb_files(const KnowledgeBase& kb,
                                                  const std::filesystem::path& dir);

/// Reference profiles for the ICMP, UDP, TCP and PSHACK floods in importance
/// order. Features the reference long KB pins to a single value ("Has to be",
/// "Must be", "Typically 0.0") are constant; the rest carry the CICIoT 2023
/// {min, median, max} statistics, taken from the long-KB text where the
/// dataset statistics are not available.
std::vector<AttackProfile> reference_profiles();

}  // namespace kbforge
