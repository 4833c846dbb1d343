#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "kbforge/features.hpp"
#include "kbforge/flow_data.hpp"
#include "kbforge/forest.hpp"

namespace kbforge {

/// {min, median, max} of one feature. The median is the lower-middle element
/// of the sorted values (no interpolation).
struct FeatureProfile {
  Feature feature{};
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;

  bool is_constant(double tolerance = 1e-6) const {
    return max - min <= tolerance;
  }

  friend bool operator==(const FeatureProfile&, const FeatureProfile&) = default;
};

/// Top-k features of one attack, in importance order.
struct AttackProfile {
  AttackLabel attack{};
  std::size_t k = 10;
  std::vector<FeatureProfile> ranked_features;

  const FeatureProfile* find(Feature f) const;

  friend bool operator==(const AttackProfile&, const AttackProfile&) = default;
};

inline constexpr std::size_t kDefaultTopK = 10;

/// Throws DataError on an empty list or a non-finite value.
FeatureProfile compute_profile(Feature feature, std::span<const double> values);

/// Statistics are taken over the records labeled `attack` only. Throws
/// DataError when there are none or k is 0.
AttackProfile build_attack_profile(std::span<const FlowRecord> records, AttackLabel attack,
                                   const ImportanceReport& report, std::size_t k = kDefaultTopK);

nlohmann::json to_json(const AttackProfile& profile);
AttackProfile profile_from_json(const nlohmann::json& j);

nlohmann::json profiles_to_json(std::span<const AttackProfile> profiles);
std::vector<AttackProfile> profiles_from_json(const nlohmann::json& j);

}  // namespace kbforge
