#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "kbforge/flow_data.hpp"
#include "kbforge/profile.hpp"

namespace kbforge {

struct BackgroundBand {
  double lo = 0.0;
  double hi = 0.0;
};

/// Benign-looking bands for every registry feature: flags, counts, protocol
/// indicators and Protocol Type at 0, IPv and LLC at 1, moderate sizes/rates.
std::map<Feature, BackgroundBand> default_background();

struct SynthSpec {
  std::vector<AttackProfile> profiles;
  std::size_t n_per_attack = 500;
  double jitter = 0.3;
  std::uint64_t seed = 0;
  /// Features missing here fall back to default_background().
  std::map<Feature, BackgroundBand> background;

  /// Throws ConfigError on n_per_attack == 0, jitter outside [0, 1], duplicate
  /// profiles, or an inverted/non-finite band.
  void validate() const;
};

/// Profile features: median + jitter * u * min(median - min, max - median)
/// with u uniform in (-1, 1), clamped to [min, max]; constant profiles are
/// emitted exactly. Other features: uniform over their background band.
/// Deterministic in (spec, attack, index). Throws DataError when the attack
/// has no profile.
FlowRecord generate_flow(const SynthSpec& spec, AttackLabel attack, std::size_t index);

/// n_per_attack records per profile, attack-major in profile order.
Dataset generate_dataset(const SynthSpec& spec);

}  // namespace kbforge
