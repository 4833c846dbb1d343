#include "kbforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kbforge/errors.hpp"
#include "kbforge/rng.hpp"

namespace kbforge {

std::map<Feature, BackgroundBand> default_background() {
  using F = Feature;
  std::map<Feature, BackgroundBand> bands;
  for (Feature f : all_features()) bands[f] = {0.0, 0.0};
  bands[F::FlowDuration] = {0.0, 100.0};
  bands[F::HeaderLength] = {100.0, 10000.0};
  bands[F::Duration] = {60.0, 70.0};
  bands[F::Rate] = {1.0, 500.0};
  bands[F::Srate] = {1.0, 500.0};
  bands[F::IPv] = {1.0, 1.0};
  bands[F::Llc] = {1.0, 1.0};
  bands[F::TotSum] = {500.0, 5000.0};
  bands[F::Min] = {60.0, 600.0};
  bands[F::Max] = {100.0, 1500.0};
  bands[F::Avg] = {80.0, 800.0};
  bands[F::Std] = {0.0, 200.0};
  bands[F::TotSize] = {80.0, 800.0};
  bands[F::Iat] = {1.0e7, 5.0e7};
  bands[F::Number] = {5.0, 15.0};
  bands[F::Magnitude] = {10.0, 40.0};
  bands[F::Radius] = {0.0, 50.0};
  bands[F::Covariance] = {0.0, 1000.0};
  bands[F::Variance] = {0.0, 1.0};
  bands[F::Weight] = {1.0, 250.0};
  return bands;
}

void SynthSpec::validate() const {
  if (n_per_attack == 0) throw ConfigError("n_per_attack must be at least 1");
  if (!(jitter >= 0.0 && jitter <= 1.0)) throw ConfigError("jitter must be in [0, 1]");
  std::set<AttackLabel> seen;
  for (const auto& p : profiles) {
    if (!seen.insert(p.attack).second) {
      throw ConfigError("duplicate profile for " + std::string(render_label(p.attack)));
    }
  }
  for (const auto& [f, band] : background) {
    if (!std::isfinite(band.lo) || !std::isfinite(band.hi) || band.lo > band.hi) {
      throw ConfigError("invalid background band for " + std::string(canonical_name(f)));
    }
  }
}

FlowRecord generate_flow(const SynthSpec& spec, AttackLabel attack, std::size_t index) {
  const auto it = std::find_if(spec.profiles.begin(), spec.profiles.end(),
                               [attack](const AttackProfile& p) { return p.attack == attack; });
  if (it == spec.profiles.end()) {
    throw DataError("no profile for " + std::string(render_label(attack)));
  }

  static const auto kDefaults = default_background();
  Rng rng(mix64(spec.seed ^ mix64((static_cast<std::uint64_t>(index_of(attack)) << 40) ^
                                  static_cast<std::uint64_t>(index))));
  FeatureVector values{};
  for (Feature f : all_features()) {
    // One draw per feature keeps every feature's stream position fixed.
    const double u = rng.uniform_signed();
    if (const auto* p = it->find(f)) {
      if (p->is_constant()) {
        values[index_of(f)] = p->median;
        continue;
      }
      const double spread = std::min(p->median - p->min, p->max - p->median);
      values[index_of(f)] = std::clamp(p->median + spec.jitter * u * spread, p->min, p->max);
      continue;
    }
    auto band_it = spec.background.find(f);
    const BackgroundBand band = band_it != spec.background.end() ? band_it->second : kDefaults.at(f);
    const double t = (u + 1.0) / 2.0;
    values[index_of(f)] = band.lo == band.hi ? band.lo : band.lo + t * (band.hi - band.lo);
  }
  return FlowRecord(values, attack);
}

Dataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  Dataset out;
  out.records.reserve(spec.profiles.size() * spec.n_per_attack);
  for (const auto& p : spec.profiles) {
    for (std::size_t i = 0; i < spec.n_per_attack; ++i) {
      out.records.push_back(generate_flow(spec, p.attack, i));
      out.summary.count(out.records.back());
    }
  }
  return out;
}

}  // namespace kbforge
