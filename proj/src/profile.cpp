#include "kbforge/profile.hpp"

#include <algorithm>
#include <cmath>

#include "kbforge/errors.hpp"

namespace kbforge {

const FeatureProfile* AttackProfile::find(Feature f) const {
  for (const auto& p : ranked_features) {
    if (p.feature == f) return &p;
  }
  return nullptr;
}

FeatureProfile compute_profile(Feature feature, std::span<const double> values) {
  if (values.empty()) {
    throw DataError("cannot profile '" + std::string(canonical_name(feature)) + "' over no values");
  }
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw DataError("non-finite value in profile input");
  }
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double median = *mid;
  const auto [lo, hi] = std::minmax_element(sorted.begin(), sorted.end());
  return FeatureProfile{feature, *lo, median, *hi};
}

AttackProfile build_attack_profile(std::span<const FlowRecord> records, AttackLabel attack,
                                   const ImportanceReport& report, std::size_t k) {
  if (k == 0) throw DataError("k must be at least 1");
  std::vector<const FlowRecord*> members;
  for (const auto& r : records) {
    if (r.label() == attack) members.push_back(&r);
  }
  if (members.empty()) {
    throw DataError("no records labeled " + std::string(render_label(attack)));
  }

  AttackProfile profile;
  profile.attack = attack;
  profile.k = k;
  std::vector<double> values(members.size());
  const auto take = std::min(k, report.ranking.size());
  for (std::size_t i = 0; i < take; ++i) {
    const Feature f = report.ranking[i];
    std::transform(members.begin(), members.end(), values.begin(),
                   [f](const FlowRecord* r) { return r->value(f); });
    profile.ranked_features.push_back(compute_profile(f, values));
  }
  return profile;
}

nlohmann::json to_json(const AttackProfile& profile) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& p : profile.ranked_features) {
    features.push_back({{"feature", std::string(canonical_name(p.feature))},
                        {"min", p.min},
                        {"median", p.median},
                        {"max", p.max}});
  }
  return {{"attack", std::string(render_label(profile.attack))},
          {"k", profile.k},
          {"features", features}};
}

AttackProfile profile_from_json(const nlohmann::json& j) {
  AttackProfile profile;
  const auto label = j.at("attack").get<std::string>();
  profile.attack = canonicalize_label(label);
  if (!is_attack(profile.attack)) throw DataError("profile for non-attack label: " + label);
  profile.k = j.value("k", kDefaultTopK);
  for (const auto& item : j.at("features")) {
    const auto name = item.at("feature").get<std::string>();
    auto f = feature_from_name(name);
    if (!f) throw DataError("unknown feature in profile: " + name);
    FeatureProfile p{*f, item.at("min").get<double>(), item.at("median").get<double>(),
                     item.at("max").get<double>()};
    if (!(p.min <= p.median && p.median <= p.max)) {
      throw DataError("profile for '" + name + "' violates min <= median <= max");
    }
    if (profile.find(*f)) throw DataError("duplicate feature in profile: " + name);
    profile.ranked_features.push_back(p);
  }
  return profile;
}

nlohmann::json profiles_to_json(std::span<const AttackProfile> profiles) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) out.push_back(to_json(p));
  return {{"profiles", out}};
}

std::vector<AttackProfile> profiles_from_json(const nlohmann::json& j) {
  std::vector<AttackProfile> out;
  for (const auto& item : j.at("profiles")) out.push_back(profile_from_json(item));
  return out;
}

}  // namespace kbforge
