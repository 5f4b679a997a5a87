#include "hysectwin/semantic_model.hpp"

#include <algorithm>
#include <cmath>

#include "hysectwin/error.hpp"

namespace hst {

bool valid_feature_path(std::string_view path) {
  if (path.empty()) return false;
  bool segment_has_char = false;
  for (char c : path) {
    if (c == '.') {
      if (!segment_has_char) return false;
      segment_has_char = false;
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') {
      segment_has_char = true;
    } else {
      return false;
    }
  }
  return segment_has_char;
}

std::vector<SemanticFact> lift(const DeviceObservation& obs) {
  if (obs.thing_id.empty()) throw Error("lift: empty thing_id");
  if (obs.ts_ms < 0) throw Error("lift: negative ts_ms");
  for (const auto& [path, v] : obs.features) {
    if (!valid_feature_path(path)) {
      throw Error("lift: malformed feature path '" + path + "'");
    }
  }
  std::vector<SemanticFact> out;
  out.reserve(obs.attributes.size() + obs.features.size());
  for (const auto& [name, v] : obs.attributes) {
    out.push_back(SemanticFact{0, obs.thing_id, name, v, obs.ts_ms,
                               FactKind::static_attribute});
  }
  for (const auto& [path, v] : obs.features) {
    out.push_back(SemanticFact{0, obs.thing_id, path, v, obs.ts_ms,
                               FactKind::dynamic_property});
  }
  return out;
}

FactDelta FactBase::assert_fact(SemanticFact f) {
  auto key = std::make_pair(f.thing_id, f.predicate);
  auto it = facts_.find(key);
  FactDelta delta;
  if (it == facts_.end()) {
    f.fact_id = next_fact_id_++;
    delta.outcome = AssertOutcome::inserted;
    delta.fact_id = f.fact_id;
    delta.value_changed = true;
    facts_.emplace(std::move(key), std::move(f));
    ++generation_;
    return delta;
  }
  if (f.ts_ms < it->second.ts_ms) {
    delta.outcome = AssertOutcome::ignored_stale;
    delta.fact_id = 0;
    delta.old_fact_id = it->second.fact_id;
    delta.old_value = it->second.value;
    return delta;
  }
  delta.outcome = AssertOutcome::replaced;
  delta.old_fact_id = it->second.fact_id;
  delta.old_value = it->second.value;
  delta.value_changed = !(it->second.value == f.value);
  f.fact_id = next_fact_id_++;
  delta.fact_id = f.fact_id;
  it->second = std::move(f);
  ++generation_;
  return delta;
}

std::optional<SemanticFact> FactBase::retract(const std::string& thing_id,
                                              const std::string& predicate) {
  auto it = facts_.find(std::make_pair(thing_id, predicate));
  if (it == facts_.end()) return std::nullopt;
  SemanticFact removed = std::move(it->second);
  facts_.erase(it);
  ++generation_;
  return removed;
}

std::vector<SemanticFact> FactBase::query(
    const std::optional<std::string>& thing_id,
    const std::optional<std::string>& predicate) const {
  std::vector<SemanticFact> out;
  for (const auto& [key, fact] : facts_) {
    if (thing_id && key.first != *thing_id) continue;
    if (predicate && key.second != *predicate) continue;
    out.push_back(fact);
  }
  return out;  // map iteration is already (thing_id, predicate) ordered
}

const SemanticFact* FactBase::find(const std::string& thing_id,
                                   const std::string& predicate) const {
  auto it = facts_.find(std::make_pair(thing_id, predicate));
  return it == facts_.end() ? nullptr : &it->second;
}

void FeatureSpec::validate() const {
  for (const auto& e : entries) {
    if (!(e.lo < e.hi)) {
      throw Error("FeatureSpec: lo must be < hi for '" + e.predicate + "'");
    }
    if (e.fallback < e.lo || e.fallback > e.hi) {
      throw Error("FeatureSpec: default out of [lo,hi] for '" + e.predicate +
                  "'");
    }
  }
}

FeatureVector feature_vector(const FactBase& fb, const FeatureSpec& spec,
                             const std::optional<std::string>& thing_id) {
  spec.validate();
  FeatureVector fv;
  fv.values.reserve(spec.entries.size());
  for (const auto& e : spec.entries) {
    double raw = e.fallback;
    bool found = false;
    for (const auto& fact : fb.query(thing_id, e.predicate)) {
      if (fact.value.is_string()) {
        throw Error("feature_vector: string-valued fact for numeric entry '" +
                    e.predicate + "'");
      }
      double v = fact.value.as_double();
      if (!found || v > raw) raw = v;
      found = true;
      fv.ts_ms = std::max(fv.ts_ms, fact.ts_ms);
    }
    double norm = (raw - e.lo) / (e.hi - e.lo);
    fv.values.push_back(std::clamp(norm, 0.0, 1.0));
  }
  return fv;
}

const std::map<std::string, std::pair<double, double>>&
default_feature_ranges() {
  static const std::map<std::string, std::pair<double, double>> ranges = {
      {"network_traffic_rate", {0.0, 1000.0}},
      {"state.bri", {0.0, 254.0}},
      {"lux", {0.0, 1000.0}},
      {"temperature", {-10.0, 50.0}},
  };
  return ranges;
}

}  // namespace hst
