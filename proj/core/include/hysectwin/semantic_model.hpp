#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hysectwin/value.hpp"

namespace hst {

/// Raw device observation: static attributes plus dotted-path features,
/// stamped with the source timestamp.
struct DeviceObservation {
  std::string thing_id;
  std::map<std::string, Value> attributes;
  std::map<std::string, Value> features;  // keyed by dotted path, e.g. "state.on"
  std::int64_t ts_ms = 0;
};

/// A path is valid when it consists of non-empty dot-separated segments
/// of [a-z0-9_]+.
bool valid_feature_path(std::string_view path);

enum class FactKind { static_attribute, dynamic_property };

struct SemanticFact {
  std::int64_t fact_id = 0;  // assigned by the fact base on assert
  std::string thing_id;
  std::string predicate;
  Value value;
  std::int64_t ts_ms = 0;
  FactKind kind = FactKind::dynamic_property;
};

/// Semantic lifting: converts an observation into typed assertions, one
/// fact per attribute (static) and one per feature (dynamic).
std::vector<SemanticFact> lift(const DeviceObservation& obs);

enum class AssertOutcome { inserted, replaced, ignored_stale };

struct FactDelta {
  AssertOutcome outcome = AssertOutcome::inserted;
  std::int64_t fact_id = 0;      // id of the fact now current (0 when stale)
  std::int64_t old_fact_id = 0;  // id of the replaced fact, if any
  std::optional<Value> old_value;
  bool value_changed = false;  // outcome-relative: true for insert or
                               // replacement with a different value
};

/// Current-state fact store, keyed by (thing_id, predicate), last writer
/// by ts_ms wins (ties resolved in favour of the assert).
class FactBase {
 public:
  FactDelta assert_fact(SemanticFact f);

  /// Removes a fact; returns the removed fact if present.
  std::optional<SemanticFact> retract(const std::string& thing_id,
                                      const std::string& predicate);

  /// All current facts matching the bound pattern components, ordered by
  /// (thing_id, predicate).
  std::vector<SemanticFact> query(
      const std::optional<std::string>& thing_id = std::nullopt,
      const std::optional<std::string>& predicate = std::nullopt) const;

  const SemanticFact* find(const std::string& thing_id,
                           const std::string& predicate) const;

  std::size_t size() const { return facts_.size(); }
  std::uint64_t generation() const { return generation_; }

 private:
  std::map<std::pair<std::string, std::string>, SemanticFact> facts_;
  std::uint64_t generation_ = 0;
  std::int64_t next_fact_id_ = 1;
};

struct FeatureEntry {
  std::string predicate;
  double lo = 0.0;
  double hi = 1.0;
  double fallback = 0.0;  // used when the fact is absent
};

/// Ordered feature-extraction spec; the vector dimension equals the
/// entry count.
struct FeatureSpec {
  std::vector<FeatureEntry> entries;
  void validate() const;  // throws on lo >= hi or fallback out of range
};

struct FeatureVector {
  std::vector<double> values;  // each in [0,1]
  std::int64_t ts_ms = 0;
};

/// Extracts and min-max normalizes the feature vector from current facts.
/// When several things carry the same predicate the maximum value wins;
/// pass thing_id to restrict extraction to one thing. Booleans map to
/// 1/0; a string-valued fact raises an error naming the predicate.
FeatureVector feature_vector(
    const FactBase& fb, const FeatureSpec& spec,
    const std::optional<std::string>& thing_id = std::nullopt);

/// Shipped default normalization ranges for well-known predicates.
const std::map<std::string, std::pair<double, double>>& default_feature_ranges();

}  // namespace hst
