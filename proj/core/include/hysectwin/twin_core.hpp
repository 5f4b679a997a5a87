#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/message_bus.hpp"
#include "hysectwin/value.hpp"

namespace hst {

/// Per-path channel state. ts_ms is refreshed by every accepted write;
/// change_ts_ms only moves when the value actually changes, so
/// same-value re-sends do not reset divergence age.
struct PathState {
  Value value;
  std::int64_t ts_ms = 0;
  std::int64_t change_ts_ms = 0;
};

struct ThingRecord {
  std::string thing_id;
  std::map<std::string, Value> attributes;
  std::map<std::string, PathState> live_features;
  std::map<std::string, PathState> twin_features;
  std::int64_t last_live_ms = 0;
  std::int64_t last_twin_ms = 0;
};

struct ChangedPath {
  std::string path;
  std::optional<Value> old_value;
  Value new_value;
  std::int64_t ts_ms = 0;
};

struct TwinDelta {
  std::string thing_id;
  Channel channel = Channel::live;
  std::vector<ChangedPath> changed;  // empty => no-op update

  bool empty() const { return changed.empty(); }
};

struct Mismatch {
  std::string thing_id;
  std::string path;
  Value live_value;
  Value twin_value;
  std::int64_t age_ms = 0;
  std::int64_t detected_at_ms = 0;
};

/// Digital-twin registry: mirrors per-thing feature state from the live
/// and twin channels, last-writer-wins by ts_ms per path.
class TwinRegistry {
 public:
  explicit TwinRegistry(std::int64_t freshness_horizon_ms = 30000)
      : freshness_horizon_ms_(freshness_horizon_ms) {}

  /// Applies an envelope to its channel's view; auto-creates the thing
  /// record on first sight. The returned delta lists value changes only.
  TwinDelta apply_update(const Envelope& env);

  /// Live/twin disagreement on a path that has persisted at least
  /// window_ms (age from the later of the two conflicting value
  /// changes), with both sides updated within the freshness horizon.
  std::optional<Mismatch> divergence(const std::string& thing_id,
                                     const std::string& path,
                                     std::int64_t window_ms,
                                     std::int64_t now_ms) const;

  /// Raw disagreement age, even below any window; nullopt when values
  /// agree or either side is missing/stale.
  std::optional<std::int64_t> disagreement_age(const std::string& thing_id,
                                               const std::string& path,
                                               std::int64_t now_ms) const;

  /// Current feature values per thing for one channel, ordered by
  /// thing_id.
  std::map<std::string, std::map<std::string, Value>> snapshot(
      Channel channel) const;

  const ThingRecord* find(const std::string& thing_id) const;
  std::size_t size() const { return things_.size(); }

  /// JSON export of one thing (attributes + per-channel features).
  nlohmann::json export_thing(const std::string& thing_id) const;

  std::int64_t freshness_horizon_ms() const { return freshness_horizon_ms_; }

 private:
  std::map<std::string, ThingRecord> things_;
  std::int64_t freshness_horizon_ms_;
};

}  // namespace hst
