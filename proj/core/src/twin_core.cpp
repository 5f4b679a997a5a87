#include "hysectwin/twin_core.hpp"

#include <algorithm>

#include "hysectwin/error.hpp"

namespace hst {

TwinDelta TwinRegistry::apply_update(const Envelope& env) {
  auto& rec = things_[env.thing_id];
  if (rec.thing_id.empty()) rec.thing_id = env.thing_id;

  for (const auto& [name, v] : env.payload.attributes) {
    rec.attributes[name] = v;
  }

  auto& view = env.topic.channel == Channel::live ? rec.live_features
                                                  : rec.twin_features;
  TwinDelta delta;
  delta.thing_id = env.thing_id;
  delta.channel = env.topic.channel;

  for (const auto& [path, v] : env.payload.features) {
    auto it = view.find(path);
    if (it == view.end()) {
      view.emplace(path, PathState{v, env.ts_ms, env.ts_ms});
      delta.changed.push_back(ChangedPath{path, std::nullopt, v, env.ts_ms});
      continue;
    }
    if (env.ts_ms < it->second.ts_ms) continue;  // stale write, value retained
    if (it->second.value == v) {
      it->second.ts_ms = env.ts_ms;  // refresh freshness only
      continue;
    }
    delta.changed.push_back(
        ChangedPath{path, it->second.value, v, env.ts_ms});
    it->second = PathState{v, env.ts_ms, env.ts_ms};
  }

  auto& last = env.topic.channel == Channel::live ? rec.last_live_ms
                                                  : rec.last_twin_ms;
  last = std::max(last, env.ts_ms);
  return delta;
}

std::optional<std::int64_t> TwinRegistry::disagreement_age(
    const std::string& thing_id, const std::string& path,
    std::int64_t now_ms) const {
  auto rec_it = things_.find(thing_id);
  if (rec_it == things_.end()) return std::nullopt;
  const auto& rec = rec_it->second;
  auto live_it = rec.live_features.find(path);
  auto twin_it = rec.twin_features.find(path);
  if (live_it == rec.live_features.end() ||
      twin_it == rec.twin_features.end()) {
    return std::nullopt;  // absence is not divergence
  }
  const auto& live = live_it->second;
  const auto& twin = twin_it->second;
  if (now_ms - live.ts_ms > freshness_horizon_ms_ ||
      now_ms - twin.ts_ms > freshness_horizon_ms_) {
    return std::nullopt;  // a stale side is excluded
  }
  if (live.value == twin.value) return std::nullopt;
  std::int64_t since = std::max(live.change_ts_ms, twin.change_ts_ms);
  return std::max<std::int64_t>(0, now_ms - since);
}

std::optional<Mismatch> TwinRegistry::divergence(const std::string& thing_id,
                                                 const std::string& path,
                                                 std::int64_t window_ms,
                                                 std::int64_t now_ms) const {
  if (window_ms <= 0) throw Error("divergence: window_ms must be > 0");
  auto age = disagreement_age(thing_id, path, now_ms);
  if (!age || *age < window_ms) return std::nullopt;
  const auto& rec = things_.at(thing_id);
  Mismatch m;
  m.thing_id = thing_id;
  m.path = path;
  m.live_value = rec.live_features.at(path).value;
  m.twin_value = rec.twin_features.at(path).value;
  m.age_ms = *age;
  m.detected_at_ms = now_ms;
  return m;
}

std::map<std::string, std::map<std::string, Value>> TwinRegistry::snapshot(
    Channel channel) const {
  std::map<std::string, std::map<std::string, Value>> out;
  for (const auto& [id, rec] : things_) {
    const auto& view =
        channel == Channel::live ? rec.live_features : rec.twin_features;
    if (view.empty()) continue;
    auto& paths = out[id];
    for (const auto& [path, st] : view) paths[path] = st.value;
  }
  return out;
}

const ThingRecord* TwinRegistry::find(const std::string& thing_id) const {
  auto it = things_.find(thing_id);
  return it == things_.end() ? nullptr : &it->second;
}

nlohmann::json TwinRegistry::export_thing(const std::string& thing_id) const {
  auto it = things_.find(thing_id);
  if (it == things_.end()) {
    throw Error("export_thing: unknown thing '" + thing_id + "'");
  }
  const auto& rec = it->second;
  nlohmann::json attrs = nlohmann::json::object();
  for (const auto& [k, v] : rec.attributes) attrs[k] = v.to_json();
  auto view_json = [](const std::map<std::string, PathState>& view) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [path, st] : view) j[path] = st.value.to_json();
    return j;
  };
  return nlohmann::json{{"thingId", thing_id},
                        {"attributes", attrs},
                        {"features", view_json(rec.live_features)},
                        {"twinFeatures", view_json(rec.twin_features)},
                        {"lastLiveMs", rec.last_live_ms},
                        {"lastTwinMs", rec.last_twin_ms}};
}

}  // namespace hst
