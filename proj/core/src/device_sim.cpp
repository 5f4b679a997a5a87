#include "hysectwin/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hysectwin/error.hpp"
#include "hysectwin/semantic_model.hpp"

namespace hst {

const char* device_class_name(DeviceClass c) {
  switch (c) {
    case DeviceClass::color_temp_light: return "color_temp_light";
    case DeviceClass::dimmable_light: return "dimmable_light";
    case DeviceClass::illuminance_sensor: return "illuminance_sensor";
    case DeviceClass::temperature_sensor: return "temperature_sensor";
    case DeviceClass::humidity_sensor: return "humidity_sensor";
    case DeviceClass::switch_device: return "switch";
  }
  return "?";
}

DeviceClass device_class_from_name(const std::string& name) {
  if (name == "color_temp_light") return DeviceClass::color_temp_light;
  if (name == "dimmable_light") return DeviceClass::dimmable_light;
  if (name == "illuminance_sensor") return DeviceClass::illuminance_sensor;
  if (name == "temperature_sensor") return DeviceClass::temperature_sensor;
  if (name == "humidity_sensor") return DeviceClass::humidity_sensor;
  if (name == "switch") return DeviceClass::switch_device;
  throw Error("unknown device class '" + name + "'");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Environment::Sample Environment::sample(std::int64_t now_ms) const {
  Sample s;
  double t_s = static_cast<double>(now_ms) / 1000.0;
  s.lux = std::max(0.0, ambient_lux + lux_drift.slope_per_s * t_s);
  s.temperature_c = temperature_c + temperature_drift.slope_per_s * t_s;
  s.humidity_pct =
      std::clamp(humidity_pct + humidity_drift.slope_per_s * t_s, 0.0, 100.0);
  s.occupancy_high = occupancy_high;
  for (const auto& phase : occupancy_schedule) {
    if (phase.at_ms <= now_ms) s.occupancy_high = phase.high;
  }
  return s;
}

double Environment::noise(std::int64_t now_ms, std::uint64_t channel,
                          double amp) const {
  if (amp <= 0.0) return 0.0;
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(
                                   now_ms) ^ splitmix64(channel)));
  double unit = static_cast<double>(h >> 11) / 9007199254740992.0;  // [0,1)
  return (unit * 2.0 - 1.0) * amp;
}

Fleet Fleet::init(std::vector<DeviceSpec> specs, BehaviorParams params) {
  Fleet fleet;
  fleet.params_ = params;
  for (auto& spec : specs) {
    if (spec.thing_id.empty()) throw Error("init_fleet: empty thing_id");
    if (spec.publish_period_ms < 1) {
      throw Error("init_fleet: publish_period_ms must be >= 1 for '" +
                  spec.thing_id + "'");
    }
    if (fleet.devices_.count(spec.thing_id)) {
      throw Error("init_fleet: duplicate thing_id '" + spec.thing_id + "'");
    }
    Device d;
    d.light.ct = spec.ctmin;
    for (const auto& [path, v] : spec.initial_features) {
      if (!valid_feature_path(path)) {
        throw Error("init_fleet: malformed feature path '" + path + "' for '" +
                    spec.thing_id + "'");
      }
      if (path == "state.on") {
        d.light.on = v.as_bool();
      } else if (path == "state.bri") {
        d.light.bri = static_cast<int>(v.as_double());
      } else if (path == "state.ct") {
        d.light.ct = static_cast<int>(v.as_double());
      } else if (path == "state.alert") {
        d.light.alert = v.as_string();
      } else if (path == "state.reachable") {
        d.light.reachable = v.as_bool();
      } else {
        d.features[path] = v;
      }
    }
    d.light.bri = std::clamp(d.light.bri, 0, 254);
    d.light.ct = std::clamp(d.light.ct, spec.ctmin, spec.ctmax);
    d.spec = std::move(spec);
    fleet.devices_.emplace(d.spec.thing_id, std::move(d));
  }
  return fleet;
}

bool Fleet::is_light(const Device& d) const {
  return d.spec.device_class == DeviceClass::color_temp_light ||
         d.spec.device_class == DeviceClass::dimmable_light;
}

void Fleet::apply_behavior(Device& d, const Environment::Sample& s,
                           bool lux_rising) {
  if (!is_light(d)) return;
  auto& light = d.light;
  if (s.occupancy_high) {
    // full brightness overrides the energy rules
    light.on = true;
    light.bri = 254;
    return;
  }
  if (s.lux < params_.lux_on_threshold) {
    light.on = true;
    light.bri = params_.bri_comfort;
    return;
  }
  bool should_dim = s.lux > params_.lux_dim_threshold ||
                    (lux_rising && s.lux > params_.lux_on_threshold);
  if (should_dim && light.on) {
    light.bri = std::max(0, light.bri - params_.dim_step);
    if (light.bri == 0) light.on = false;
  }
}

std::map<std::string, Value> Fleet::reported_features(
    const Device& d, const Environment& env, const Environment::Sample& s,
    std::int64_t now_ms) const {
  std::map<std::string, Value> out = d.features;
  std::uint64_t chan = fnv1a(d.spec.thing_id);
  switch (d.spec.device_class) {
    case DeviceClass::color_temp_light:
      out["state.ct"] = Value(static_cast<std::int64_t>(d.light.ct));
      out["state.colormode"] = Value("ct");
      [[fallthrough]];
    case DeviceClass::dimmable_light:
      out["state.on"] = Value(d.light.on);
      out["state.bri"] = Value(static_cast<std::int64_t>(d.light.bri));
      out["state.alert"] = Value(d.light.alert);
      out["state.reachable"] = Value(d.light.reachable);
      break;
    case DeviceClass::illuminance_sensor:
      out["lux"] = Value(std::max(
          0.0, s.lux + env.noise(now_ms, chan, env.lux_drift.noise_amp)));
      break;
    case DeviceClass::temperature_sensor:
      out["temperature"] =
          Value(s.temperature_c +
                env.noise(now_ms, chan, env.temperature_drift.noise_amp));
      break;
    case DeviceClass::humidity_sensor:
      out["humidity"] = Value(std::clamp(
          s.humidity_pct + env.noise(now_ms, chan, env.humidity_drift.noise_amp),
          0.0, 100.0));
      break;
    case DeviceClass::switch_device:
      out["occupancy_high"] = Value(s.occupancy_high);
      break;
  }
  for (const auto& [path, forced] : d.report_overrides) {
    if (now_ms <= forced.second) out[path] = forced.first;
  }
  return out;
}

std::vector<Envelope> Fleet::step(const Environment& env, std::int64_t now_ms) {
  auto s = env.sample(now_ms);
  bool lux_rising = prev_lux_.has_value() && (s.lux - *prev_lux_) > 1.0;
  prev_lux_ = s.lux;

  for (auto& [id, d] : devices_) apply_behavior(d, s, lux_rising);

  std::vector<Envelope> out;
  for (auto& [id, d] : devices_) {
    bool due = d.initial_pending ||
               (now_ms - d.last_pub_ms) >= d.spec.publish_period_ms;
    if (!due) continue;
    d.initial_pending = false;
    d.last_pub_ms = now_ms;

    Envelope env_msg;
    env_msg.topic = Topic::make(Channel::live, id, true);
    env_msg.thing_id = id;
    env_msg.seq = ++d.seq;
    env_msg.ts_ms = now_ms;
    env_msg.payload.attributes = d.spec.attributes;
    env_msg.payload.features = reported_features(d, env, s, now_ms);

    if (!d.pending_commands.empty()) {
      auto cmd = d.pending_commands.front();
      d.pending_commands.pop_front();
      env_msg.payload.features["command.source"] = Value(cmd.source);
      env_msg.payload.features["command.target"] = Value(cmd.path);
      env_msg.payload.features["command.writes_state"] =
          Value(cmd.path.rfind("state.", 0) == 0);
      env_msg.payload.features["command.seq"] =
          Value(static_cast<std::int64_t>(cmd.cmd_seq));
    }
    if (d.campaign_tag && now_ms <= d.campaign_tag->second) {
      env_msg.campaign = d.campaign_tag->first;
    }
    out.push_back(std::move(env_msg));
  }
  return out;
}

Fleet::Device& Fleet::require(const std::string& thing_id) {
  auto it = devices_.find(thing_id);
  if (it == devices_.end()) throw Error("unknown thing '" + thing_id + "'");
  return it->second;
}

const Fleet::Device& Fleet::require(const std::string& thing_id) const {
  auto it = devices_.find(thing_id);
  if (it == devices_.end()) throw Error("unknown thing '" + thing_id + "'");
  return it->second;
}

CommandResult Fleet::apply_command(const std::string& thing_id,
                                   const std::string& path, Value value,
                                   const std::string& source_id) {
  auto& d = require(thing_id);
  CommandResult res;
  res.new_value = value;

  if (is_light(d) && path == "state.on") {
    if (!value.is_bool()) throw Error("command: state.on expects a boolean");
    res.old_value = Value(d.light.on);
    d.light.on = value.as_bool();
  } else if (is_light(d) && path == "state.bri") {
    res.old_value = Value(static_cast<std::int64_t>(d.light.bri));
    int v = static_cast<int>(value.as_double());
    int clamped = std::clamp(v, 0, 254);
    res.clamped = clamped != v;
    res.new_value = Value(static_cast<std::int64_t>(clamped));
    d.light.bri = clamped;
  } else if (d.spec.device_class == DeviceClass::color_temp_light &&
             path == "state.ct") {
    res.old_value = Value(static_cast<std::int64_t>(d.light.ct));
    int v = static_cast<int>(value.as_double());
    int clamped = std::clamp(v, d.spec.ctmin, d.spec.ctmax);
    res.clamped = clamped != v;
    res.new_value = Value(static_cast<std::int64_t>(clamped));
    d.light.ct = clamped;
  } else if (is_light(d) && path == "state.alert") {
    res.old_value = Value(d.light.alert);
    d.light.alert = value.as_string();
  } else {
    auto it = d.features.find(path);
    if (it == d.features.end()) {
      throw Error("command: unknown feature '" + path + "' on '" + thing_id +
                  "'");
    }
    res.old_value = it->second;
    it->second = value;
  }

  d.pending_commands.push_back(
      PendingCommand{source_id, path, res.new_value, next_cmd_seq_++});
  return res;
}

void Fleet::suppress_report(const std::string& thing_id,
                            const std::string& path, Value forced,
                            std::int64_t until_ms) {
  require(thing_id).report_overrides[path] = {std::move(forced), until_ms};
}

void Fleet::tamper_attribute(const std::string& thing_id,
                             const std::string& name, Value value) {
  require(thing_id).spec.attributes[name] = std::move(value);
}

void Fleet::set_feature_source(const std::string& thing_id,
                               const std::string& path, Value value) {
  if (!valid_feature_path(path)) {
    throw Error("set_feature_source: malformed path '" + path + "'");
  }
  require(thing_id).features[path] = std::move(value);
}

void Fleet::set_campaign_tag(const std::string& thing_id,
                             const std::string& tag, std::int64_t until_ms) {
  require(thing_id).campaign_tag = {tag, until_ms};
}

bool Fleet::has_thing(const std::string& thing_id) const {
  return devices_.count(thing_id) > 0;
}

const LightState* Fleet::light_state(const std::string& thing_id) const {
  auto it = devices_.find(thing_id);
  if (it == devices_.end() || !is_light(it->second)) return nullptr;
  return &it->second.light;
}

DeviceObservation Fleet::observe(const std::string& thing_id,
                                 std::int64_t now_ms) const {
  const auto& d = require(thing_id);
  DeviceObservation obs;
  obs.thing_id = thing_id;
  obs.ts_ms = now_ms;
  obs.attributes = d.spec.attributes;
  obs.features = d.features;
  if (is_light(d)) {
    obs.features["state.on"] = Value(d.light.on);
    obs.features["state.bri"] = Value(static_cast<std::int64_t>(d.light.bri));
  }
  return obs;
}

std::vector<std::string> Fleet::thing_ids() const {
  std::vector<std::string> out;
  out.reserve(devices_.size());
  for (const auto& [id, d] : devices_) out.push_back(id);
  return out;
}

std::vector<DeviceSpec> fleet_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("fleet spec: expected a JSON array");
  std::vector<DeviceSpec> specs;
  for (const auto& dj : j) {
    DeviceSpec spec;
    spec.thing_id = dj.at("thing_id").get<std::string>();
    spec.device_class = device_class_from_name(dj.at("class").get<std::string>());
    spec.publish_period_ms = dj.value("publish_period_ms", 1000);
    spec.ctmin = dj.value("ctmin", 250);
    spec.ctmax = dj.value("ctmax", 454);
    if (dj.contains("attributes")) {
      for (auto it = dj["attributes"].begin(); it != dj["attributes"].end();
           ++it) {
        spec.attributes[it.key()] = Value::from_json(it.value());
      }
    }
    if (dj.contains("state")) {
      for (auto it = dj["state"].begin(); it != dj["state"].end(); ++it) {
        spec.initial_features["state." + it.key()] =
            Value::from_json(it.value());
      }
    }
    if (dj.contains("features")) {
      for (auto it = dj["features"].begin(); it != dj["features"].end(); ++it) {
        spec.initial_features[it.key()] = Value::from_json(it.value());
      }
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

nlohmann::json fleet_to_json(const std::vector<DeviceSpec>& specs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& spec : specs) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [k, v] : spec.attributes) attrs[k] = v.to_json();
    nlohmann::json state = nlohmann::json::object();
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [k, v] : spec.initial_features) {
      if (k.rfind("state.", 0) == 0) {
        state[k.substr(6)] = v.to_json();
      } else {
        features[k] = v.to_json();
      }
    }
    arr.push_back(nlohmann::json{{"thing_id", spec.thing_id},
                                 {"class", device_class_name(spec.device_class)},
                                 {"publish_period_ms", spec.publish_period_ms},
                                 {"ctmin", spec.ctmin},
                                 {"ctmax", spec.ctmax},
                                 {"attributes", attrs},
                                 {"state", state},
                                 {"features", features}});
  }
  return arr;
}

std::vector<DeviceSpec> load_fleet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_fleet: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return fleet_from_json(j);
}

Environment environment_from_json(const nlohmann::json& j) {
  Environment env;
  env.occupancy_high = j.value("occupancy_high", false);
  env.ambient_lux = j.value("ambient_lux", 400.0);
  env.temperature_c = j.value("temperature_c", 21.0);
  env.humidity_pct = j.value("humidity_pct", 45.0);
  env.seed = j.value("seed", 0);
  auto drift = [&](const char* key) {
    DriftParams d;
    if (j.contains(key)) {
      d.slope_per_s = j[key].value("slope_per_s", 0.0);
      d.noise_amp = j[key].value("noise_amp", 0.0);
    }
    return d;
  };
  env.lux_drift = drift("lux_drift");
  env.temperature_drift = drift("temperature_drift");
  env.humidity_drift = drift("humidity_drift");
  if (j.contains("occupancy_schedule")) {
    for (const auto& pj : j["occupancy_schedule"]) {
      env.occupancy_schedule.push_back(OccupancyPhase{
          pj.at("at_ms").get<std::int64_t>(), pj.at("high").get<bool>()});
    }
    std::sort(env.occupancy_schedule.begin(), env.occupancy_schedule.end(),
              [](const auto& a, const auto& b) { return a.at_ms < b.at_ms; });
  }
  return env;
}

nlohmann::json environment_to_json(const Environment& env) {
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& p : env.occupancy_schedule) {
    sched.push_back(nlohmann::json{{"at_ms", p.at_ms}, {"high", p.high}});
  }
  auto drift = [](const DriftParams& d) {
    return nlohmann::json{{"slope_per_s", d.slope_per_s},
                          {"noise_amp", d.noise_amp}};
  };
  return nlohmann::json{{"occupancy_high", env.occupancy_high},
                        {"ambient_lux", env.ambient_lux},
                        {"temperature_c", env.temperature_c},
                        {"humidity_pct", env.humidity_pct},
                        {"seed", env.seed},
                        {"lux_drift", drift(env.lux_drift)},
                        {"temperature_drift", drift(env.temperature_drift)},
                        {"humidity_drift", drift(env.humidity_drift)},
                        {"occupancy_schedule", sched}};
}

}  // namespace hst
