#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/message_bus.hpp"
#include "hysectwin/value.hpp"

namespace hst {

enum class DeviceClass {
  color_temp_light,
  dimmable_light,
  illuminance_sensor,
  temperature_sensor,
  humidity_sensor,
  switch_device
};

const char* device_class_name(DeviceClass c);
DeviceClass device_class_from_name(const std::string& name);

struct DeviceSpec {
  std::string thing_id;
  DeviceClass device_class = DeviceClass::color_temp_light;
  std::map<std::string, Value> attributes;  // manufacturername, modelid, ...
  std::map<std::string, Value> initial_features;
  std::int64_t publish_period_ms = 1000;
  int ctmin = 250;
  int ctmax = 454;
};

struct DriftParams {
  double slope_per_s = 0.0;
  double noise_amp = 0.0;
};

struct OccupancyPhase {
  std::int64_t at_ms = 0;
  bool high = false;
};

/// Exogenous environment. Drift and the occupancy schedule are pure
/// functions of time; sensor noise is counter-based on (seed, time,
/// channel) so replays are reproducible regardless of call order.
struct Environment {
  bool occupancy_high = false;
  double ambient_lux = 400.0;
  double temperature_c = 21.0;
  double humidity_pct = 45.0;
  DriftParams lux_drift;
  DriftParams temperature_drift;
  DriftParams humidity_drift;
  std::uint64_t seed = 0;
  std::vector<OccupancyPhase> occupancy_schedule;  // sorted by at_ms

  struct Sample {
    bool occupancy_high = false;
    double lux = 0.0;
    double temperature_c = 0.0;
    double humidity_pct = 0.0;
  };
  Sample sample(std::int64_t now_ms) const;
  double noise(std::int64_t now_ms, std::uint64_t channel, double amp) const;
};

struct BehaviorParams {
  double lux_on_threshold = 200.0;
  double lux_dim_threshold = 600.0;
  int bri_comfort = 180;
  int dim_step = 40;
};

struct LightState {
  bool on = true;
  int bri = 180;
  int ct = 250;
  bool reachable = true;
  std::string alert = "none";
};

struct CommandResult {
  std::optional<Value> old_value;
  Value new_value;
  bool clamped = false;
};

/// The simulated physical twin: a fleet of smart-lighting IoT nodes that
/// initialize to defaults, react to the environment, accept commands and
/// publish envelopes on the live channel. Single-threaded; identical
/// inputs produce byte-identical envelope streams.
class Fleet {
 public:
  static Fleet init(std::vector<DeviceSpec> specs, BehaviorParams params = {});

  /// Applies behavior rules (occupancy overrides dimming), samples the
  /// environment, and returns envelopes for devices whose publish period
  /// elapsed. The first call also flushes the initial envelope queued
  /// for every device. now_ms must be non-decreasing across calls.
  std::vector<Envelope> step(const Environment& env, std::int64_t now_ms);

  /// Sets a feature; the command event (with source) rides on the next
  /// envelope of the target device. Out-of-range numeric values clamp
  /// with the clamped flag set. Throws on unknown thing or feature.
  CommandResult apply_command(const std::string& thing_id,
                              const std::string& path, Value value,
                              const std::string& source_id);

  /// Forces the reported value of a path until the deadline; internal
  /// state keeps following the behavior rules.
  void suppress_report(const std::string& thing_id, const std::string& path,
                       Value forced, std::int64_t until_ms);

  /// Mutates a static attribute in place (configuration tampering).
  void tamper_attribute(const std::string& thing_id, const std::string& name,
                        Value value);

  /// Writes a feature directly, without a command event (ramp sources).
  void set_feature_source(const std::string& thing_id, const std::string& path,
                          Value value);

  /// Envelopes of this thing published while now <= until_ms carry the tag.
  void set_campaign_tag(const std::string& thing_id, const std::string& tag,
                        std::int64_t until_ms);

  bool has_thing(const std::string& thing_id) const;
  const LightState* light_state(const std::string& thing_id) const;
  DeviceObservation observe(const std::string& thing_id,
                            std::int64_t now_ms) const;
  std::size_t size() const { return devices_.size(); }
  std::vector<std::string> thing_ids() const;

 private:
  struct PendingCommand {
    std::string source;
    std::string path;
    Value value;
    std::uint64_t cmd_seq = 0;
  };
  struct Device {
    DeviceSpec spec;
    LightState light;
    std::map<std::string, Value> features;  // reported non-light features
    std::int64_t last_pub_ms = 0;
    bool initial_pending = true;
    std::uint64_t seq = 0;
    std::deque<PendingCommand> pending_commands;
    std::map<std::string, std::pair<Value, std::int64_t>> report_overrides;
    std::optional<std::pair<std::string, std::int64_t>> campaign_tag;
  };

  Device& require(const std::string& thing_id);
  const Device& require(const std::string& thing_id) const;
  bool is_light(const Device& d) const;
  void apply_behavior(Device& d, const Environment::Sample& s, bool lux_rising);
  std::map<std::string, Value> reported_features(const Device& d,
                                                 const Environment& env,
                                                 const Environment::Sample& s,
                                                 std::int64_t now_ms) const;

  std::map<std::string, Device> devices_;
  BehaviorParams params_;
  std::optional<double> prev_lux_;
  std::uint64_t next_cmd_seq_ = 1;
};

std::vector<DeviceSpec> fleet_from_json(const nlohmann::json& j);
nlohmann::json fleet_to_json(const std::vector<DeviceSpec>& specs);
std::vector<DeviceSpec> load_fleet(const std::string& path);

Environment environment_from_json(const nlohmann::json& j);
nlohmann::json environment_to_json(const Environment& env);

}  // namespace hst
