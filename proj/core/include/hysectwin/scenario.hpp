#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/device_sim.hpp"
#include "hysectwin/hybrid_pipeline.hpp"
#include "hysectwin/message_bus.hpp"

namespace hst {

enum class EventKind {
  unauthorized_command,
  config_tamper,
  twin_spoof,
  state_suppress,
  telemetry_burst,
  c2_toggle_train,
  ramp
};

const char* event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct ScenarioEvent {
  std::int64_t at_ms = 0;
  EventKind kind = EventKind::unauthorized_command;
  std::string thing_id;
  nlohmann::json params;
  std::string campaign;  // C0012 | C0020 | C0025 | C0028
  std::string ttp;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<ScenarioEvent> events;  // sorted by at_ms after load
  std::int64_t duration_ms = 30000;
  std::optional<nlohmann::json> environment;  // optional env overrides
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

/// Replays campaign-inspired attack events against a running simulation
/// on the virtual clock, recording ground-truth injection timestamps.
/// Missing targets are skipped and recorded as not executed.
class Injector {
 public:
  Injector(Scenario scenario, Bus& bus, Fleet& fleet);

  /// Executes events (and the spread-out portions of bursts, toggle
  /// trains and ramps) that are due at now_ms.
  void on_tick(std::int64_t now_ms);

  const GroundTruth& ground_truth() const { return truth_; }
  const Scenario& scenario() const { return scenario_; }
  bool finished(std::int64_t now_ms) const;

 private:
  struct BurstState {
    std::string thing_id;
    std::string campaign;
    std::int64_t start_ms = 0;
    std::int64_t window_ms = 1000;
    int total = 0;
    int published = 0;
  };
  struct ToggleState {
    std::string thing_id;
    std::string campaign;
    std::string source;
    std::string path;
    std::int64_t next_ms = 0;
    std::int64_t period_ms = 0;
    int remaining = 0;
    bool next_on = false;
  };
  struct RampLeg {
    std::string feature;
    double from = 0.0;
    double to = 0.0;
  };
  struct RampState {
    std::string thing_id;
    std::string campaign;
    std::int64_t start_ms = 0;
    std::int64_t duration_ms = 0;
    double noise_amp = 0.0;
    std::vector<RampLeg> legs;
    bool finished = false;
  };

  void execute(const ScenarioEvent& e, std::int64_t now_ms);
  double noise(std::int64_t now_ms, const std::string& channel) const;

  Scenario scenario_;
  Bus& bus_;
  Fleet& fleet_;
  std::size_t next_event_ = 0;
  GroundTruth truth_;
  std::vector<BurstState> bursts_;
  std::vector<ToggleState> toggles_;
  std::vector<RampState> ramps_;
  std::uint64_t injector_seq_ = 0;
};

}  // namespace hst
