#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/bench_harness.hpp"
#include "hysectwin/defaults.hpp"
#include "hysectwin/hybrid_pipeline.hpp"
#include "hysectwin/scenario.hpp"

namespace hst {

struct RunConfig {
  std::string scenario = "uc1_c0012";  // builtin name or file path
  EngineMode mode = EngineMode::hybrid;
  std::uint64_t seed = 0;  // 0 keeps the scenario's own seed
  double speed = 0.0;      // 0 = fast virtual replay, 1.0 = paced
  std::string report_dir = "runs";
  std::optional<std::string> fleet_path;
  std::optional<std::string> rules_path;
  std::optional<std::string> fuzzy_path;
  std::optional<std::string> csf_path;
  bool skip_smoke = false;
  WorkloadProfile smoke;  // gate profile; duration in virtual seconds
  std::int64_t tick_ms = 25;
  std::optional<std::string> record_path;  // tap the full stream to a file
  std::optional<std::string> replay_path;  // drive from a record file
  std::optional<std::string> truth_path;   // ground truth for replay runs
  std::uint16_t listen_port = 0;
  bool listen = false;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RunOutput {
  std::string run_dir;
  std::string scenario_name;
  std::string engine_label;
  GroundTruth truth;
  std::vector<Alert> alerts;
  DetectionAccounting accounting;
  RunResult smoke;
  std::vector<LatencySample> samples;
  std::vector<double> insert_live;
  std::vector<double> insert_twin;
  std::uint64_t published = 0;
  std::uint64_t processed = 0;
  std::uint64_t losses = 0;
  double success_ratio = 1.0;
  bool gates_passed = false;
};

/// Boots bus, fleet, twin, pipeline; runs the smoke gate and then the
/// scenario (or a record-file replay); persists raw outputs under the
/// run directory and renders the CSV reports.
RunOutput run_scenario(const RunConfig& config);

struct CompareOutput {
  std::string compare_dir;
  RunOutput durable;
  RunOutput hybrid;
  std::vector<ImprovementRow> improvements;
};

/// Runs the scenario in deterministic mode while recording the stream,
/// then replays the identical stream through a hybrid pipeline, and
/// reports per-injection detection times with improvement percentages.
CompareOutput run_compare(const RunConfig& config);

/// Re-renders the CSV reports from the raw files stored in a run
/// directory. Pure and idempotent.
void render_reports(const std::string& run_dir);

/// Loads the scenario named by the config (builtin name or path).
Scenario resolve_scenario(const RunConfig& config);

}  // namespace hst
