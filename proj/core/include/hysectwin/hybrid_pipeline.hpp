#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/fuzzy_engine.hpp"
#include "hysectwin/message_bus.hpp"
#include "hysectwin/rete_engine.hpp"
#include "hysectwin/semantic_model.hpp"
#include "hysectwin/twin_core.hpp"

namespace hst {

enum class EngineMode { deterministic_only, hybrid };
const char* engine_mode_name(EngineMode m);
EngineMode engine_mode_from_name(const std::string& name);

enum class AlertOrigin { deterministic, fuzzy, hybrid };
const char* alert_origin_name(AlertOrigin o);

struct TermActivation {
  std::string variable;
  std::string term;
  double degree = 0.0;
};

struct Alert {
  std::uint64_t alert_id = 0;
  std::string thing_id;
  AlertOrigin origin = AlertOrigin::deterministic;
  std::string rule_id;  // deterministic origin
  double mu = 0.0;      // fuzzy origin
  RiskBand risk_band = RiskBand::low;
  std::string ttp;
  std::string campaign;  // empty when the trigger carried no tag
  std::string csf_tag;
  std::string severity = "medium";
  std::string message;
  std::int64_t raised_at_ms = 0;   // virtual clock
  std::int64_t trigger_ts_ms = 0;  // ts_ms of the causing envelope
  // explanation: supporting facts (deterministic) or fired terms plus the
  // feature snapshot (fuzzy)
  std::vector<SemanticFact> support;
  std::vector<TermActivation> fuzzy_terms;
  std::vector<double> features;

  nlohmann::json to_json() const;
  static Alert from_json(const nlohmann::json& j);
};

struct CsfTagMap {
  std::string deterministic = "DE.DP-5";
  std::string fuzzy = "RS.RP-1";
  std::map<std::string, std::string> overrides;  // rule_id -> tag

  static CsfTagMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Applies the CSF tag policy: per-rule overrides win, then the
/// per-origin defaults; an unmapped origin yields "UNMAPPED".
void tag_csf(Alert& alert, const CsfTagMap& map);

struct DetectionRecord {
  std::string engine;
  std::string campaign;
  std::string ttp;
  std::string thing_id;
  std::int64_t injection_ts_ms = 0;
  bool executed = true;
  bool missed = true;
  std::int64_t first_alert_ms = 0;   // valid when !missed
  std::int64_t detection_time_ms = 0;
  std::string csf_tag;
  int duplicates = 0;
};

struct GroundTruthEntry {
  std::string campaign;
  std::string ttp;
  std::string thing_id;
  std::int64_t injection_ts_ms = 0;
  bool executed = true;
};
using GroundTruth = std::vector<GroundTruthEntry>;

struct DetectionAccounting {
  std::vector<DetectionRecord> records;
  std::vector<Alert> false_positives;  // alerts matching no injection
};

/// Per-injection first-match accounting: an alert matches when TTP and
/// thing agree, it was raised at or after the injection, and its campaign
/// tag (when present) agrees. Later matches count as duplicates.
DetectionAccounting detection_time(const GroundTruth& truth,
                                   const std::vector<Alert>& alerts,
                                   const std::string& engine_label);

/// (t_durable - t_hybrid) / t_durable * 100. Throws on a non-positive
/// baseline. Report formatting rounds to 2 decimals.
double improvement(double t_durable_ms, double t_hybrid_ms);

struct PipelineConfig {
  EngineMode mode = EngineMode::hybrid;
  std::vector<CrispRule> rules;
  FuzzyConfig fuzzy;
  FeatureSpec features;
  CsfTagMap csf;
  std::set<std::string> allowlist;  // authorized command sources
  std::int64_t dedup_window_ms = 5000;
  std::int64_t grace_window_ms = 1000;    // twin divergence sync grace
  std::int64_t rate_window_ms = 1000;     // sliding window for rate facts
  std::int64_t freshness_horizon_ms = 30000;
};

/// End-to-end reasoning path per message: twin update and change-driven
/// live->twin mirroring, semantic lifting into the fact base, incremental
/// Rete evaluation, and (in hybrid mode) fuzzy scoring over the feature
/// vector. Engine errors become diagnostic alerts, never silent drops.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  /// Virtual clock; must be non-decreasing. process() also advances it
  /// to the envelope's ts_ms.
  void advance_clock(std::int64_t now_ms);
  std::int64_t now_ms() const { return now_ms_; }

  std::vector<Alert> process(const Envelope& env);

  const std::vector<Alert>& alerts() const { return alerts_; }
  std::uint64_t processed_total() const { return processed_; }
  std::uint64_t suppressed_duplicates() const { return suppressed_; }

  TwinRegistry& twin() { return twin_; }
  const FactBase& facts() const { return fb_; }
  ReteNetwork& network() { return net_; }
  const PipelineConfig& config() const { return cfg_; }

  /// Wall clock used for latency stamps (ms, monotonic, run origin).
  void set_wall_clock(std::function<double()> fn) { wall_ = std::move(fn); }
  /// Durable persistence per channel; returns success. When unset, the
  /// persist stage is a timed no-op.
  void set_persist(std::function<bool(Channel, const nlohmann::json&)> fn) {
    persist_ = std::move(fn);
  }
  /// Receives (topic, channel, t_src, t_rules, t_db) per persisted copy.
  using StampCollector = std::function<void(const std::string&, Channel,
                                            double, double, double)>;
  void set_stamp_collector(StampCollector fn) { stamps_ = std::move(fn); }

 private:
  struct ThingDerived {
    std::deque<std::int64_t> telemetry_times;
    std::deque<std::int64_t> command_times;
  };

  void feed_rete(const SemanticFact& fact, const FactDelta& delta,
                 std::vector<Firing>* firings,
                 std::vector<SemanticFact>* transients);
  void assert_derived(const std::string& thing, const std::string& predicate,
                      Value v, std::vector<Firing>* firings,
                      std::vector<SemanticFact>* transients);
  void refresh_mismatch_facts(const std::string& thing,
                              std::vector<Firing>* firings,
                              std::vector<SemanticFact>* transients);
  bool dedup_pass(const std::string& thing, const std::string& ttp,
                  AlertOrigin origin);
  Alert* emit(Alert alert, std::vector<Alert>* out);

  PipelineConfig cfg_;
  TwinRegistry twin_;
  FactBase fb_;
  ReteNetwork net_;
  std::map<std::string, std::int64_t> fb_to_rete_;  // live rete ids by fb key
  std::map<std::string, ThingDerived> derived_;
  std::map<std::string, bool> fuzzy_latch_;  // per-thing edge trigger
  std::map<std::string, std::int64_t> dedup_last_;
  std::vector<Alert> alerts_;
  std::int64_t now_ms_ = 0;
  std::int64_t transient_id_ = -1;  // transient facts use negative ids
  std::uint64_t next_alert_id_ = 1;
  std::uint64_t processed_ = 0;
  std::uint64_t suppressed_ = 0;
  std::function<double()> wall_;
  std::function<bool(Channel, const nlohmann::json&)> persist_;
  StampCollector stamps_;
};

}  // namespace hst
