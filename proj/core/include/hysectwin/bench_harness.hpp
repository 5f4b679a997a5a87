#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/hybrid_pipeline.hpp"
#include "hysectwin/message_bus.hpp"

namespace hst {

struct LatencySample {
  std::string topic;
  Channel channel = Channel::live;
  double t_src = 0.0;    // envelope source timestamp on the run timeline
  double t_rules = 0.0;  // rule-ingestion entry
  double t_db = 0.0;     // persistence acknowledgment
};

/// Stage deltas. d_end is defined as the sum of the two stages so the
/// decomposition identity holds exactly.
struct StageDeltas {
  double d_ingest = 0.0;
  double d_rules_db = 0.0;
  double d_end = 0.0;

  static StageDeltas from(const LatencySample& s) {
    StageDeltas d;
    d.d_ingest = s.t_rules - s.t_src;
    d.d_rules_db = s.t_db - s.t_rules;
    d.d_end = d.d_ingest + d.d_rules_db;
    return d;
  }
};

struct StatSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::optional<double> jitter;  // sample standard deviation; none for n < 2
};

/// Mean/min/max exact; median and percentiles by nearest rank
/// (1-based index ceil(q*n) on the sorted list); jitter with the n-1
/// divisor. Throws on empty input.
StatSummary summarize(std::vector<double> samples);

struct WorkloadProfile {
  enum class Kind { smoke, baseline, sweep };
  Kind kind = Kind::smoke;
  int virtual_users = 2;
  int sweep_to = 0;        // sweep ramps VUs from virtual_users to sweep_to
  double duration_s = 60;  // virtual seconds (per step for sweeps)
  double rate_per_vu = 1.0;
  double success_floor = 0.999;

  void validate() const;  // smoke: 1-5 VUs, 60-180 s, floor 0.999
};

const char* workload_kind_name(WorkloadProfile::Kind k);

/// Append-only file-backed event store with fsync-on-append; supports
/// YCSB-style read/update/delete on top of the log via an in-memory
/// index. Insert latency is measured per operation.
class EventStore {
 public:
  explicit EventStore(const std::string& path);
  ~EventStore();

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  /// Appends durably; returns (key, latency_ms). Throws on a closed
  /// store or I/O failure, counting the failure.
  std::pair<std::uint64_t, double> insert(const nlohmann::json& event);
  std::optional<nlohmann::json> read(std::uint64_t key);
  double update(std::uint64_t key, const nlohmann::json& event);
  double remove(std::uint64_t key);
  void close();
  bool is_open() const { return fd_ >= 0; }

  std::uint64_t successes() const { return successes_; }
  std::uint64_t failures() const { return failures_; }
  double success_ratio() const;
  std::uint64_t count() const { return next_key_ - 1; }

 private:
  double append_line(const nlohmann::json& j);

  std::string path_;
  int fd_ = -1;
  std::uint64_t next_key_ = 1;
  std::map<std::uint64_t, std::pair<std::int64_t, std::size_t>> index_;
  std::uint64_t successes_ = 0;
  std::uint64_t failures_ = 0;
};

struct SweepStep {
  int vus = 0;
  std::uint64_t published = 0;
  double offered_rate = 0.0;
  double achieved_throughput = 0.0;
};

struct RunResult {
  WorkloadProfile profile;
  std::vector<LatencySample> samples;
  std::uint64_t published = 0;
  std::uint64_t processed = 0;
  std::uint64_t losses = 0;
  double wall_duration_ms = 0.0;
  double throughput_msgs_s = 0.0;
  double success_ratio = 1.0;
  bool passed = false;
  std::vector<SweepStep> steps;
};

/// Drives workload profiles through a pipeline, instruments the
/// three-stage latency decomposition per processed message, and gates
/// baseline/sweep runs on a passed smoke load.
class Harness {
 public:
  Harness(Bus& bus, Pipeline& pipeline, EventStore& store);

  /// speed 0 runs the virtual schedule as fast as possible; 1.0 paces
  /// publishes on the wall clock at the virtual rate.
  RunResult run_workload(const WorkloadProfile& profile, double speed = 0.0);

  /// Drains the bus subscription through the pipeline; returns the
  /// number of envelopes processed.
  std::uint64_t drain();

  bool smoke_passed() const { return smoke_passed_; }
  const std::vector<LatencySample>& samples() const { return samples_; }
  const std::vector<double>& insert_latencies(Channel ch) const {
    return ch == Channel::live ? insert_ms_live_ : insert_ms_twin_;
  }

 private:
  Bus& bus_;
  Pipeline& pipeline_;
  EventStore& store_;
  std::shared_ptr<Subscription> sub_;
  std::vector<LatencySample> samples_;
  std::vector<double> insert_ms_live_;
  std::vector<double> insert_ms_twin_;
  bool smoke_passed_ = false;
};

// ---- report rendering (CSV, UTF-8, 2-decimal latencies) ----

std::string format_ms(double v);

/// Per-thing table mirroring the per-channel latency tables:
/// thingId,N,Mean,Median,P95,P99,Min,Max,Jitter over d_end.
void write_channel_latency_csv(const std::string& path,
                               const std::vector<LatencySample>& samples,
                               Channel channel);

/// Aggregate metric table: Metric,UC,Channel,Count,Mean,Median,P95,P99,
/// Min,Max with rows lat_end_ms, lat_rules_db_ms, insert_ms per channel.
void write_aggregate_csv(const std::string& path, const std::string& uc_label,
                         const std::vector<LatencySample>& samples,
                         const std::vector<double>& insert_live,
                         const std::vector<double>& insert_twin);

/// Detection table: Engine,Campaign,TTP,ThingId,DetectionTimeMs,CSFTag,
/// Timestamp,Missed,Duplicates.
void write_detection_csv(const std::string& path,
                         const std::vector<DetectionRecord>& records);

struct ImprovementRow {
  std::string campaign;
  std::string ttp;
  std::string thing_id;
  double durable_ms = 0.0;
  double hybrid_ms = 0.0;
};

/// Campaign,TTP,ThingId,DurableMs,HybridMs,ImprovementPct.
void write_improvement_csv(const std::string& path,
                           const std::vector<ImprovementRow>& rows);

}  // namespace hst
