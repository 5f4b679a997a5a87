#include "hysectwin/bench_harness.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "hysectwin/error.hpp"

namespace hst {

StatSummary summarize(std::vector<double> samples) {
  if (samples.empty()) throw Error("summarize: empty input");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  auto nearest_rank = [&](double q) {
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (idx < 1) idx = 1;
    if (idx > n) idx = n;
    return samples[idx - 1];
  };
  StatSummary s;
  s.n = n;
  s.min = samples.front();
  s.max = samples.back();
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
           static_cast<double>(n);
  s.median = nearest_rank(0.5);
  s.p95 = nearest_rank(0.95);
  s.p99 = nearest_rank(0.99);
  if (n >= 2) {
    double acc = 0.0;
    for (double x : samples) acc += (x - s.mean) * (x - s.mean);
    s.jitter = std::sqrt(acc / static_cast<double>(n - 1));
  }
  return s;
}

const char* workload_kind_name(WorkloadProfile::Kind k) {
  switch (k) {
    case WorkloadProfile::Kind::smoke: return "smoke";
    case WorkloadProfile::Kind::baseline: return "baseline";
    case WorkloadProfile::Kind::sweep: return "sweep";
  }
  return "?";
}

void WorkloadProfile::validate() const {
  if (virtual_users < 1) throw Error("workload: virtual_users must be >= 1");
  if (duration_s < 0) throw Error("workload: duration_s must be >= 0");
  if (rate_per_vu < 0) throw Error("workload: rate_per_vu must be >= 0");
  if (kind == Kind::smoke) {
    if (virtual_users > 5) {
      throw Error("smoke workload: 1-5 virtual users required");
    }
    if (duration_s != 0 && (duration_s < 60 || duration_s > 180)) {
      throw Error("smoke workload: duration must be 60-180 s");
    }
    if (success_floor < 0.999) {
      throw Error("smoke workload: success floor is 99.9%");
    }
  }
  if (kind == Kind::sweep && sweep_to < virtual_users) {
    throw Error("sweep workload: sweep_to must be >= virtual_users");
  }
}

EventStore::EventStore(const std::string& path) : path_(path) {
  fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
  if (fd_ < 0) throw Error("EventStore: cannot open '" + path + "'");
}

EventStore::~EventStore() { close(); }

void EventStore::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

double EventStore::success_ratio() const {
  const auto total = successes_ + failures_;
  return total == 0 ? 1.0 : static_cast<double>(successes_) /
                                static_cast<double>(total);
}

double EventStore::append_line(const nlohmann::json& j) {
  auto t0 = std::chrono::steady_clock::now();
  if (fd_ < 0) {
    ++failures_;
    throw Error("EventStore: store is closed");
  }
  std::string line = j.dump();
  line += '\n';
  ssize_t written = ::write(fd_, line.data(), line.size());
  if (written != static_cast<ssize_t>(line.size()) || ::fdatasync(fd_) != 0) {
    ++failures_;
    throw Error("EventStore: append failed: " +
                std::string(std::strerror(errno)));
  }
  ++successes_;
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

std::pair<std::uint64_t, double> EventStore::insert(
    const nlohmann::json& event) {
  const std::uint64_t key = next_key_;
  std::int64_t offset = fd_ >= 0 ? ::lseek(fd_, 0, SEEK_CUR) : -1;
  nlohmann::json line{{"key", key}, {"deleted", false}, {"event", event}};
  double ms = append_line(line);
  index_[key] = {offset, line.dump().size() + 1};
  ++next_key_;
  return {key, ms};
}

std::optional<nlohmann::json> EventStore::read(std::uint64_t key) {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  std::ifstream in(path_);
  if (!in) return std::nullopt;
  in.seekg(it->second.first);
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  auto j = nlohmann::json::parse(line);
  if (j.value("deleted", false)) return std::nullopt;
  return j.at("event");
}

double EventStore::update(std::uint64_t key, const nlohmann::json& event) {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error("EventStore: unknown key");
  std::int64_t offset = fd_ >= 0 ? ::lseek(fd_, 0, SEEK_CUR) : -1;
  nlohmann::json line{{"key", key}, {"deleted", false}, {"event", event}};
  double ms = append_line(line);
  it->second = {offset, line.dump().size() + 1};
  return ms;
}

double EventStore::remove(std::uint64_t key) {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error("EventStore: unknown key");
  double ms = append_line(nlohmann::json{{"key", key}, {"deleted", true}});
  index_.erase(it);
  return ms;
}

Harness::Harness(Bus& bus, Pipeline& pipeline, EventStore& store)
    : bus_(bus), pipeline_(pipeline), store_(store) {
  sub_ = bus_.subscribe(TopicFilter::parse("#"));
  pipeline_.set_wall_clock([this] { return bus_.wall_now_ms(); });
  pipeline_.set_persist([this](Channel ch, const nlohmann::json& record) {
    try {
      double ms = store_.insert(record).second;
      (ch == Channel::live ? insert_ms_live_ : insert_ms_twin_).push_back(ms);
      return true;
    } catch (const Error&) {
      return false;
    }
  });
  pipeline_.set_stamp_collector([this](const std::string& topic, Channel ch,
                                       double t_src, double t_rules,
                                       double t_db) {
    samples_.push_back(LatencySample{topic, ch, t_src, t_rules, t_db});
  });
}

std::uint64_t Harness::drain() {
  Envelope env;
  std::uint64_t n = 0;
  while (sub_->try_pop(env)) {
    pipeline_.advance_clock(env.ts_ms);
    pipeline_.process(env);
    ++n;
  }
  return n;
}

RunResult Harness::run_workload(const WorkloadProfile& profile, double speed) {
  profile.validate();
  if (profile.kind != WorkloadProfile::Kind::smoke && !smoke_passed_) {
    throw Error("workload gate: smoke must pass before " +
                std::string(workload_kind_name(profile.kind)) + " runs");
  }

  RunResult result;
  result.profile = profile;
  const std::size_t samples_before = samples_.size();
  const std::uint64_t succ_before = store_.successes();
  const std::uint64_t fail_before = store_.failures();
  const double wall_start = bus_.wall_now_ms();

  std::vector<int> step_vus;
  if (profile.kind == WorkloadProfile::Kind::sweep) {
    for (int v = profile.virtual_users; v <= profile.sweep_to; ++v) {
      step_vus.push_back(v);
    }
  } else {
    step_vus.push_back(profile.virtual_users);
  }

  std::uint64_t processed_total = 0;
  std::int64_t virtual_now = pipeline_.now_ms();
  std::map<int, std::uint64_t> vu_seq;
  for (int vus : step_vus) {
    const double step_wall_start = bus_.wall_now_ms();
    const auto per_vu = static_cast<std::uint64_t>(profile.duration_s *
                                                   profile.rate_per_vu);
    std::uint64_t step_published = 0;
    const std::int64_t step_start = virtual_now;
    for (std::uint64_t i = 0; i < per_vu; ++i) {
      std::int64_t t = step_start + static_cast<std::int64_t>(
                                        1000.0 * static_cast<double>(i) /
                                        profile.rate_per_vu);
      if (speed > 0) {
        double target_wall =
            step_wall_start + static_cast<double>(t - step_start) / speed;
        double now_wall = bus_.wall_now_ms();
        if (target_wall > now_wall) {
          std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
              target_wall - now_wall));
        }
      }
      for (int vu = 0; vu < vus; ++vu) {
        Envelope env;
        const std::string thing = "vu-" + std::to_string(vu + 1);
        env.topic = Topic::make(Channel::live, thing, true);
        env.thing_id = thing;
        env.seq = ++vu_seq[vu];
        env.ts_ms = t;
        env.payload.features["seq"] = Value(static_cast<std::int64_t>(i));
        env.payload.features["load"] =
            Value(static_cast<double>((i * 7 + vu * 13) % 100));
        bus_.publish(std::move(env));
        ++step_published;
      }
      virtual_now = t;
      processed_total += drain();
    }
    processed_total += drain();
    const double step_wall =
        std::max(1e-6, bus_.wall_now_ms() - step_wall_start);
    result.steps.push_back(SweepStep{
        vus, step_published,
        static_cast<double>(vus) * profile.rate_per_vu,
        static_cast<double>(step_published) / (step_wall / 1000.0)});
    result.published += step_published;
  }

  result.processed = processed_total;
  result.losses = result.published > processed_total
                      ? result.published - processed_total
                      : 0;
  result.wall_duration_ms = bus_.wall_now_ms() - wall_start;
  result.throughput_msgs_s =
      result.wall_duration_ms > 0
          ? static_cast<double>(result.processed) /
                (result.wall_duration_ms / 1000.0)
          : 0.0;
  const std::uint64_t succ = store_.successes() - succ_before;
  const std::uint64_t fail = store_.failures() - fail_before;
  result.success_ratio =
      (succ + fail) == 0
          ? 1.0
          : static_cast<double>(succ) / static_cast<double>(succ + fail);
  result.samples.assign(samples_.begin() + static_cast<std::ptrdiff_t>(samples_before),
                        samples_.end());
  result.passed =
      result.success_ratio >= profile.success_floor && result.losses == 0;
  if (profile.kind == WorkloadProfile::Kind::smoke) {
    smoke_passed_ = result.passed;
  }
  return result;
}

std::string format_ms(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

namespace {

void write_summary_row(FILE* f, const std::string& label,
                       const StatSummary& s) {
  std::fprintf(f, "%s,%zu,%s,%s,%s,%s,%s,%s,%s\n", label.c_str(), s.n,
               format_ms(s.mean).c_str(), format_ms(s.median).c_str(),
               format_ms(s.p95).c_str(), format_ms(s.p99).c_str(),
               format_ms(s.min).c_str(), format_ms(s.max).c_str(),
               s.jitter ? format_ms(*s.jitter).c_str() : "--");
}

}  // namespace

void write_channel_latency_csv(const std::string& path,
                               const std::vector<LatencySample>& samples,
                               Channel channel) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("report: cannot open '" + path + "'");
  std::fprintf(f, "thingId,N,Mean,Median,P95,P99,Min,Max,Jitter\n");
  std::map<std::string, std::vector<double>> by_topic;
  for (const auto& s : samples) {
    if (s.channel != channel) continue;
    by_topic[s.topic].push_back(StageDeltas::from(s).d_end);
  }
  for (const auto& [topic, xs] : by_topic) {
    write_summary_row(f, topic, summarize(xs));
  }
  std::fclose(f);
}

void write_aggregate_csv(const std::string& path, const std::string& uc_label,
                         const std::vector<LatencySample>& samples,
                         const std::vector<double>& insert_live,
                         const std::vector<double>& insert_twin) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("report: cannot open '" + path + "'");
  std::fprintf(f, "Metric,UC,Channel,Count,Mean,Median,P95,P99,Min,Max\n");
  auto emit = [&](const char* metric, const char* channel,
                  const std::vector<double>& xs) {
    if (xs.empty()) return;
    auto s = summarize(xs);
    std::fprintf(f, "%s,%s,%s,%zu,%s,%s,%s,%s,%s,%s\n", metric,
                 uc_label.c_str(), channel, s.n, format_ms(s.mean).c_str(),
                 format_ms(s.median).c_str(), format_ms(s.p95).c_str(),
                 format_ms(s.p99).c_str(), format_ms(s.min).c_str(),
                 format_ms(s.max).c_str());
  };
  for (Channel ch : {Channel::live, Channel::twin}) {
    std::vector<double> ends, stages;
    for (const auto& s : samples) {
      if (s.channel != ch) continue;
      auto d = StageDeltas::from(s);
      ends.push_back(d.d_end);
      stages.push_back(d.d_rules_db);
    }
    emit("lat_end_ms", channel_name(ch), ends);
    emit("lat_rules_db_ms", channel_name(ch), stages);
    emit("insert_ms", channel_name(ch),
         ch == Channel::live ? insert_live : insert_twin);
  }
  std::fclose(f);
}

void write_detection_csv(const std::string& path,
                         const std::vector<DetectionRecord>& records) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("report: cannot open '" + path + "'");
  std::fprintf(
      f, "Engine,Campaign,TTP,ThingId,DetectionTimeMs,CSFTag,Timestamp,"
         "Missed,Duplicates\n");
  for (const auto& r : records) {
    std::fprintf(f, "%s,%s,%s,%s,%s,%s,%lld,%s,%d\n", r.engine.c_str(),
                 r.campaign.c_str(), r.ttp.c_str(), r.thing_id.c_str(),
                 r.missed ? "--"
                          : format_ms(static_cast<double>(r.detection_time_ms))
                                .c_str(),
                 r.csf_tag.c_str(),
                 static_cast<long long>(r.missed ? 0 : r.first_alert_ms),
                 r.missed ? (r.executed ? "yes" : "not_executed") : "no",
                 r.duplicates);
  }
  std::fclose(f);
}

void write_improvement_csv(const std::string& path,
                           const std::vector<ImprovementRow>& rows) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("report: cannot open '" + path + "'");
  std::fprintf(f, "Campaign,TTP,ThingId,DurableMs,HybridMs,ImprovementPct\n");
  for (const auto& r : rows) {
    std::fprintf(f, "%s,%s,%s,%s,%s,%s\n", r.campaign.c_str(), r.ttp.c_str(),
                 r.thing_id.c_str(), format_ms(r.durable_ms).c_str(),
                 format_ms(r.hybrid_ms).c_str(),
                 format_ms(improvement(r.durable_ms, r.hybrid_ms)).c_str());
  }
  std::fclose(f);
}

}  // namespace hst
