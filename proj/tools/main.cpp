#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hysectwin/bench_harness.hpp"
#include "hysectwin/defaults.hpp"
#include "hysectwin/runtime.hpp"

namespace {

using hst::RunConfig;

// precedence: CLI flags > environment > config file > shipped defaults
RunConfig base_config(const std::string& config_path) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw hst::Error("cannot open config '" + config_path + "'");
    nlohmann::json j;
    in >> j;
    cfg = RunConfig::from_json(j);
  }
  if (const char* dir = std::getenv("HST_REPORT_DIR")) {
    cfg.report_dir = dir;
  }
  return cfg;
}

void print_detection(const hst::DetectionAccounting& acc) {
  for (const auto& r : acc.records) {
    if (!r.executed) {
      std::printf("  %-8s %-6s %-10s %-28s not_executed\n", r.engine.c_str(),
                  r.campaign.c_str(), r.ttp.c_str(), r.thing_id.c_str());
    } else if (r.missed) {
      std::printf("  %-8s %-6s %-10s %-28s MISSED\n", r.engine.c_str(),
                  r.campaign.c_str(), r.ttp.c_str(), r.thing_id.c_str());
    } else {
      std::printf("  %-8s %-6s %-10s %-28s %8s ms  %s\n", r.engine.c_str(),
                  r.campaign.c_str(), r.ttp.c_str(), r.thing_id.c_str(),
                  hst::format_ms(static_cast<double>(r.detection_time_ms)).c_str(),
                  r.csf_tag.c_str());
    }
  }
  if (!acc.false_positives.empty()) {
    std::printf("  false positives: %zu\n", acc.false_positives.size());
  }
}

int run_summary(const hst::RunOutput& out) {
  std::printf("scenario %s engine %s\n", out.scenario_name.c_str(),
              out.engine_label.c_str());
  std::printf("  published %llu processed %llu losses %llu success %.4f\n",
              static_cast<unsigned long long>(out.published),
              static_cast<unsigned long long>(out.processed),
              static_cast<unsigned long long>(out.losses), out.success_ratio);
  std::printf("  alerts %zu, reports under %s\n", out.alerts.size(),
              out.run_dir.c_str());
  print_detection(out.accounting);
  std::printf("  gates %s\n", out.gates_passed ? "PASS" : "FAIL");
  return out.gates_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hysectwin: hybrid-reasoning digital-twin security monitor"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run-config file")
      ->check(CLI::ExistingFile);

  std::string scenario, engine, report_dir, fleet, rules, fuzzy, csf;
  std::uint64_t seed = 0;
  double speed = -1.0;
  bool skip_smoke = false;
  std::string record_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "builtin scenario name or a file path");
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--speed", speed, "replay speed (0 = fast virtual)");
    cmd->add_option("--report-dir", report_dir, "report output directory");
    cmd->add_option("--fleet", fleet, "fleet spec JSON file");
    cmd->add_option("--rules", rules, "rule pack JSON file");
    cmd->add_option("--fuzzy", fuzzy, "fuzzy config JSON file");
    cmd->add_option("--csf", csf, "CSF tag map JSON file");
    cmd->add_flag("--skip-smoke", skip_smoke, "skip the smoke gate");
  };

  auto* cmd_run = app.add_subcommand("run", "run a scenario end to end");
  add_common(cmd_run);
  cmd_run->add_option("--engine", engine, "deterministic | hybrid");
  cmd_run->add_option("--record", record_path, "record the bus stream to a file");
  std::string replay_in_run;
  cmd_run->add_option("--replay-file", replay_in_run,
                      "drive the run from a recorded stream");
  std::uint16_t listen_port = 0;
  bool listen = false;
  cmd_run->add_flag("--listen", listen, "accept external record lines over TCP");
  cmd_run->add_option("--listen-port", listen_port, "TCP ingest port (0 = ephemeral)");

  auto* cmd_compare =
      app.add_subcommand("compare", "deterministic vs hybrid on one stream");
  add_common(cmd_compare);

  auto* cmd_bench = app.add_subcommand("bench", "run a workload profile");
  std::string profile_kind = "smoke";
  int vus = 2, sweep_to = 0;
  double duration_s = 60, rate = 1.0;
  bool paced = false;
  std::string bench_report_dir;
  cmd_bench->add_option("--profile", profile_kind, "smoke | baseline | sweep");
  cmd_bench->add_option("--vus", vus, "virtual users");
  cmd_bench->add_option("--duration", duration_s, "duration in virtual seconds");
  cmd_bench->add_option("--rate", rate, "messages per VU per second");
  cmd_bench->add_option("--sweep-to", sweep_to, "sweep: final VU count");
  cmd_bench->add_flag("--paced", paced, "pace publishes on the wall clock");
  cmd_bench->add_option("--report-dir", bench_report_dir, "report directory");

  auto* cmd_replay = app.add_subcommand("replay", "replay a record file");
  std::string replay_file;
  double replay_speed = 0.0;
  bool shift_ts = false;
  std::string replay_report_dir;
  cmd_replay->add_option("--file", replay_file, "record file (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_replay->add_option("--speed", replay_speed,
                         "0 = as fast as possible, 1 = original pacing");
  cmd_replay->add_flag("--shift-ts", shift_ts,
                       "rebase ts_ms to now instead of preserving it");
  cmd_replay->add_option("--report-dir", replay_report_dir, "report directory");

  auto* cmd_report = app.add_subcommand("report", "re-render reports for a run");
  std::string run_dir;
  cmd_report->add_option("--run-dir", run_dir, "existing run directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = base_config(config_path);
    if (!scenario.empty()) cfg.scenario = scenario;
    if (!engine.empty()) cfg.mode = hst::engine_mode_from_name(engine);
    if (seed != 0) cfg.seed = seed;
    if (speed >= 0) cfg.speed = speed;
    if (!report_dir.empty()) cfg.report_dir = report_dir;
    if (!fleet.empty()) cfg.fleet_path = fleet;
    if (!rules.empty()) cfg.rules_path = rules;
    if (!fuzzy.empty()) cfg.fuzzy_path = fuzzy;
    if (!csf.empty()) cfg.csf_path = csf;
    if (skip_smoke) cfg.skip_smoke = true;

    if (*cmd_run) {
      if (!record_path.empty()) cfg.record_path = record_path;
      if (!replay_in_run.empty()) cfg.replay_path = replay_in_run;
      cfg.listen = listen;
      cfg.listen_port = listen_port;
      return run_summary(hst::run_scenario(cfg));
    }

    if (*cmd_compare) {
      auto out = hst::run_compare(cfg);
      std::printf("comparison for %s (reports under %s)\n",
                  out.durable.scenario_name.c_str(), out.compare_dir.c_str());
      print_detection(out.durable.accounting);
      print_detection(out.hybrid.accounting);
      for (const auto& row : out.improvements) {
        std::printf("  %-6s %-10s improvement %s%%\n", row.campaign.c_str(),
                    row.ttp.c_str(),
                    hst::format_ms(hst::improvement(row.durable_ms,
                                                    row.hybrid_ms))
                        .c_str());
      }
      bool ok = out.durable.gates_passed && out.hybrid.gates_passed;
      return ok ? 0 : 1;
    }

    if (*cmd_bench) {
      hst::WorkloadProfile profile;
      if (profile_kind == "smoke") {
        profile.kind = hst::WorkloadProfile::Kind::smoke;
      } else if (profile_kind == "baseline") {
        profile.kind = hst::WorkloadProfile::Kind::baseline;
      } else if (profile_kind == "sweep") {
        profile.kind = hst::WorkloadProfile::Kind::sweep;
      } else {
        throw hst::Error("unknown profile '" + profile_kind + "'");
      }
      profile.virtual_users = vus;
      profile.duration_s = duration_s;
      profile.rate_per_vu = rate;
      profile.sweep_to = sweep_to > 0 ? sweep_to : vus;

      const std::string dir =
          !bench_report_dir.empty() ? bench_report_dir : cfg.report_dir;
      std::filesystem::create_directories(dir);
      hst::Bus bus;
      hst::PipelineConfig pc;
      pc.rules = hst::default_rule_pack();
      pc.fuzzy = hst::default_fuzzy_config();
      pc.features = hst::default_feature_spec();
      pc.allowlist = hst::default_allowlist();
      hst::Pipeline pipeline(pc);
      hst::EventStore store(dir + "/bench_events.log");
      hst::Harness harness(bus, pipeline, store);
      if (profile.kind != hst::WorkloadProfile::Kind::smoke) {
        hst::WorkloadProfile gate;  // smoke gates the formal profiles
        gate.duration_s = 60;
        gate.rate_per_vu = 1.0;
        auto smoke = harness.run_workload(gate, 0.0);
        std::printf("smoke gate: %s (success %.4f)\n",
                    smoke.passed ? "pass" : "FAIL", smoke.success_ratio);
        if (!smoke.passed) return 1;
      }
      auto result = harness.run_workload(profile, paced ? 1.0 : 0.0);
      std::printf("%s: published %llu processed %llu losses %llu\n",
                  hst::workload_kind_name(profile.kind),
                  static_cast<unsigned long long>(result.published),
                  static_cast<unsigned long long>(result.processed),
                  static_cast<unsigned long long>(result.losses));
      std::printf("  throughput %.1f msg/s, success %.4f, %s\n",
                  result.throughput_msgs_s, result.success_ratio,
                  result.passed ? "pass" : "FAIL");
      for (const auto& step : result.steps) {
        std::printf("  step vus=%d offered=%.1f/s achieved=%.1f/s\n", step.vus,
                    step.offered_rate, step.achieved_throughput);
      }
      if (!result.samples.empty()) {
        std::vector<double> ends;
        ends.reserve(result.samples.size());
        for (const auto& s : result.samples) {
          ends.push_back(hst::StageDeltas::from(s).d_end);
        }
        auto sum = hst::summarize(ends);
        std::printf("  lat_end_ms mean %s median %s p95 %s p99 %s\n",
                    hst::format_ms(sum.mean).c_str(),
                    hst::format_ms(sum.median).c_str(),
                    hst::format_ms(sum.p95).c_str(),
                    hst::format_ms(sum.p99).c_str());
        hst::write_channel_latency_csv(dir + "/bench_live_latency.csv",
                                       result.samples, hst::Channel::live);
        hst::write_channel_latency_csv(dir + "/bench_twin_latency.csv",
                                       result.samples, hst::Channel::twin);
        hst::write_aggregate_csv(dir + "/bench_aggregate.csv",
                                 hst::workload_kind_name(profile.kind),
                                 result.samples,
                                 harness.insert_latencies(hst::Channel::live),
                                 harness.insert_latencies(hst::Channel::twin));
      }
      return result.passed ? 0 : 1;
    }

    if (*cmd_replay) {
      const std::string dir =
          !replay_report_dir.empty() ? replay_report_dir : cfg.report_dir;
      std::filesystem::create_directories(dir);
      hst::Bus bus;
      hst::PipelineConfig pc;
      pc.rules = hst::default_rule_pack();
      pc.fuzzy = hst::default_fuzzy_config();
      pc.features = hst::default_feature_spec();
      pc.allowlist = hst::default_allowlist();
      hst::Pipeline pipeline(pc);
      hst::EventStore store(dir + "/replay_events.log");
      hst::Harness harness(bus, pipeline, store);
      auto count = hst::replay(
          bus, replay_file,
          hst::ReplayOptions{replay_speed, !shift_ts, 0});
      harness.drain();
      std::printf("replayed %llu envelopes, processed %llu, alerts %zu\n",
                  static_cast<unsigned long long>(count),
                  static_cast<unsigned long long>(pipeline.processed_total()),
                  pipeline.alerts().size());
      hst::write_channel_latency_csv(dir + "/replay_live_latency.csv",
                                     harness.samples(), hst::Channel::live);
      hst::write_channel_latency_csv(dir + "/replay_twin_latency.csv",
                                     harness.samples(), hst::Channel::twin);
      return 0;
    }

    if (*cmd_report) {
      hst::render_reports(run_dir);
      std::printf("reports re-rendered under %s\n", run_dir.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
