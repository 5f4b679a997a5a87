#include "hysectwin/runtime.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "hysectwin/error.hpp"

namespace fs = std::filesystem;

namespace hst {

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.scenario = j.value("scenario", c.scenario);
  if (j.contains("engine")) {
    c.mode = engine_mode_from_name(j["engine"].get<std::string>());
  }
  c.seed = j.value("seed", c.seed);
  c.speed = j.value("speed", c.speed);
  c.report_dir = j.value("report_dir", c.report_dir);
  if (j.contains("fleet")) c.fleet_path = j["fleet"].get<std::string>();
  if (j.contains("rules")) c.rules_path = j["rules"].get<std::string>();
  if (j.contains("fuzzy")) c.fuzzy_path = j["fuzzy"].get<std::string>();
  if (j.contains("csf")) c.csf_path = j["csf"].get<std::string>();
  c.skip_smoke = j.value("skip_smoke", c.skip_smoke);
  c.tick_ms = j.value("tick_ms", c.tick_ms);
  if (j.contains("record")) c.record_path = j["record"].get<std::string>();
  if (j.contains("replay")) c.replay_path = j["replay"].get<std::string>();
  if (j.contains("truth")) c.truth_path = j["truth"].get<std::string>();
  if (j.contains("smoke")) {
    const auto& s = j["smoke"];
    c.smoke.virtual_users = s.value("virtual_users", c.smoke.virtual_users);
    c.smoke.duration_s = s.value("duration_s", c.smoke.duration_s);
    c.smoke.rate_per_vu = s.value("rate_per_vu", c.smoke.rate_per_vu);
  }
  c.listen = j.value("listen", c.listen);
  c.listen_port = j.value("listen_port", c.listen_port);
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"scenario", scenario},
                   {"engine", engine_mode_name(mode)},
                   {"seed", seed},
                   {"speed", speed},
                   {"report_dir", report_dir},
                   {"skip_smoke", skip_smoke},
                   {"tick_ms", tick_ms},
                   {"smoke",
                    {{"virtual_users", smoke.virtual_users},
                     {"duration_s", smoke.duration_s},
                     {"rate_per_vu", smoke.rate_per_vu}}}};
  if (fleet_path) j["fleet"] = *fleet_path;
  if (rules_path) j["rules"] = *rules_path;
  if (fuzzy_path) j["fuzzy"] = *fuzzy_path;
  if (csf_path) j["csf"] = *csf_path;
  if (record_path) j["record"] = *record_path;
  if (replay_path) j["replay"] = *replay_path;
  return j;
}

Scenario resolve_scenario(const RunConfig& config) {
  Scenario scenario;
  if (fs::exists(config.scenario)) {
    scenario = load_scenario(config.scenario);
  } else {
    scenario = builtin_scenario(config.scenario);
  }
  if (config.seed != 0) scenario.seed = config.seed;
  return scenario;
}

namespace {

PipelineConfig make_pipeline_config(const RunConfig& config, EngineMode mode) {
  PipelineConfig pc;
  pc.mode = mode;
  pc.rules = config.rules_path ? load_rules(*config.rules_path)
                               : default_rule_pack();
  pc.fuzzy = config.fuzzy_path ? load_fuzzy_config(*config.fuzzy_path)
                               : default_fuzzy_config();
  pc.features = default_feature_spec();
  if (config.csf_path) {
    std::ifstream in(*config.csf_path);
    if (!in) throw Error("cannot open csf map '" + *config.csf_path + "'");
    nlohmann::json j;
    in >> j;
    pc.csf = CsfTagMap::from_json(j);
  }
  pc.allowlist = default_allowlist();
  return pc;
}

Environment make_environment(const Scenario& scenario) {
  Environment env;
  if (scenario.environment) env = environment_from_json(*scenario.environment);
  env.seed = scenario.seed;
  return env;
}

std::string engine_label_for(EngineMode mode) {
  return mode == EngineMode::deterministic_only ? "Durable" : "Hybrid";
}

GroundTruth load_truth(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open ground truth '" + path + "'");
  nlohmann::json j;
  f >> j;
  GroundTruth truth;
  for (const auto& ej : j) {
    truth.push_back(GroundTruthEntry{ej.at("campaign").get<std::string>(),
                                     ej.at("ttp").get<std::string>(),
                                     ej.at("thing_id").get<std::string>(),
                                     ej.at("injection_ts_ms").get<std::int64_t>(),
                                     ej.value("executed", true)});
  }
  return truth;
}

void write_raw_outputs(const std::string& run_dir, const RunOutput& out,
                       const RunConfig& config) {
  fs::create_directories(fs::path(run_dir) / "raw");
  {
    std::ofstream f(fs::path(run_dir) / "raw" / "samples.jsonl");
    for (const auto& s : out.samples) {
      f << nlohmann::json{{"topic", s.topic},
                          {"channel", channel_name(s.channel)},
                          {"t_src", s.t_src},
                          {"t_rules", s.t_rules},
                          {"t_db", s.t_db}}
               .dump()
        << '\n';
    }
  }
  {
    std::ofstream f(fs::path(run_dir) / "raw" / "inserts.json");
    f << nlohmann::json{{"live", out.insert_live}, {"twin", out.insert_twin}}
             .dump(2);
  }
  {
    std::ofstream f(fs::path(run_dir) / "raw" / "alerts.jsonl");
    for (const auto& a : out.alerts) f << a.to_json().dump() << '\n';
  }
  {
    nlohmann::json truth = nlohmann::json::array();
    for (const auto& e : out.truth) {
      truth.push_back(nlohmann::json{{"campaign", e.campaign},
                                     {"ttp", e.ttp},
                                     {"thing_id", e.thing_id},
                                     {"injection_ts_ms", e.injection_ts_ms},
                                     {"executed", e.executed}});
    }
    std::ofstream f(fs::path(run_dir) / "raw" / "truth.json");
    f << truth.dump(2);
  }
  {
    nlohmann::json meta{{"scenario", out.scenario_name},
                        {"engine", out.engine_label},
                        {"seed", config.seed},
                        {"speed", config.speed},
                        {"published", out.published},
                        {"processed", out.processed},
                        {"losses", out.losses},
                        {"success_ratio", out.success_ratio},
                        {"smoke_passed", out.smoke.passed},
                        {"smoke_samples", out.smoke.samples.size()},
                        {"gates_passed", out.gates_passed}};
    std::ofstream f(fs::path(run_dir) / "raw" / "meta.json");
    f << meta.dump(2);
  }
}

}  // namespace

void render_reports(const std::string& run_dir) {
  const fs::path raw = fs::path(run_dir) / "raw";
  if (!fs::exists(raw)) {
    throw Error("render_reports: no raw outputs under '" + run_dir + "'");
  }

  std::vector<LatencySample> samples;
  {
    std::ifstream f(raw / "samples.jsonl");
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      LatencySample s;
      s.topic = j.at("topic").get<std::string>();
      s.channel = j.at("channel").get<std::string>() == "twin" ? Channel::twin
                                                               : Channel::live;
      s.t_src = j.at("t_src").get<double>();
      s.t_rules = j.at("t_rules").get<double>();
      s.t_db = j.at("t_db").get<double>();
      samples.push_back(std::move(s));
    }
  }
  std::vector<double> insert_live, insert_twin;
  if (fs::exists(raw / "inserts.json")) {
    std::ifstream f(raw / "inserts.json");
    nlohmann::json j;
    f >> j;
    insert_live = j.value("live", std::vector<double>{});
    insert_twin = j.value("twin", std::vector<double>{});
  }
  std::vector<Alert> alerts;
  if (fs::exists(raw / "alerts.jsonl")) {
    std::ifstream f(raw / "alerts.jsonl");
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) alerts.push_back(Alert::from_json(nlohmann::json::parse(line)));
    }
  }
  GroundTruth truth;
  if (fs::exists(raw / "truth.json")) {
    std::ifstream f(raw / "truth.json");
    nlohmann::json j;
    f >> j;
    for (const auto& ej : j) {
      truth.push_back(GroundTruthEntry{ej.at("campaign").get<std::string>(),
                                       ej.at("ttp").get<std::string>(),
                                       ej.at("thing_id").get<std::string>(),
                                       ej.at("injection_ts_ms").get<std::int64_t>(),
                                       ej.value("executed", true)});
    }
  }
  std::string engine_label = "Hybrid";
  std::string uc_label = "run";
  if (fs::exists(raw / "meta.json")) {
    std::ifstream f(raw / "meta.json");
    nlohmann::json j;
    f >> j;
    engine_label = j.value("engine", engine_label);
    uc_label = j.value("scenario", uc_label);
  }

  const fs::path dir(run_dir);
  write_channel_latency_csv((dir / "live_latency.csv").string(), samples,
                            Channel::live);
  write_channel_latency_csv((dir / "twin_latency.csv").string(), samples,
                            Channel::twin);
  write_aggregate_csv((dir / "aggregate.csv").string(), uc_label, samples,
                      insert_live, insert_twin);
  auto acc = detection_time(truth, alerts, engine_label);
  write_detection_csv((dir / "detection.csv").string(), acc.records);
}

RunOutput run_scenario(const RunConfig& config) {
  Scenario scenario = resolve_scenario(config);
  Environment environment = make_environment(scenario);

  RunOutput out;
  out.scenario_name = scenario.name;
  out.engine_label = engine_label_for(config.mode);
  const std::string run_name = scenario.name + "-" +
                               engine_mode_name(config.mode) + "-seed" +
                               std::to_string(scenario.seed);
  out.run_dir = (fs::path(config.report_dir) / run_name).string();
  fs::create_directories(out.run_dir);

  // smoke gate on an isolated pipeline: validates connectivity,
  // persistence and instrumentation before the measured run
  if (!config.skip_smoke) {
    Bus smoke_bus;
    Pipeline smoke_pipeline(make_pipeline_config(config, config.mode));
    EventStore smoke_store(
        (fs::path(out.run_dir) / "smoke_events.log").string());
    Harness smoke_harness(smoke_bus, smoke_pipeline, smoke_store);
    WorkloadProfile smoke = config.smoke;
    smoke.kind = WorkloadProfile::Kind::smoke;
    out.smoke = smoke_harness.run_workload(smoke, 0.0);
    if (!out.smoke.passed) {
      out.gates_passed = false;
      write_raw_outputs(out.run_dir, out, config);
      render_reports(out.run_dir);
      return out;
    }
  } else {
    out.smoke.passed = true;
  }

  Bus bus;
  Pipeline pipeline(make_pipeline_config(config, config.mode));
  EventStore store((fs::path(out.run_dir) / "events.log").string());
  Harness harness(bus, pipeline, store);

  std::optional<Recorder> recorder;
  if (config.record_path) {
    recorder.emplace(bus, TopicFilter::parse("#"), *config.record_path);
  }
  std::optional<TcpIngest> ingest;
  if (config.listen) ingest.emplace(bus, config.listen_port);

  if (config.replay_path) {
    replay(bus, *config.replay_path,
           ReplayOptions{config.speed, true, 0});
    harness.drain();
    if (recorder) recorder->drain();
    if (config.truth_path) out.truth = load_truth(*config.truth_path);
  } else {
    Fleet fleet = Fleet::init(config.fleet_path ? load_fleet(*config.fleet_path)
                                                : default_fleet());
    Injector injector(scenario, bus, fleet);
    const double wall_start = bus.wall_now_ms();
    for (std::int64_t t = 0; t <= scenario.duration_ms; t += config.tick_ms) {
      if (config.speed > 0) {
        double target = wall_start + static_cast<double>(t) / config.speed;
        double now = bus.wall_now_ms();
        if (target > now) {
          std::this_thread::sleep_for(
              std::chrono::duration<double, std::milli>(target - now));
        }
      }
      injector.on_tick(t);
      for (auto& env : fleet.step(environment, t)) {
        bus.publish(std::move(env));
      }
      pipeline.advance_clock(t);
      harness.drain();
      if (recorder) recorder->drain();
    }
    harness.drain();
    if (recorder) recorder->drain();
    out.truth = injector.ground_truth();
  }
  if (recorder) recorder->close();
  if (ingest) ingest->stop();

  out.alerts = pipeline.alerts();
  out.accounting = detection_time(out.truth, out.alerts, out.engine_label);
  out.samples = harness.samples();
  out.insert_live = harness.insert_latencies(Channel::live);
  out.insert_twin = harness.insert_latencies(Channel::twin);
  out.published = bus.published_total();
  out.processed = pipeline.processed_total();
  out.losses = out.published > out.processed ? out.published - out.processed
                                             : 0;
  out.success_ratio = store.success_ratio();
  out.gates_passed = out.smoke.passed && out.losses == 0 &&
                     out.success_ratio >= 0.999;

  write_raw_outputs(out.run_dir, out, config);
  render_reports(out.run_dir);
  return out;
}

CompareOutput run_compare(const RunConfig& config) {
  Scenario scenario = resolve_scenario(config);
  if (scenario.events.empty()) {
    throw Error("compare: scenario '" + scenario.name +
                "' has no ground truth");
  }

  CompareOutput out;
  const std::string cmp_name =
      scenario.name + "-compare-seed" + std::to_string(scenario.seed);
  out.compare_dir = (fs::path(config.report_dir) / cmp_name).string();
  fs::create_directories(out.compare_dir);
  const std::string stream_path =
      (fs::path(out.compare_dir) / "stream.jsonl").string();

  RunConfig durable_cfg = config;
  durable_cfg.mode = EngineMode::deterministic_only;
  durable_cfg.record_path = stream_path;
  durable_cfg.report_dir = out.compare_dir;
  out.durable = run_scenario(durable_cfg);

  RunConfig hybrid_cfg = config;
  hybrid_cfg.mode = EngineMode::hybrid;
  hybrid_cfg.replay_path = stream_path;
  hybrid_cfg.truth_path =
      (fs::path(out.durable.run_dir) / "raw" / "truth.json").string();
  hybrid_cfg.report_dir = out.compare_dir;
  hybrid_cfg.skip_smoke = true;  // one smoke gate per session
  out.hybrid = run_scenario(hybrid_cfg);

  for (const auto& dr : out.durable.accounting.records) {
    if (dr.missed || !dr.executed) continue;
    for (const auto& hr : out.hybrid.accounting.records) {
      if (hr.missed) continue;
      if (hr.campaign == dr.campaign && hr.ttp == dr.ttp &&
          hr.thing_id == dr.thing_id &&
          hr.injection_ts_ms == dr.injection_ts_ms) {
        out.improvements.push_back(ImprovementRow{
            dr.campaign, dr.ttp, dr.thing_id,
            static_cast<double>(dr.detection_time_ms),
            static_cast<double>(hr.detection_time_ms)});
        break;
      }
    }
  }

  std::vector<DetectionRecord> combined = out.durable.accounting.records;
  combined.insert(combined.end(), out.hybrid.accounting.records.begin(),
                  out.hybrid.accounting.records.end());
  write_detection_csv(
      (fs::path(out.compare_dir) / "detection_comparison.csv").string(),
      combined);
  write_improvement_csv(
      (fs::path(out.compare_dir) / "improvement.csv").string(),
      out.improvements);
  return out;
}

}  // namespace hst
