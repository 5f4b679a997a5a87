#include "hysectwin/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "hysectwin/error.hpp"

namespace hst {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::unauthorized_command: return "unauthorized_command";
    case EventKind::config_tamper: return "config_tamper";
    case EventKind::twin_spoof: return "twin_spoof";
    case EventKind::state_suppress: return "state_suppress";
    case EventKind::telemetry_burst: return "telemetry_burst";
    case EventKind::c2_toggle_train: return "c2_toggle_train";
    case EventKind::ramp: return "ramp";
  }
  return "?";
}

EventKind event_kind_from_name(const std::string& name) {
  if (name == "unauthorized_command") return EventKind::unauthorized_command;
  if (name == "config_tamper") return EventKind::config_tamper;
  if (name == "twin_spoof") return EventKind::twin_spoof;
  if (name == "state_suppress") return EventKind::state_suppress;
  if (name == "telemetry_burst") return EventKind::telemetry_burst;
  if (name == "c2_toggle_train") return EventKind::c2_toggle_train;
  if (name == "ramp") return EventKind::ramp;
  throw Error("unknown scenario event kind '" + name + "'");
}

namespace {

const std::set<std::string>& known_campaigns() {
  static const std::set<std::string> c = {"C0012", "C0020", "C0025", "C0028"};
  return c;
}

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

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.name = j.at("name").get<std::string>();
  s.seed = j.value("seed", 0);
  s.duration_ms = j.value("duration_ms", 30000);
  if (j.contains("environment")) s.environment = j["environment"];
  std::size_t index = 0;
  for (const auto& ej : j.value("events", nlohmann::json::array())) {
    ScenarioEvent e;
    try {
      e.at_ms = ej.at("at_ms").get<std::int64_t>();
      e.kind = event_kind_from_name(ej.at("kind").get<std::string>());
      e.thing_id = ej.at("thing_id").get<std::string>();
      e.params = ej.value("params", nlohmann::json::object());
      e.campaign = ej.at("campaign").get<std::string>();
      e.ttp = ej.at("ttp").get<std::string>();
    } catch (const std::exception& ex) {
      throw Error("scenario '" + s.name + "': event " + std::to_string(index) +
                  ": " + ex.what());
    }
    if (e.at_ms < 0) {
      throw Error("scenario '" + s.name + "': event " + std::to_string(index) +
                  ": at_ms must be >= 0");
    }
    if (!known_campaigns().count(e.campaign)) {
      throw Error("scenario '" + s.name + "': event " + std::to_string(index) +
                  ": unknown campaign '" + e.campaign + "'");
    }
    if (e.ttp.empty()) {
      throw Error("scenario '" + s.name + "': event " + std::to_string(index) +
                  ": empty ttp label");
    }
    s.events.push_back(std::move(e));
    ++index;
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const auto& a, const auto& b) { return a.at_ms < b.at_ms; });
  return s;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : s.events) {
    events.push_back(nlohmann::json{{"at_ms", e.at_ms},
                                    {"kind", event_kind_name(e.kind)},
                                    {"thing_id", e.thing_id},
                                    {"params", e.params},
                                    {"campaign", e.campaign},
                                    {"ttp", e.ttp}});
  }
  nlohmann::json j{{"name", s.name},
                   {"seed", s.seed},
                   {"duration_ms", s.duration_ms},
                   {"events", events}};
  if (s.environment) j["environment"] = *s.environment;
  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_scenario: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return scenario_from_json(j);
}

Injector::Injector(Scenario scenario, Bus& bus, Fleet& fleet)
    : scenario_(std::move(scenario)), bus_(bus), fleet_(fleet) {}

double Injector::noise(std::int64_t now_ms, const std::string& channel) const {
  std::uint64_t h = splitmix64(scenario_.seed ^
                               splitmix64(static_cast<std::uint64_t>(now_ms) ^
                                          fnv1a(channel)));
  double unit = static_cast<double>(h >> 11) / 9007199254740992.0;
  return unit * 2.0 - 1.0;  // [-1, 1)
}

void Injector::execute(const ScenarioEvent& e, std::int64_t now_ms) {
  GroundTruthEntry entry{e.campaign, e.ttp, e.thing_id, now_ms, true};
  if (!fleet_.has_thing(e.thing_id)) {
    entry.executed = false;  // recorded as not_executed
    truth_.push_back(std::move(entry));
    return;
  }
  const auto& p = e.params;
  switch (e.kind) {
    case EventKind::unauthorized_command: {
      fleet_.set_campaign_tag(e.thing_id, e.campaign, now_ms + 2000);
      fleet_.apply_command(e.thing_id, p.at("path").get<std::string>(),
                           Value::from_json(p.at("value")),
                           p.at("source").get<std::string>());
      break;
    }
    case EventKind::config_tamper: {
      fleet_.set_campaign_tag(e.thing_id, e.campaign, now_ms + 2000);
      fleet_.tamper_attribute(e.thing_id,
                              p.value("attribute", std::string("swversion")),
                              Value::from_json(p.at("value")));
      break;
    }
    case EventKind::twin_spoof: {
      Envelope forged;
      forged.topic = Topic::make(Channel::twin, e.thing_id, true);
      forged.thing_id = e.thing_id;
      forged.seq = ++injector_seq_;
      forged.ts_ms = now_ms;
      forged.payload.features[p.value("path", std::string("state.on"))] =
          Value::from_json(p.at("value"));
      forged.campaign = e.campaign;
      bus_.publish(std::move(forged));
      break;
    }
    case EventKind::state_suppress: {
      std::int64_t duration = p.value("duration_ms", 5000);
      fleet_.set_campaign_tag(e.thing_id, e.campaign, now_ms + duration);
      fleet_.suppress_report(e.thing_id,
                             p.value("path", std::string("state.on")),
                             Value::from_json(p.at("value")),
                             now_ms + duration);
      break;
    }
    case EventKind::telemetry_burst: {
      BurstState b;
      b.thing_id = e.thing_id;
      b.campaign = e.campaign;
      b.start_ms = now_ms;
      b.window_ms = p.value("window_ms", 1000);
      b.total = p.at("count").get<int>();
      bursts_.push_back(std::move(b));
      break;
    }
    case EventKind::c2_toggle_train: {
      ToggleState t;
      t.thing_id = e.thing_id;
      t.campaign = e.campaign;
      t.source = p.value("source", std::string("building-controller"));
      t.path = p.value("path", std::string("state.on"));
      t.period_ms = p.value("period_ms", 400);
      t.remaining = p.at("count").get<int>();
      t.next_ms = now_ms;
      const auto* light = fleet_.light_state(e.thing_id);
      t.next_on = light ? !light->on : true;
      toggles_.push_back(std::move(t));
      break;
    }
    case EventKind::ramp: {
      RampState r;
      r.thing_id = e.thing_id;
      r.campaign = e.campaign;
      r.start_ms = now_ms;
      r.duration_ms = p.at("duration_ms").get<std::int64_t>();
      r.noise_amp = p.value("noise_amp", 0.0);
      r.legs.push_back(RampLeg{p.at("feature").get<std::string>(),
                               p.at("from").get<double>(),
                               p.at("to").get<double>()});
      for (const auto& cj : p.value("co_features", nlohmann::json::array())) {
        r.legs.push_back(RampLeg{cj.at("feature").get<std::string>(),
                                 cj.at("from").get<double>(),
                                 cj.at("to").get<double>()});
      }
      // the ramped sources need to exist before the first tick writes them
      for (const auto& leg : r.legs) {
        fleet_.set_feature_source(e.thing_id, leg.feature, Value(leg.from));
      }
      fleet_.set_campaign_tag(e.thing_id, e.campaign,
                              now_ms + r.duration_ms + 5000);
      ramps_.push_back(std::move(r));
      break;
    }
  }
  truth_.push_back(std::move(entry));
}

void Injector::on_tick(std::int64_t now_ms) {
  while (next_event_ < scenario_.events.size() &&
         scenario_.events[next_event_].at_ms <= now_ms) {
    execute(scenario_.events[next_event_], now_ms);
    ++next_event_;
  }

  for (auto& b : bursts_) {
    if (b.published >= b.total) continue;
    double progress = b.window_ms <= 0
                          ? 1.0
                          : std::min(1.0, static_cast<double>(now_ms - b.start_ms) /
                                              static_cast<double>(b.window_ms));
    int target = std::min(b.total, static_cast<int>(progress * b.total + 0.5));
    while (b.published < target) {
      Envelope env;
      env.topic = Topic::make(Channel::live, b.thing_id, true);
      env.thing_id = b.thing_id;
      env.seq = ++injector_seq_;
      env.ts_ms = now_ms;
      auto obs = fleet_.observe(b.thing_id, now_ms);
      env.payload.attributes = obs.attributes;
      env.payload.features = obs.features;
      env.payload.features["burst_seq"] =
          Value(static_cast<std::int64_t>(b.published));
      env.campaign = b.campaign;
      bus_.publish(std::move(env));
      ++b.published;
    }
  }

  for (auto& t : toggles_) {
    while (t.remaining > 0 && t.next_ms <= now_ms) {
      fleet_.set_campaign_tag(t.thing_id, t.campaign, now_ms + 2000);
      fleet_.apply_command(t.thing_id, t.path, Value(t.next_on), t.source);
      t.next_on = !t.next_on;
      --t.remaining;
      t.next_ms += t.period_ms;
    }
  }

  for (auto& r : ramps_) {
    if (r.finished) continue;
    double progress = r.duration_ms <= 0
                          ? 1.0
                          : std::min(1.0, static_cast<double>(now_ms - r.start_ms) /
                                              static_cast<double>(r.duration_ms));
    for (const auto& leg : r.legs) {
      double v = leg.from + (leg.to - leg.from) * progress;
      if (r.noise_amp > 0.0) v += noise(now_ms, leg.feature) * r.noise_amp;
      fleet_.set_feature_source(r.thing_id, leg.feature, Value(v));
    }
    if (progress >= 1.0) r.finished = true;
  }
}

bool Injector::finished(std::int64_t now_ms) const {
  if (next_event_ < scenario_.events.size()) return false;
  for (const auto& b : bursts_) {
    if (b.published < b.total) return false;
  }
  for (const auto& t : toggles_) {
    if (t.remaining > 0) return false;
  }
  for (const auto& r : ramps_) {
    if (!r.finished) return false;
  }
  return now_ms >= scenario_.duration_ms;
}

}  // namespace hst
