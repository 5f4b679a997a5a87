#include "hysectwin/defaults.hpp"

#include "hysectwin/error.hpp"

namespace hst {

namespace {

const char* kFleetJson = R"JSON([
  {
    "thing_id": "00-15-8d-00-05-48-e4-7c-01-0006",
    "class": "temperature_sensor",
    "publish_period_ms": 1000,
    "attributes": {
      "manufacturername": "LUMI",
      "modelid": "lumi.weather",
      "swversion": "3000-0001",
      "type": "ZHATemperature",
      "uniqueid": "00:15:8d:00:05:48:e4:7c-01-0402"
    }
  },
  {
    "thing_id": "00-21-2e-ff-ff-0e-19-2c-01",
    "class": "humidity_sensor",
    "publish_period_ms": 1000,
    "attributes": {
      "manufacturername": "LUMI",
      "modelid": "lumi.weather",
      "swversion": "3000-0001",
      "type": "ZHAHumidity",
      "uniqueid": "00:21:2e:ff:ff:0e:19:2c-01-0405"
    }
  },
  {
    "thing_id": "04-cd-15-ff-fe-c8-aa-6e-01",
    "class": "color_temp_light",
    "publish_period_ms": 100,
    "ctmin": 250,
    "ctmax": 454,
    "attributes": {
      "project": "Lightswitch",
      "manufacturername": "IKEA of Sweden",
      "modelid": "TRADFRIbulbE27WSglobeopal1055lm",
      "swversion": "1.0.012",
      "type": "Color temperature light",
      "uniqueid": "04:cd:15:ff:fe:c8:aa:6e-01"
    },
    "state": { "on": true, "bri": 36, "ct": 250, "alert": "none", "reachable": true },
    "features": { "name": "Color temperature light 2", "colorcapabilities": 16, "hascolor": true }
  },
  {
    "thing_id": "04-cd-15-ff-fe-c8-c0-12-01",
    "class": "color_temp_light",
    "publish_period_ms": 100,
    "ctmin": 250,
    "ctmax": 454,
    "attributes": {
      "project": "Lightswitch",
      "manufacturername": "IKEA of Sweden",
      "modelid": "TRADFRIbulbE27WSglobeopal1055lm",
      "swversion": "1.0.012",
      "type": "Color temperature light",
      "uniqueid": "04:cd:15:ff:fe:c8:c0:12-01"
    },
    "state": { "on": true, "bri": 36, "ct": 250, "alert": "none", "reachable": true },
    "features": { "name": "Color temperature light 3", "colorcapabilities": 16, "hascolor": true }
  },
  {
    "thing_id": "b4-e3-f9-ff-fe-a0-c1-b7-01",
    "class": "dimmable_light",
    "publish_period_ms": 100,
    "attributes": {
      "project": "Lightswitch",
      "manufacturername": "IKEA of Sweden",
      "modelid": "TRADFRIbulbE27WSopal1000lm",
      "swversion": "2.3.087",
      "type": "Dimmable light",
      "uniqueid": "b4:e3:f9:ff:fe:a0:c1:b7-01"
    },
    "state": { "on": true, "bri": 180, "alert": "none", "reachable": true },
    "features": { "name": "Dimmable light 1" }
  },
  {
    "thing_id": "b4-e3-f9-ff-fe-a6-65-90-01",
    "class": "illuminance_sensor",
    "publish_period_ms": 75,
    "attributes": {
      "manufacturername": "Philips",
      "modelid": "SML001",
      "swversion": "6.1.1.27575",
      "type": "ZHALightLevel",
      "uniqueid": "b4:e3:f9:ff:fe:a6:65:90-01-0400"
    }
  },
  {
    "thing_id": "occupancy-hub-01",
    "class": "switch",
    "publish_period_ms": 250,
    "attributes": {
      "manufacturername": "Philips",
      "modelid": "SML001",
      "swversion": "6.1.1.27575",
      "type": "ZHAPresence",
      "uniqueid": "00:17:88:01:03:28:6d:06-02-0406"
    }
  }
])JSON";

const char* kRulesJson = R"JSON([
  {
    "id": "r1_unauthorized_access",
    "salience": 100,
    "when": [
      { "thing": "t", "predicate": "command.source", "op": "ne", "value": "" },
      { "thing": "t", "predicate": "command.authorized", "op": "absent" }
    ],
    "then": {
      "ttp": "T1021.002",
      "severity": "high",
      "message": "command from non-allowlisted source"
    }
  },
  {
    "id": "r2_malicious_command",
    "salience": 90,
    "when": [
      { "thing": "t", "predicate": "command.writes_state", "op": "eq", "value": true },
      { "thing": "t", "predicate": "command.authorized", "op": "absent" },
      { "thing": "t", "predicate": "provisioning", "op": "absent" }
    ],
    "then": {
      "ttp": "T1059",
      "severity": "high",
      "message": "state write from unknown source outside provisioning"
    }
  },
  {
    "id": "r3_swversion_tamper",
    "salience": 80,
    "when": [
      { "thing": "t", "predicate": "swversion", "op": "changed" },
      { "thing": "t", "predicate": "provisioning", "op": "absent" }
    ],
    "then": {
      "ttp": "T1112",
      "severity": "high",
      "message": "firmware version changed outside provisioning"
    }
  },
  {
    "id": "r3_modelid_tamper",
    "salience": 80,
    "when": [
      { "thing": "t", "predicate": "modelid", "op": "changed" },
      { "thing": "t", "predicate": "provisioning", "op": "absent" }
    ],
    "then": {
      "ttp": "T1112",
      "severity": "high",
      "message": "model identity changed outside provisioning"
    }
  },
  {
    "id": "r4_logical_physical_mismatch",
    "salience": 70,
    "when": [
      { "thing": "t", "predicate": "state.on", "op": "eq", "value": false },
      { "thing": "*", "predicate": "lux", "op": "lt", "value": 100 },
      { "thing": "*", "predicate": "occupancy_high", "op": "eq", "value": true }
    ],
    "then": {
      "ttp": "T0850",
      "severity": "high",
      "message": "light reported off with low lux under high occupancy"
    }
  },
  {
    "id": "r5_twin_spoof",
    "salience": 70,
    "when": [
      { "thing": "t", "predicate": "mismatch.state.on", "op": "eq", "value": true }
    ],
    "then": {
      "ttp": "T0850",
      "severity": "high",
      "message": "live and twin state.on disagree beyond the sync grace window"
    }
  },
  {
    "id": "r6_telemetry_burst",
    "salience": 60,
    "when": [
      { "thing": "t", "predicate": "telemetry_rate", "op": "gt", "value": 20.0 }
    ],
    "then": {
      "ttp": "T1041",
      "severity": "medium",
      "message": "telemetry burst exceeds nominal publish rate"
    }
  },
  {
    "id": "r7_traffic_threshold",
    "salience": 60,
    "when": [
      { "thing": "t", "predicate": "network_traffic_rate", "op": "gt", "value": 800.0 }
    ],
    "then": {
      "ttp": "T0801",
      "severity": "medium",
      "message": "network traffic rate above threshold"
    }
  },
  {
    "id": "r8_c2_toggles",
    "salience": 60,
    "when": [
      { "thing": "t", "predicate": "command_rate", "op": "gt", "value": 2.0 }
    ],
    "then": {
      "ttp": "T1071",
      "severity": "medium",
      "message": "periodic command toggling at C2-like rate"
    }
  }
])JSON";

const char* kFuzzyJson = R"JSON({
  "inputs": [
    {
      "name": "telemetry_rate",
      "universe": [0, 1],
      "terms": {
        "low": { "shape": "ramp_down", "a": 0.10, "b": 0.45 },
        "med": { "shape": "triangular", "a": 0.25, "b": 0.50, "c": 0.75 },
        "high": { "shape": "ramp_up", "a": 0.55, "b": 0.85 }
      }
    },
    {
      "name": "command_rate",
      "universe": [0, 1],
      "terms": {
        "low": { "shape": "ramp_down", "a": 0.05, "b": 0.30 },
        "med": { "shape": "triangular", "a": 0.15, "b": 0.35, "c": 0.55 },
        "high": { "shape": "ramp_up", "a": 0.25, "b": 0.50 }
      }
    },
    {
      "name": "mismatch_age_ms",
      "universe": [0, 1],
      "terms": {
        "short": { "shape": "ramp_down", "a": 0.06, "b": 0.18 },
        "long": { "shape": "ramp_up", "a": 0.10, "b": 0.28 }
      }
    },
    {
      "name": "network_traffic_rate",
      "universe": [0, 1],
      "terms": {
        "low": { "shape": "ramp_down", "a": 0.15, "b": 0.60 },
        "med": { "shape": "triangular", "a": 0.35, "b": 0.55, "c": 0.75 },
        "high": { "shape": "ramp_up", "a": 0.60, "b": 0.85 }
      }
    },
    {
      "name": "firmware_integrity",
      "universe": [0, 1],
      "terms": {
        "degraded": { "shape": "ramp_down", "a": 0.40, "b": 0.75 },
        "healthy": { "shape": "ramp_up", "a": 0.55, "b": 0.90 }
      }
    }
  ],
  "output": {
    "name": "compromise",
    "universe": [0, 1],
    "terms": {
      "low": { "shape": "triangular", "a": 0.0, "b": 0.0, "c": 0.4 },
      "med": { "shape": "triangular", "a": 0.3, "b": 0.5, "c": 0.7 },
      "high": { "shape": "triangular", "a": 0.6, "b": 1.0, "c": 1.0 }
    }
  },
  "rules": [
    {
      "if": [["telemetry_rate", "low"], ["command_rate", "low"],
             ["mismatch_age_ms", "short"], ["network_traffic_rate", "low"],
             ["firmware_integrity", "healthy"]],
      "op": "and", "then": ["compromise", "low"], "weight": 1.0
    },
    { "if": [["network_traffic_rate", "high"]],
      "op": "and", "then": ["compromise", "high"], "weight": 1.0 },
    { "if": [["network_traffic_rate", "med"], ["firmware_integrity", "degraded"]],
      "op": "and", "then": ["compromise", "high"], "weight": 1.0 },
    { "if": [["mismatch_age_ms", "long"]],
      "op": "and", "then": ["compromise", "high"], "weight": 1.0 },
    { "if": [["telemetry_rate", "high"]],
      "op": "and", "then": ["compromise", "high"], "weight": 1.0 },
    { "if": [["command_rate", "high"]],
      "op": "and", "then": ["compromise", "med"], "weight": 1.0 },
    { "if": [["firmware_integrity", "degraded"]],
      "op": "and", "then": ["compromise", "med"], "weight": 0.8 }
  ],
  "tnorm": "min",
  "theta": 0.5,
  "bands": [0.3333333333333333, 0.6666666666666666],
  "defuzzifier": { "method": "centroid", "samples": 1001 },
  "ttp_hints": {
    "telemetry_rate": "T1041",
    "command_rate": "T1071",
    "mismatch_age_ms": "T0850",
    "network_traffic_rate": "T0801",
    "firmware_integrity": "T1112"
  }
})JSON";

const char* kUc1Json = R"JSON({
  "name": "uc1_c0012",
  "seed": 7,
  "duration_ms": 20000,
  "environment": {
    "ambient_lux": 400.0,
    "lux_drift": { "slope_per_s": 0.0, "noise_amp": 0.5 }
  },
  "events": [
    {
      "at_ms": 5000, "kind": "unauthorized_command",
      "thing_id": "04-cd-15-ff-fe-c8-aa-6e-01",
      "params": { "path": "name", "value": "conference-room-west", "source": "203.0.113.77" },
      "campaign": "C0012", "ttp": "T1021.002"
    },
    {
      "at_ms": 10000, "kind": "unauthorized_command",
      "thing_id": "04-cd-15-ff-fe-c8-aa-6e-01",
      "params": { "path": "state.on", "value": false, "source": "198.51.100.23" },
      "campaign": "C0012", "ttp": "T1059"
    },
    {
      "at_ms": 15000, "kind": "config_tamper",
      "thing_id": "04-cd-15-ff-fe-c8-aa-6e-01",
      "params": { "attribute": "swversion", "value": "2.3.089" },
      "campaign": "C0012", "ttp": "T1112"
    }
  ]
})JSON";

const char* kUc2Json = R"JSON({
  "name": "uc2_mixed",
  "seed": 11,
  "duration_ms": 21000,
  "environment": {
    "ambient_lux": 800.0,
    "lux_drift": { "slope_per_s": -50.0, "noise_amp": 0.5 },
    "occupancy_schedule": [ { "at_ms": 13000, "high": true } ]
  },
  "events": [
    {
      "at_ms": 4000, "kind": "twin_spoof",
      "thing_id": "04-cd-15-ff-fe-c8-c0-12-01",
      "params": { "path": "state.on", "value": true },
      "campaign": "C0025", "ttp": "T0850"
    },
    {
      "at_ms": 8000, "kind": "telemetry_burst",
      "thing_id": "b4-e3-f9-ff-fe-a6-65-90-01",
      "params": { "count": 150, "window_ms": 1000 },
      "campaign": "C0020", "ttp": "T1041"
    },
    {
      "at_ms": 12000, "kind": "c2_toggle_train",
      "thing_id": "b4-e3-f9-ff-fe-a0-c1-b7-01",
      "params": { "count": 8, "period_ms": 400, "source": "building-controller" },
      "campaign": "C0028", "ttp": "T1071"
    },
    {
      "at_ms": 16000, "kind": "state_suppress",
      "thing_id": "04-cd-15-ff-fe-c8-aa-6e-01",
      "params": { "path": "state.on", "value": false, "duration_ms": 4500 },
      "campaign": "C0025", "ttp": "T0850"
    }
  ]
})JSON";

const char* kRampJson = R"JSON({
  "name": "ramp_gradual_onset",
  "seed": 1,
  "duration_ms": 60000,
  "environment": {
    "ambient_lux": 400.0,
    "lux_drift": { "slope_per_s": 0.0, "noise_amp": 0.5 }
  },
  "events": [
    {
      "at_ms": 2000, "kind": "ramp",
      "thing_id": "b4-e3-f9-ff-fe-a6-65-90-01",
      "params": {
        "feature": "network_traffic_rate", "from": 0.0, "to": 1000.0,
        "duration_ms": 40000, "noise_amp": 8.0,
        "co_features": [ { "feature": "firmware_integrity", "from": 1.0, "to": 0.5 } ]
      },
      "campaign": "C0012", "ttp": "T0801"
    },
    {
      "at_ms": 45000, "kind": "twin_spoof",
      "thing_id": "b4-e3-f9-ff-fe-a0-c1-b7-01",
      "params": { "path": "state.on", "value": false },
      "campaign": "C0025", "ttp": "T0850"
    }
  ]
})JSON";

const char* kNominalJson = R"JSON({
  "name": "nominal_only",
  "seed": 3,
  "duration_ms": 600000,
  "environment": {
    "ambient_lux": 400.0,
    "lux_drift": { "slope_per_s": 0.0, "noise_amp": 0.5 },
    "temperature_drift": { "slope_per_s": 0.0001, "noise_amp": 0.1 },
    "humidity_drift": { "slope_per_s": 0.0, "noise_amp": 0.2 }
  },
  "events": []
})JSON";

}  // namespace

std::vector<DeviceSpec> default_fleet() {
  return fleet_from_json(nlohmann::json::parse(kFleetJson));
}

std::vector<CrispRule> default_rule_pack() {
  return rules_from_json(nlohmann::json::parse(kRulesJson));
}

FuzzyConfig default_fuzzy_config() {
  return fuzzy_config_from_json(nlohmann::json::parse(kFuzzyJson));
}

FeatureSpec default_feature_spec() {
  FeatureSpec spec;
  spec.entries = {
      FeatureEntry{"telemetry_rate", 0.0, 50.0, 0.0},
      FeatureEntry{"command_rate", 0.0, 10.0, 0.0},
      FeatureEntry{"mismatch_age_ms", 0.0, 5000.0, 0.0},
      FeatureEntry{"network_traffic_rate", 0.0, 1000.0, 0.0},
      FeatureEntry{"firmware_integrity", 0.0, 1.0, 1.0},
  };
  return spec;
}

CsfTagMap default_csf_map() { return CsfTagMap{}; }

std::set<std::string> default_allowlist() {
  return {"operator-1", "building-controller"};
}

std::vector<std::pair<std::string, Scenario>> builtin_scenarios() {
  std::vector<std::pair<std::string, Scenario>> out;
  for (const char* json : {kUc1Json, kUc2Json, kRampJson, kNominalJson}) {
    auto s = scenario_from_json(nlohmann::json::parse(json));
    out.emplace_back(s.name, std::move(s));
  }
  return out;
}

Scenario builtin_scenario(const std::string& name) {
  auto pack = builtin_scenarios();
  std::string known;
  for (auto& [n, s] : pack) {
    if (n == name) return std::move(s);
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw Error("unknown scenario '" + name + "' (builtin: " + known + ")");
}

}  // namespace hst
