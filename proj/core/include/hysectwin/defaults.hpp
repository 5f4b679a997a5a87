#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hysectwin/device_sim.hpp"
#include "hysectwin/fuzzy_engine.hpp"
#include "hysectwin/hybrid_pipeline.hpp"
#include "hysectwin/rete_engine.hpp"
#include "hysectwin/scenario.hpp"
#include "hysectwin/semantic_model.hpp"

namespace hst {

/// Shipped six-thing smart-lighting fleet plus the occupancy switch.
std::vector<DeviceSpec> default_fleet();

/// Shipped crisp rule pack covering unauthorized access, malicious
/// command execution, configuration tampering, logical-physical
/// mismatch, twin spoofing, telemetry bursts, traffic thresholds and
/// C2-like toggling.
std::vector<CrispRule> default_rule_pack();

/// Shipped fuzzy config: five behavioral signals with {low,med,high}
/// style terms, a nominal baseline rule, theta 0.5, bands (1/3, 2/3).
FuzzyConfig default_fuzzy_config();

/// Feature extraction aligned 1:1 with the fuzzy inputs.
FeatureSpec default_feature_spec();

CsfTagMap default_csf_map();

std::set<std::string> default_allowlist();

/// The shipped scenario pack: uc1_c0012, uc2_mixed, ramp_gradual_onset,
/// nominal_only.
std::vector<std::pair<std::string, Scenario>> builtin_scenarios();

/// Looks a scenario up by name; throws listing the known names.
Scenario builtin_scenario(const std::string& name);

}  // namespace hst
