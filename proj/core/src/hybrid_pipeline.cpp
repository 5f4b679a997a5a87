#include "hysectwin/hybrid_pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "hysectwin/error.hpp"

namespace hst {

const char* engine_mode_name(EngineMode m) {
  return m == EngineMode::deterministic_only ? "deterministic" : "hybrid";
}

EngineMode engine_mode_from_name(const std::string& name) {
  if (name == "deterministic" || name == "deterministic_only") {
    return EngineMode::deterministic_only;
  }
  if (name == "hybrid") return EngineMode::hybrid;
  throw Error("unknown engine mode '" + name + "'");
}

const char* alert_origin_name(AlertOrigin o) {
  switch (o) {
    case AlertOrigin::deterministic: return "deterministic";
    case AlertOrigin::fuzzy: return "fuzzy";
    case AlertOrigin::hybrid: return "hybrid";
  }
  return "?";
}

nlohmann::json Alert::to_json() const {
  nlohmann::json support_j = nlohmann::json::array();
  for (const auto& f : support) {
    support_j.push_back(nlohmann::json{{"fact_id", f.fact_id},
                                       {"thing", f.thing_id},
                                       {"predicate", f.predicate},
                                       {"value", f.value.to_json()},
                                       {"ts_ms", f.ts_ms}});
  }
  nlohmann::json terms_j = nlohmann::json::array();
  for (const auto& t : fuzzy_terms) {
    terms_j.push_back(nlohmann::json{
        {"variable", t.variable}, {"term", t.term}, {"degree", t.degree}});
  }
  return nlohmann::json{{"alert_id", alert_id},
                        {"thing_id", thing_id},
                        {"origin", alert_origin_name(origin)},
                        {"rule_id", rule_id},
                        {"mu", mu},
                        {"band", band_name(risk_band)},
                        {"ttp", ttp},
                        {"campaign", campaign},
                        {"csf_tag", csf_tag},
                        {"severity", severity},
                        {"message", message},
                        {"raised_at_ms", raised_at_ms},
                        {"trigger_ts_ms", trigger_ts_ms},
                        {"support", support_j},
                        {"fuzzy_terms", terms_j},
                        {"features", features}};
}

Alert Alert::from_json(const nlohmann::json& j) {
  Alert a;
  a.alert_id = j.value("alert_id", 0ULL);
  a.thing_id = j.value("thing_id", "");
  const std::string origin = j.value("origin", "deterministic");
  a.origin = origin == "fuzzy"    ? AlertOrigin::fuzzy
             : origin == "hybrid" ? AlertOrigin::hybrid
                                  : AlertOrigin::deterministic;
  a.rule_id = j.value("rule_id", "");
  a.mu = j.value("mu", 0.0);
  const std::string b = j.value("band", "low");
  a.risk_band = b == "high"  ? RiskBand::high
                : b == "med" ? RiskBand::med
                             : RiskBand::low;
  a.ttp = j.value("ttp", "");
  a.campaign = j.value("campaign", "");
  a.csf_tag = j.value("csf_tag", "");
  a.severity = j.value("severity", "medium");
  a.message = j.value("message", "");
  a.raised_at_ms = j.value("raised_at_ms", 0LL);
  a.trigger_ts_ms = j.value("trigger_ts_ms", 0LL);
  if (j.contains("support")) {
    for (const auto& fj : j["support"]) {
      SemanticFact f;
      f.fact_id = fj.value("fact_id", 0LL);
      f.thing_id = fj.value("thing", "");
      f.predicate = fj.value("predicate", "");
      f.value = Value::from_json(fj.at("value"));
      f.ts_ms = fj.value("ts_ms", 0LL);
      a.support.push_back(std::move(f));
    }
  }
  if (j.contains("fuzzy_terms")) {
    for (const auto& tj : j["fuzzy_terms"]) {
      a.fuzzy_terms.push_back(TermActivation{tj.value("variable", ""),
                                             tj.value("term", ""),
                                             tj.value("degree", 0.0)});
    }
  }
  if (j.contains("features")) {
    a.features = j["features"].get<std::vector<double>>();
  }
  return a;
}

CsfTagMap CsfTagMap::from_json(const nlohmann::json& j) {
  CsfTagMap m;
  m.deterministic = j.value("deterministic", "DE.DP-5");
  m.fuzzy = j.value("fuzzy", "RS.RP-1");
  if (j.contains("overrides")) {
    for (auto it = j["overrides"].begin(); it != j["overrides"].end(); ++it) {
      m.overrides[it.key()] = it.value().get<std::string>();
    }
  }
  return m;
}

nlohmann::json CsfTagMap::to_json() const {
  nlohmann::json o = nlohmann::json::object();
  for (const auto& [k, v] : overrides) o[k] = v;
  return nlohmann::json{
      {"deterministic", deterministic}, {"fuzzy", fuzzy}, {"overrides", o}};
}

void tag_csf(Alert& alert, const CsfTagMap& map) {
  if (!alert.rule_id.empty()) {
    auto it = map.overrides.find(alert.rule_id);
    if (it != map.overrides.end()) {
      alert.csf_tag = it->second;  // rule-level override wins
      return;
    }
  }
  if (!alert.csf_tag.empty()) return;  // tag carried by the rule action
  std::string tag;
  switch (alert.origin) {
    case AlertOrigin::deterministic:
      tag = map.deterministic;
      break;
    case AlertOrigin::fuzzy:
    case AlertOrigin::hybrid:
      tag = map.fuzzy;
      break;
  }
  alert.csf_tag = tag.empty() ? "UNMAPPED" : tag;
}

double improvement(double t_durable_ms, double t_hybrid_ms) {
  if (t_durable_ms <= 0.0) {
    throw Error("improvement: baseline detection time must be positive");
  }
  return (t_durable_ms - t_hybrid_ms) / t_durable_ms * 100.0;
}

DetectionAccounting detection_time(const GroundTruth& truth,
                                   const std::vector<Alert>& alerts,
                                   const std::string& engine_label) {
  DetectionAccounting acc;

  // group injections and candidate alerts by (ttp, thing)
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>>
      truth_by_key;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth_by_key[{truth[i].ttp, truth[i].thing_id}].push_back(i);
  }
  std::vector<bool> alert_used(alerts.size(), false);

  std::vector<std::size_t> order(truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return truth[a].injection_ts_ms < truth[b].injection_ts_ms;
  });

  std::map<std::size_t, std::size_t> record_index;  // truth idx -> record idx
  for (auto ti : order) {
    const auto& e = truth[ti];
    DetectionRecord rec;
    rec.engine = engine_label;
    rec.campaign = e.campaign;
    rec.ttp = e.ttp;
    rec.thing_id = e.thing_id;
    rec.injection_ts_ms = e.injection_ts_ms;
    rec.executed = e.executed;
    if (e.executed) {
      for (std::size_t a = 0; a < alerts.size(); ++a) {
        const auto& al = alerts[a];
        if (alert_used[a]) continue;
        if (al.ttp != e.ttp || al.thing_id != e.thing_id) continue;
        if (al.raised_at_ms < e.injection_ts_ms) continue;
        if (!al.campaign.empty() && al.campaign != e.campaign) continue;
        alert_used[a] = true;
        rec.missed = false;
        rec.first_alert_ms = al.raised_at_ms;
        rec.detection_time_ms = al.raised_at_ms - e.injection_ts_ms;
        rec.csf_tag = al.csf_tag;
        break;
      }
    }
    record_index[ti] = acc.records.size();
    acc.records.push_back(std::move(rec));
  }

  // leftover matching alerts are duplicates of the latest detection they
  // follow; alerts matching no injection are false positives
  for (std::size_t a = 0; a < alerts.size(); ++a) {
    if (alert_used[a]) continue;
    const auto& al = alerts[a];
    auto kit = truth_by_key.find({al.ttp, al.thing_id});
    bool attributed = false;
    if (kit != truth_by_key.end()) {
      for (auto it = kit->second.rbegin(); it != kit->second.rend(); ++it) {
        const auto& e = truth[*it];
        if (e.executed && al.raised_at_ms >= e.injection_ts_ms &&
            (al.campaign.empty() || al.campaign == e.campaign)) {
          acc.records[record_index[*it]].duplicates++;
          attributed = true;
          break;
        }
      }
    }
    if (!attributed) acc.false_positives.push_back(al);
  }
  return acc;
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.fuzzy.validate();
  cfg_.features.validate();
  if (cfg_.features.entries.size() != cfg_.fuzzy.inputs.size()) {
    throw Error("Pipeline: feature spec and fuzzy inputs must align 1:1");
  }
  twin_ = TwinRegistry(cfg_.freshness_horizon_ms);
  net_ = ReteNetwork::compile(cfg_.rules);
  auto origin = std::chrono::steady_clock::now();
  wall_ = [origin] {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - origin)
        .count();
  };
}

void Pipeline::advance_clock(std::int64_t now_ms) {
  now_ms_ = std::max(now_ms_, now_ms);
}

void Pipeline::feed_rete(const SemanticFact& fact, const FactDelta& delta,
                         std::vector<Firing>* firings,
                         std::vector<SemanticFact>* transients) {
  if (delta.outcome == AssertOutcome::ignored_stale || !delta.value_changed) {
    return;
  }
  const std::string key = fact.thing_id + "\x1f" + fact.predicate;
  auto it = fb_to_rete_.find(key);
  if (it != fb_to_rete_.end()) {
    net_.retract(it->second);
  }
  SemanticFact live = fact;
  live.fact_id = delta.fact_id;
  auto fired = net_.insert(live);
  firings->insert(firings->end(), fired.begin(), fired.end());
  fb_to_rete_[key] = delta.fact_id;

  if (delta.outcome == AssertOutcome::replaced &&
      net_.changed_predicates().count(fact.predicate)) {
    SemanticFact changed = fact;
    changed.predicate = fact.predicate + ".changed";
    transients->push_back(std::move(changed));
  }
}

void Pipeline::assert_derived(const std::string& thing,
                              const std::string& predicate, Value v,
                              std::vector<Firing>* firings,
                              std::vector<SemanticFact>* transients) {
  SemanticFact f;
  f.thing_id = thing;
  f.predicate = predicate;
  f.value = std::move(v);
  f.ts_ms = now_ms_;
  f.kind = FactKind::dynamic_property;
  auto delta = fb_.assert_fact(f);
  feed_rete(f, delta, firings, transients);
}

void Pipeline::refresh_mismatch_facts(const std::string& thing,
                                      std::vector<Firing>* firings,
                                      std::vector<SemanticFact>* transients) {
  auto age = twin_.disagreement_age(thing, "state.on", now_ms_);
  assert_derived(thing, "mismatch_age_ms",
                 Value(static_cast<std::int64_t>(age.value_or(0))), firings,
                 transients);
  auto mismatch =
      twin_.divergence(thing, "state.on", cfg_.grace_window_ms, now_ms_);
  assert_derived(thing, "mismatch.state.on", Value(mismatch.has_value()),
                 firings, transients);
}

bool Pipeline::dedup_pass(const std::string& thing, const std::string& ttp,
                          AlertOrigin origin) {
  const std::string key =
      thing + "\x1f" + ttp + "\x1f" + alert_origin_name(origin);
  auto it = dedup_last_.find(key);
  if (it != dedup_last_.end() &&
      now_ms_ - it->second < cfg_.dedup_window_ms) {
    ++suppressed_;
    return false;
  }
  dedup_last_[key] = now_ms_;
  return true;
}

Alert* Pipeline::emit(Alert alert, std::vector<Alert>* out) {
  if (!dedup_pass(alert.thing_id, alert.ttp, alert.origin)) return nullptr;
  alert.alert_id = next_alert_id_++;
  tag_csf(alert, cfg_.csf);
  out->push_back(alert);
  alerts_.push_back(std::move(alert));
  return &alerts_.back();
}

std::vector<Alert> Pipeline::process(const Envelope& env) {
  advance_clock(env.ts_ms);
  ++processed_;
  const double t_src = env.pub_wall_ms;
  std::vector<Alert> out;

  // (1) twin registry update; live deltas mirror to the twin view so the
  // passive copy tracks changes (a spoofed twin path persists until the
  // live value itself changes)
  TwinDelta delta = twin_.apply_update(env);
  const bool live = env.topic.channel == Channel::live;
  if (live && !delta.empty()) {
    Envelope mirror;
    mirror.topic = Topic::make(Channel::twin, env.thing_id, true);
    mirror.thing_id = env.thing_id;
    mirror.seq = env.seq;
    mirror.ts_ms = env.ts_ms;
    for (const auto& ch : delta.changed) {
      mirror.payload.features[ch.path] = ch.new_value;
    }
    twin_.apply_update(mirror);
  }

  // (2) rule-ingestion entry
  const double t_rules = wall_ ? wall_() : 0.0;
  std::vector<Firing> firings;
  std::vector<SemanticFact> transients;
  try {
    if (live) {
      auto lifted = lift(env.to_observation());
      for (auto& f : lifted) {
        if (f.predicate.rfind("command.", 0) == 0) {
          transients.push_back(f);  // event facts live for one cycle
          continue;
        }
        auto d = fb_.assert_fact(f);
        feed_rete(f, d, &firings, &transients);
      }
      // command provenance: mark allowlisted sources
      auto cit = env.payload.features.find("command.source");
      if (cit != env.payload.features.end()) {
        if (cit->second.is_string() &&
            cfg_.allowlist.count(cit->second.as_string())) {
          SemanticFact auth;
          auth.thing_id = env.thing_id;
          auth.predicate = "command.authorized";
          auth.value = Value(true);
          auth.ts_ms = now_ms_;
          transients.push_back(std::move(auth));
        }
        derived_[env.thing_id].command_times.push_back(now_ms_);
      }
      // sliding-window rate facts
      auto& der = derived_[env.thing_id];
      der.telemetry_times.push_back(now_ms_);
      auto evict = [&](std::deque<std::int64_t>& q) {
        while (!q.empty() && q.front() <= now_ms_ - cfg_.rate_window_ms) {
          q.pop_front();
        }
      };
      evict(der.telemetry_times);
      evict(der.command_times);
      const double win_s =
          static_cast<double>(cfg_.rate_window_ms) / 1000.0;
      assert_derived(env.thing_id, "telemetry_rate",
                     Value(static_cast<double>(der.telemetry_times.size()) /
                           win_s),
                     &firings, &transients);
      assert_derived(env.thing_id, "command_rate",
                     Value(static_cast<double>(der.command_times.size()) /
                           win_s),
                     &firings, &transients);
    }
    refresh_mismatch_facts(env.thing_id, &firings, &transients);

    // (3) transient cycle: insert, collect, auto-retract
    std::vector<std::int64_t> transient_ids;
    for (auto& t : transients) {
      t.fact_id = transient_id_--;
      t.ts_ms = now_ms_;
      auto fired = net_.insert(t);
      firings.insert(firings.end(), fired.begin(), fired.end());
      transient_ids.push_back(t.fact_id);
    }
    auto pending = net_.take_pending_firings();
    firings.insert(firings.end(), pending.begin(), pending.end());
    for (auto id : transient_ids) net_.retract(id);
    net_.take_pending_firings();  // discard releases caused by the cleanup
  } catch (const std::exception& e) {
    Alert diag;
    diag.thing_id = env.thing_id;
    diag.origin = AlertOrigin::deterministic;
    diag.severity = "error";
    diag.ttp = "DIAGNOSTIC";
    diag.message = e.what();
    diag.raised_at_ms = now_ms_;
    diag.trigger_ts_ms = env.ts_ms;
    SemanticFact marker;
    marker.thing_id = env.thing_id;
    marker.predicate = "pipeline.error";
    marker.value = Value(std::string(e.what()));
    marker.ts_ms = now_ms_;
    diag.support.push_back(std::move(marker));
    emit(std::move(diag), &out);
  }

  for (const auto& fir : firings) {
    const auto& rule = *std::find_if(
        cfg_.rules.begin(), cfg_.rules.end(),
        [&](const CrispRule& r) { return r.id == fir.rule_id; });
    Alert alert;
    alert.thing_id = fir.thing_id;
    alert.origin = AlertOrigin::deterministic;
    alert.rule_id = fir.rule_id;
    alert.ttp = rule.then.ttp;
    alert.csf_tag = rule.then.csf;
    alert.severity = rule.then.severity;
    alert.message = rule.then.message;
    alert.campaign = env.campaign.value_or("");
    alert.raised_at_ms = now_ms_;
    alert.trigger_ts_ms = env.ts_ms;
    alert.support = fir.support;
    emit(std::move(alert), &out);
  }

  // (4) fuzzy scoring over the thing's feature vector (hybrid mode)
  if (cfg_.mode == EngineMode::hybrid && live) {
    try {
      auto fv = feature_vector(fb_, cfg_.features, env.thing_id);
      InferenceTrace trace;
      double mu = infer(cfg_.fuzzy, fv.values, &trace);
      bool positive = classify(mu, cfg_.fuzzy.theta) == 1;
      bool& latch = fuzzy_latch_[env.thing_id];
      if (positive && !latch) {
        latch = true;
        Alert alert;
        alert.thing_id = env.thing_id;
        alert.origin = AlertOrigin::fuzzy;
        alert.mu = mu;
        alert.risk_band = band(mu, cfg_.fuzzy.band_lo, cfg_.fuzzy.band_hi);
        alert.severity = alert.risk_band == RiskBand::high ? "high" : "medium";
        alert.campaign = env.campaign.value_or("");
        alert.raised_at_ms = now_ms_;
        alert.trigger_ts_ms = env.ts_ms;
        alert.features = fv.values;
        // attribute the TTP of the strongest non-benign activation
        double best = -1.0;
        for (const auto& act : trace.activations) {
          const auto& rule = cfg_.fuzzy.rules[act.rule_index];
          if (rule.consequent.second == "low") continue;
          if (act.strength > best) {
            best = act.strength;
            const auto& var = rule.antecedents.front().first;
            auto hit = cfg_.fuzzy.ttp_hints.find(var);
            alert.ttp = hit != cfg_.fuzzy.ttp_hints.end() ? hit->second
                                                          : "UNMAPPED";
          }
          for (const auto& [var, term] : rule.antecedents) {
            auto idx = *cfg_.fuzzy.input_index(var);
            alert.fuzzy_terms.push_back(TermActivation{
                var, term,
                cfg_.fuzzy.inputs[idx].terms.at(term).eval(fv.values[idx])});
          }
        }
        alert.message = "compromise score crossed theta";
        emit(std::move(alert), &out);
      } else if (!positive) {
        latch = false;
      }
    } catch (const std::exception& e) {
      Alert diag;
      diag.thing_id = env.thing_id;
      diag.origin = AlertOrigin::fuzzy;
      diag.severity = "error";
      diag.ttp = "DIAGNOSTIC";
      diag.message = e.what();
      diag.raised_at_ms = now_ms_;
      diag.trigger_ts_ms = env.ts_ms;
      diag.fuzzy_terms.push_back(TermActivation{"error", e.what(), 0.0});
      emit(std::move(diag), &out);
    }
  }

  // (5) persistence: the message record lands in the live store and, for
  // live telemetry, in the mirrored twin store; one stamp per copy
  if (stamps_ || persist_) {
    auto persist_copy = [&](Channel ch) {
      Topic copy_topic = Topic::make(ch, env.thing_id, env.topic.state_suffix);
      nlohmann::json record{{"kind", "telemetry"},
                            {"topic", copy_topic.str()},
                            {"thing", env.thing_id},
                            {"seq", env.seq},
                            {"ts_ms", env.ts_ms}};
      bool ok = true;
      if (persist_) ok = persist_(ch, record);
      double t_db = wall_ ? wall_() : t_rules;
      if (ok && stamps_) {
        stamps_(copy_topic.str(), ch, t_src, t_rules, t_db);
      }
    };
    persist_copy(env.topic.channel);
    if (live) persist_copy(Channel::twin);
  }
  return out;
}

}  // namespace hst
