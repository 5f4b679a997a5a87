#include "hysectwin/rete_engine.hpp"

#include <algorithm>
#include <fstream>

#include "hysectwin/error.hpp"

namespace hst {

const char* cond_op_name(CondOp op) {
  switch (op) {
    case CondOp::eq: return "eq";
    case CondOp::ne: return "ne";
    case CondOp::lt: return "lt";
    case CondOp::le: return "le";
    case CondOp::gt: return "gt";
    case CondOp::ge: return "ge";
    case CondOp::changed: return "changed";
    case CondOp::absent: return "absent";
  }
  return "?";
}

CondOp cond_op_from_name(const std::string& name) {
  if (name == "eq") return CondOp::eq;
  if (name == "ne") return CondOp::ne;
  if (name == "lt") return CondOp::lt;
  if (name == "le") return CondOp::le;
  if (name == "gt") return CondOp::gt;
  if (name == "ge") return CondOp::ge;
  if (name == "changed") return CondOp::changed;
  if (name == "absent") return CondOp::absent;
  throw Error("unknown condition op '" + name + "'");
}

namespace {

bool op_matches(CondOp op, const Value& fact_v, const Value& cond_v) {
  switch (op) {
    case CondOp::eq:
      return fact_v == cond_v;
    case CondOp::ne:
      return !(fact_v == cond_v);
    case CondOp::lt:
    case CondOp::le:
    case CondOp::gt:
    case CondOp::ge: {
      if (!fact_v.is_number() || !cond_v.is_number()) return false;
      double a = fact_v.as_double(), b = cond_v.as_double();
      if (op == CondOp::lt) return a < b;
      if (op == CondOp::le) return a <= b;
      if (op == CondOp::gt) return a > b;
      return a >= b;
    }
    case CondOp::changed:
    case CondOp::absent:
      return true;  // presence-only; handled structurally
  }
  return false;
}

bool is_ordering(CondOp op) {
  return op == CondOp::lt || op == CondOp::le || op == CondOp::gt ||
         op == CondOp::ge;
}

void validate_rules(const std::vector<CrispRule>& rules) {
  std::set<std::string> ids;
  for (const auto& r : rules) {
    if (r.id.empty()) throw Error("rule with empty id");
    if (!ids.insert(r.id).second) throw Error("duplicate rule id '" + r.id + "'");
    if (r.when.empty()) throw Error("rule '" + r.id + "' has no conditions");
    std::set<std::string> pos_vars;
    bool any_positive = false;
    for (std::size_t i = 0; i < r.when.size(); ++i) {
      const auto& c = r.when[i];
      if (c.predicate.empty()) {
        throw Error("rule '" + r.id + "' condition " + std::to_string(i) +
                    ": empty predicate");
      }
      if (is_ordering(c.op) && !c.value.is_number()) {
        throw Error("rule '" + r.id + "' condition " + std::to_string(i) +
                    ": ordering op requires a numeric value");
      }
      if (c.op != CondOp::absent) {
        any_positive = true;
        if (c.thing != "*") pos_vars.insert(c.thing);
      }
    }
    if (!any_positive) {
      throw Error("rule '" + r.id + "' has no positive condition");
    }
    for (std::size_t i = 0; i < r.when.size(); ++i) {
      const auto& c = r.when[i];
      if (c.op == CondOp::absent && c.thing != "*" && !pos_vars.count(c.thing)) {
        throw Error("rule '" + r.id + "' condition " + std::to_string(i) +
                    ": negated variable '" + c.thing +
                    "' is not bound by a positive condition");
      }
    }
  }
}

std::string changed_predicate(const std::string& p) { return p + ".changed"; }

}  // namespace

bool ReteNetwork::alpha_matches(const AlphaTest& test,
                                const SemanticFact& f) const {
  if (f.predicate != test.predicate) return false;
  if (test.presence) return true;
  return op_matches(test.op, f.value, test.value);
}

std::size_t ReteNetwork::intern_alpha(const AlphaTest& test) {
  for (std::size_t i = 0; i < alphas_.size(); ++i) {
    if (alphas_[i].test == test) return i;
  }
  alphas_.push_back(AlphaMemory{test, {}});
  return alphas_.size() - 1;
}

ReteNetwork ReteNetwork::compile(std::vector<CrispRule> rules) {
  validate_rules(rules);
  ReteNetwork net;
  net.rules_ = std::move(rules);
  net.plans_.resize(net.rules_.size());
  net.beta_.resize(net.rules_.size());
  net.productions_.resize(net.rules_.size());
  for (std::size_t r = 0; r < net.rules_.size(); ++r) {
    auto& plan = net.plans_[r];
    for (const auto& c : net.rules_[r].when) {
      if (c.op == CondOp::absent) {
        plan.negatives.push_back(NegativeSlot{c.predicate, c.thing});
        net.rules_by_neg_predicate_[c.predicate].insert(r);
        continue;
      }
      AlphaTest test;
      if (c.op == CondOp::changed) {
        test.predicate = changed_predicate(c.predicate);
        test.presence = true;
        net.changed_predicates_.insert(c.predicate);
      } else {
        test.predicate = c.predicate;
        test.op = c.op;
        test.value = c.value;
      }
      plan.positives.push_back(PositiveSlot{net.intern_alpha(test), c.thing});
    }
    // partial memories for levels 0..k-2; complete tokens live on the
    // production node
    if (plan.positives.size() > 1) {
      net.beta_[r].resize(plan.positives.size() - 1);
    }
  }
  return net;
}

bool ReteNetwork::try_extend(const Token& t, const SemanticFact& f,
                             const std::string& var, Token& out) const {
  if (var != "*") {
    auto it = t.bindings.find(var);
    if (it != t.bindings.end() && it->second != f.thing_id) return false;
  }
  out = t;
  out.supports.push_back(f.fact_id);
  if (var != "*") out.bindings[var] = f.thing_id;
  return true;
}

bool ReteNetwork::negatives_hold(std::size_t rule_idx, const Token& t) const {
  for (const auto& neg : plans_[rule_idx].negatives) {
    auto pit = presence_.find(neg.predicate);
    if (pit == presence_.end() || pit->second.empty()) continue;
    if (neg.var == "*") return false;  // some fact with this predicate exists
    auto bit = t.bindings.find(neg.var);
    // bound by construction (validated at compile)
    if (bit != t.bindings.end() && pit->second.count(bit->second)) return false;
  }
  return true;
}

Firing ReteNetwork::make_firing(std::size_t rule_idx, const Token& t) const {
  Firing fir;
  fir.rule_id = rules_[rule_idx].id;
  fir.salience = rules_[rule_idx].salience;
  fir.bindings = t.bindings;
  for (auto id : t.supports) fir.support.push_back(wm_.at(id));
  for (const auto& slot : plans_[rule_idx].positives) {
    if (slot.var != "*") {
      fir.thing_id = t.bindings.at(slot.var);
      break;
    }
  }
  if (fir.thing_id.empty() && !fir.support.empty()) {
    fir.thing_id = fir.support.front().thing_id;
  }
  return fir;
}

void ReteNetwork::refresh_activations(const std::set<std::size_t>& rule_idxs,
                                      std::vector<Firing>* out) {
  std::vector<Firing> collected;
  for (auto r : rule_idxs) {
    auto& prod = productions_[r];
    for (const auto& t : prod.tokens) {
      bool active = negatives_hold(r, t);
      bool fired = prod.fired.count(t.supports) > 0;
      if (active && !fired) {
        prod.fired.insert(t.supports);
        collected.push_back(make_firing(r, t));
      } else if (!active && fired) {
        prod.fired.erase(t.supports);  // blocked: refractory state cleared
      }
    }
  }
  std::stable_sort(collected.begin(), collected.end(),
                   [](const Firing& a, const Firing& b) {
                     return a.salience > b.salience;
                   });
  if (out) {
    for (auto& f : collected) out->push_back(std::move(f));
  }
}

std::vector<Firing> ReteNetwork::insert(const SemanticFact& fact) {
  if (wm_.count(fact.fact_id)) {
    throw Error("ReteNetwork: duplicate fact id " +
                std::to_string(fact.fact_id));
  }
  wm_[fact.fact_id] = fact;
  presence_[fact.predicate][fact.thing_id]++;

  std::set<std::size_t> hit_alphas;
  for (std::size_t a = 0; a < alphas_.size(); ++a) {
    if (alpha_matches(alphas_[a].test, fact)) {
      alphas_[a].facts.push_back(fact.fact_id);
      hit_alphas.insert(a);
    }
  }

  std::set<std::size_t> affected;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const auto& plan = plans_[r];
    bool structural = false;
    for (const auto& slot : plan.positives) {
      if (hit_alphas.count(slot.alpha)) {
        structural = true;
        break;
      }
    }
    if (!structural) continue;
    affected.insert(r);

    const std::size_t k = plan.positives.size();
    // delta join: new tokens at level i come from (delta at i-1) x (full
    // alpha i)  plus  (old beta at i-1) x (the new fact)
    std::vector<Token> delta;
    if (hit_alphas.count(plan.positives[0].alpha)) {
      Token seed;
      seed.supports.push_back(fact.fact_id);
      if (plan.positives[0].var != "*") {
        seed.bindings[plan.positives[0].var] = fact.thing_id;
      }
      delta.push_back(std::move(seed));
    }
    std::vector<std::vector<Token>> level_deltas(k);
    level_deltas[0] = delta;
    for (std::size_t i = 1; i < k; ++i) {
      const auto& slot = plan.positives[i];
      std::vector<Token> next;
      for (const auto& t : level_deltas[i - 1]) {
        for (auto fid : alphas_[slot.alpha].facts) {
          Token ext;
          if (try_extend(t, wm_.at(fid), slot.var, ext)) {
            next.push_back(std::move(ext));
          }
        }
      }
      if (hit_alphas.count(slot.alpha)) {
        for (const auto& t : beta_[r][i - 1]) {
          Token ext;
          if (try_extend(t, fact, slot.var, ext)) {
            next.push_back(std::move(ext));
          }
        }
      }
      level_deltas[i] = std::move(next);
    }
    for (std::size_t i = 0; i + 1 < k; ++i) {
      auto& mem = beta_[r][i];
      mem.insert(mem.end(), level_deltas[i].begin(), level_deltas[i].end());
    }
    auto& complete = level_deltas[k - 1];
    auto& prod = productions_[r];
    prod.tokens.insert(prod.tokens.end(), complete.begin(), complete.end());
  }

  // negation re-evaluation: this fact may block absent conditions
  auto nit = rules_by_neg_predicate_.find(fact.predicate);
  if (nit != rules_by_neg_predicate_.end()) {
    affected.insert(nit->second.begin(), nit->second.end());
  }

  std::vector<Firing> firings;
  refresh_activations(affected, &firings);
  return firings;
}

std::vector<RetractedFiring> ReteNetwork::retract(std::int64_t fact_id) {
  auto wit = wm_.find(fact_id);
  if (wit == wm_.end()) {
    ++unknown_retracts_;
    return {};
  }
  SemanticFact fact = wit->second;
  wm_.erase(wit);
  auto& per_thing = presence_[fact.predicate];
  if (--per_thing[fact.thing_id] <= 0) per_thing.erase(fact.thing_id);
  if (per_thing.empty()) presence_.erase(fact.predicate);

  for (auto& alpha : alphas_) {
    auto& v = alpha.facts;
    v.erase(std::remove(v.begin(), v.end(), fact_id), v.end());
  }

  auto contains = [fact_id](const Token& t) {
    return std::find(t.supports.begin(), t.supports.end(), fact_id) !=
           t.supports.end();
  };

  std::vector<RetractedFiring> retracted;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    for (auto& level : beta_[r]) {
      level.erase(std::remove_if(level.begin(), level.end(), contains),
                  level.end());
    }
    auto& prod = productions_[r];
    for (auto it = prod.tokens.begin(); it != prod.tokens.end();) {
      if (contains(*it)) {
        if (prod.fired.count(it->supports)) {
          prod.fired.erase(it->supports);
          retracted.push_back(RetractedFiring{rules_[r].id, it->supports});
        }
        it = prod.tokens.erase(it);
      } else {
        ++it;
      }
    }
  }

  // the removal may release absent conditions
  auto nit = rules_by_neg_predicate_.find(fact.predicate);
  if (nit != rules_by_neg_predicate_.end()) {
    refresh_activations(nit->second, &pending_firings_);
  }
  return retracted;
}

std::vector<Firing> ReteNetwork::take_pending_firings() {
  std::vector<Firing> out;
  out.swap(pending_firings_);
  return out;
}

std::set<std::string> ReteNetwork::active_rules() const {
  std::set<std::string> out;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    for (const auto& t : productions_[r].tokens) {
      if (negatives_hold(r, t)) {
        out.insert(rules_[r].id);
        break;
      }
    }
  }
  return out;
}

NetworkStats ReteNetwork::stats() const {
  NetworkStats s;
  s.alpha_memories = alphas_.size();
  s.production_nodes = rules_.size();
  s.working_memory = wm_.size();
  for (const auto& plan : plans_) {
    if (plan.positives.size() > 1) s.beta_joins += plan.positives.size() - 1;
    s.negation_checks += plan.negatives.size();
  }
  return s;
}

std::map<std::string, int> evaluate_batch(
    const FactBase& fb, const std::vector<CrispRule>& rules) {
  validate_rules(rules);
  const auto facts = fb.query();
  std::set<std::string> things;
  std::map<std::string, std::set<std::string>> things_by_predicate;
  for (const auto& f : facts) {
    things.insert(f.thing_id);
    things_by_predicate[f.predicate].insert(f.thing_id);
  }

  auto cond_pred = [](const Condition& c) {
    return c.op == CondOp::changed ? changed_predicate(c.predicate)
                                   : c.predicate;
  };
  auto holds_for = [&](const Condition& c, const std::string& thing) {
    const auto* f = fb.find(thing, cond_pred(c));
    if (!f) return false;
    if (c.op == CondOp::changed) return true;
    return op_matches(c.op, f->value, c.value);
  };

  std::map<std::string, int> out;
  for (const auto& rule : rules) {
    std::vector<std::string> vars;
    for (const auto& c : rule.when) {
      if (c.op != CondOp::absent && c.thing != "*" &&
          std::find(vars.begin(), vars.end(), c.thing) == vars.end()) {
        vars.push_back(c.thing);
      }
    }

    bool feasible = true;
    // anonymous positives: independently existential
    for (const auto& c : rule.when) {
      if (c.op == CondOp::absent || c.thing != "*") continue;
      bool any = false;
      for (const auto& t : things) {
        if (holds_for(c, t)) {
          any = true;
          break;
        }
      }
      if (!any) {
        feasible = false;
        break;
      }
    }

    std::vector<std::vector<std::string>> candidates(vars.size());
    if (feasible) {
      for (std::size_t v = 0; v < vars.size(); ++v) {
        for (const auto& t : things) {
          bool all = true;
          for (const auto& c : rule.when) {
            if (c.op == CondOp::absent || c.thing != vars[v]) continue;
            if (!holds_for(c, t)) {
              all = false;
              break;
            }
          }
          if (all) candidates[v].push_back(t);
        }
        if (candidates[v].empty()) {
          feasible = false;
          break;
        }
      }
    }

    bool satisfied = false;
    if (feasible) {
      // enumerate assignments over candidate things per variable
      std::vector<std::size_t> idx(vars.size(), 0);
      while (true) {
        bool ok = true;
        for (const auto& c : rule.when) {
          if (c.op != CondOp::absent) continue;
          if (c.thing == "*") {
            auto pit = things_by_predicate.find(c.predicate);
            if (pit != things_by_predicate.end() && !pit->second.empty()) {
              ok = false;
              break;
            }
          } else {
            auto vit = std::find(vars.begin(), vars.end(), c.thing);
            const auto& bound = candidates[vit - vars.begin()][idx[vit - vars.begin()]];
            if (fb.find(bound, c.predicate)) {
              ok = false;
              break;
            }
          }
        }
        if (ok) {
          satisfied = true;
          break;
        }
        if (vars.empty()) break;
        std::size_t d = 0;
        while (d < vars.size() && ++idx[d] == candidates[d].size()) {
          idx[d] = 0;
          ++d;
        }
        if (d == vars.size()) break;
      }
    }
    out[rule.id] = satisfied ? 1 : 0;
  }
  return out;
}

std::vector<CrispRule> rules_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("rule file: expected a JSON array");
  std::vector<CrispRule> rules;
  for (const auto& rj : j) {
    CrispRule r;
    r.id = rj.at("id").get<std::string>();
    r.salience = rj.value("salience", 0);
    for (const auto& cj : rj.at("when")) {
      Condition c;
      c.thing = cj.value("thing", "*");
      c.predicate = cj.at("predicate").get<std::string>();
      c.op = cond_op_from_name(cj.at("op").get<std::string>());
      if (cj.contains("value")) c.value = Value::from_json(cj["value"]);
      r.when.push_back(std::move(c));
    }
    const auto& tj = rj.at("then");
    r.then.ttp = tj.value("ttp", "");
    r.then.csf = tj.value("csf", "");
    r.then.severity = tj.value("severity", "medium");
    r.then.message = tj.value("message", "");
    rules.push_back(std::move(r));
  }
  validate_rules(rules);
  return rules;
}

nlohmann::json rules_to_json(const std::vector<CrispRule>& rules) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules) {
    nlohmann::json when = nlohmann::json::array();
    for (const auto& c : r.when) {
      nlohmann::json cj{{"thing", c.thing},
                        {"predicate", c.predicate},
                        {"op", cond_op_name(c.op)}};
      if (c.op != CondOp::changed && c.op != CondOp::absent) {
        cj["value"] = c.value.to_json();
      }
      when.push_back(std::move(cj));
    }
    arr.push_back(nlohmann::json{{"id", r.id},
                                 {"salience", r.salience},
                                 {"when", when},
                                 {"then",
                                  {{"ttp", r.then.ttp},
                                   {"csf", r.then.csf},
                                   {"severity", r.then.severity},
                                   {"message", r.then.message}}}});
  }
  return arr;
}

std::vector<CrispRule> load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_rules: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return rules_from_json(j);
}

}  // namespace hst
