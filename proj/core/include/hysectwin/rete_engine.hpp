#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hysectwin/semantic_model.hpp"
#include "hysectwin/value.hpp"

namespace hst {

/// Condition operators. `changed` matches a synthetic transient fact
/// `<predicate>.changed` emitted by the fact-base delta; `absent` is
/// negation-as-absence evaluated at end-of-cycle against working memory.
enum class CondOp { eq, ne, lt, le, gt, ge, changed, absent };

const char* cond_op_name(CondOp op);
CondOp cond_op_from_name(const std::string& name);

struct Condition {
  std::string thing = "*";  // "*" (unconstrained) or a join variable name
  std::string predicate;
  CondOp op = CondOp::eq;
  Value value;  // unused for changed/absent
};

struct AlertTemplate {
  std::string ttp;
  std::string csf;  // empty => tag map default applies
  std::string severity = "medium";
  std::string message;
};

struct CrispRule {
  std::string id;
  int salience = 0;
  std::vector<Condition> when;  // conjunction
  AlertTemplate then;
};

struct Firing {
  std::string rule_id;
  int salience = 0;
  std::string thing_id;  // first named binding, else first support's thing
  std::vector<SemanticFact> support;  // the exact enabling fact set
  std::map<std::string, std::string> bindings;
};

struct RetractedFiring {
  std::string rule_id;
  std::vector<std::int64_t> support_ids;
};

struct NetworkStats {
  std::size_t alpha_memories = 0;
  std::size_t beta_joins = 0;
  std::size_t production_nodes = 0;
  std::size_t negation_checks = 0;
  std::size_t working_memory = 0;
};

/// Forward-chaining network with shared alpha memories and per-rule beta
/// join chains. Incremental: facts may be inserted and retracted at any
/// time; a production does not re-fire for an identical supporting fact
/// set until that activation has been withdrawn.
class ReteNetwork {
 public:
  /// Compiles a rule set; structurally identical condition tests share
  /// one alpha memory. Throws naming the rule and condition index on
  /// type-incompatible conditions, unbound negation variables, or rules
  /// with no positive condition.
  static ReteNetwork compile(std::vector<CrispRule> rules);

  ReteNetwork() = default;

  /// Inserts a fact (fact_id must be unique among live facts). Returns
  /// activations newly enabled by this cycle, ordered by salience
  /// descending then arrival.
  std::vector<Firing> insert(const SemanticFact& fact);

  /// Removes a fact and every activation depending on it. Unknown ids
  /// are a no-op (counted, not an error). Activations *enabled* by the
  /// removal (negation release) are queued; see take_pending_firings().
  std::vector<RetractedFiring> retract(std::int64_t fact_id);

  /// Firings produced as a side effect of retract cycles.
  std::vector<Firing> take_pending_firings();

  /// Rule ids with at least one currently active production.
  std::set<std::string> active_rules() const;

  NetworkStats stats() const;
  std::uint64_t unknown_retracts() const { return unknown_retracts_; }

  /// Predicates referenced by `changed` conditions (without the
  /// ".changed" suffix); the fact-base layer synthesizes transients for
  /// exactly these.
  const std::set<std::string>& changed_predicates() const {
    return changed_predicates_;
  }

  const std::vector<CrispRule>& rules() const { return rules_; }

 private:
  struct AlphaTest {
    std::string predicate;
    bool presence = false;  // true: match any fact with this predicate
    CondOp op = CondOp::eq;
    Value value;
    bool operator==(const AlphaTest& o) const {
      return predicate == o.predicate && presence == o.presence &&
             (presence || (op == o.op && value == o.value));
    }
  };
  struct AlphaMemory {
    AlphaTest test;
    std::vector<std::int64_t> facts;  // insertion order
  };
  struct PositiveSlot {
    std::size_t alpha = 0;
    std::string var;  // "*" or name
  };
  struct NegativeSlot {
    std::string predicate;
    std::string var;  // "*" or name (bound by a positive slot)
  };
  struct Token {
    std::vector<std::int64_t> supports;  // one fact id per positive slot
    std::map<std::string, std::string> bindings;
  };
  struct Production {
    std::vector<Token> tokens;               // complete positive matches
    std::set<std::vector<std::int64_t>> fired;  // refractory keys
  };
  struct RulePlan {
    std::vector<PositiveSlot> positives;
    std::vector<NegativeSlot> negatives;
  };

  bool alpha_matches(const AlphaTest& test, const SemanticFact& f) const;
  std::size_t intern_alpha(const AlphaTest& test);
  bool try_extend(const Token& t, const SemanticFact& f,
                  const std::string& var, Token& out) const;
  bool negatives_hold(std::size_t rule_idx, const Token& t) const;
  void refresh_activations(const std::set<std::size_t>& rule_idxs,
                           std::vector<Firing>* out);
  Firing make_firing(std::size_t rule_idx, const Token& t) const;

  std::vector<CrispRule> rules_;
  std::vector<RulePlan> plans_;
  std::vector<AlphaMemory> alphas_;
  std::vector<std::vector<std::vector<Token>>> beta_;  // [rule][level]
  std::vector<Production> productions_;
  std::map<std::int64_t, SemanticFact> wm_;
  // presence index: predicate -> thing -> live fact count
  std::map<std::string, std::map<std::string, int>> presence_;
  std::map<std::string, std::set<std::size_t>> rules_by_neg_predicate_;
  std::set<std::string> changed_predicates_;
  std::vector<Firing> pending_firings_;
  std::uint64_t unknown_retracts_ = 0;
};

/// Naive full-base conjunction evaluation: 1 iff some assignment of the
/// rule's thing variables satisfies every condition against the current
/// facts. Serves as the independent oracle for the incremental network.
std::map<std::string, int> evaluate_batch(const FactBase& fb,
                                          const std::vector<CrispRule>& rules);

/// Rule-file (de)serialization. Schema per rule:
/// { "id", "salience", "when": [{"thing","predicate","op","value"}],
///   "then": {"ttp","csf","severity","message"} }
std::vector<CrispRule> rules_from_json(const nlohmann::json& j);
nlohmann::json rules_to_json(const std::vector<CrispRule>& rules);
std::vector<CrispRule> load_rules(const std::string& path);

}  // namespace hst
