#include "hysectwin/fuzzy_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hysectwin/error.hpp"

namespace hst {

MembershipFunction MembershipFunction::triangular(double a, double b,
                                                  double c) {
  MembershipFunction mf{Shape::triangular, a, b, c, c};
  mf.validate();
  return mf;
}

MembershipFunction MembershipFunction::trapezoidal(double a, double b,
                                                   double c, double d) {
  MembershipFunction mf{Shape::trapezoidal, a, b, c, d};
  mf.validate();
  return mf;
}

MembershipFunction MembershipFunction::ramp_up(double a, double b) {
  MembershipFunction mf{Shape::ramp_up, a, b, b, b};
  mf.validate();
  return mf;
}

MembershipFunction MembershipFunction::ramp_down(double a, double b) {
  MembershipFunction mf{Shape::ramp_down, a, b, b, b};
  mf.validate();
  return mf;
}

void MembershipFunction::validate() const {
  switch (shape) {
    case Shape::triangular:
      if (!(a <= b && b <= c)) throw Error("triangular: need a <= b <= c");
      break;
    case Shape::trapezoidal:
      if (!(a <= b && b <= c && c <= d)) {
        throw Error("trapezoidal: need a <= b <= c <= d");
      }
      break;
    case Shape::ramp_up:
    case Shape::ramp_down:
      if (!(a <= b)) throw Error("ramp: need a <= b");
      break;
  }
}

double MembershipFunction::eval(double v) const {
  auto rise = [](double v, double lo, double hi) {
    if (v <= lo) return 0.0;
    if (v >= hi) return 1.0;
    return (v - lo) / (hi - lo);
  };
  switch (shape) {
    case Shape::triangular:
      if (v < a || v > c) return 0.0;
      if (v == b) return 1.0;
      if (v < b) return a == b ? 1.0 : (v - a) / (b - a);
      return b == c ? 1.0 : (c - v) / (c - b);
    case Shape::trapezoidal:
      if (v < a || v > d) return 0.0;
      if (v >= b && v <= c) return 1.0;
      if (v < b) return a == b ? 1.0 : (v - a) / (b - a);
      return c == d ? 1.0 : (d - v) / (d - c);
    case Shape::ramp_up:
      return a == b ? (v >= b ? 1.0 : 0.0) : rise(v, a, b);
    case Shape::ramp_down:
      return a == b ? (v <= a ? 1.0 : 0.0) : 1.0 - rise(v, a, b);
  }
  return 0.0;
}

double membership(const MembershipFunction& mf, double v) { return mf.eval(v); }

const char* band_name(RiskBand b) {
  switch (b) {
    case RiskBand::low: return "low";
    case RiskBand::med: return "med";
    case RiskBand::high: return "high";
  }
  return "?";
}

void FuzzyConfig::validate() const {
  if (!(theta > 0.0 && theta < 1.0)) throw Error("FuzzyConfig: theta must be in (0,1)");
  if (!(band_lo > 0.0 && band_lo < band_hi && band_hi < 1.0)) {
    throw Error("FuzzyConfig: bands must satisfy 0 < b1 < b2 < 1");
  }
  if (output.lo != 0.0 || output.hi != 1.0) {
    throw Error("FuzzyConfig: output universe must be exactly [0,1]");
  }
  if (output.terms.empty()) throw Error("FuzzyConfig: output has no terms");
  if (defuzz_samples < 2) throw Error("FuzzyConfig: defuzz_samples must be >= 2");
  for (const auto& var : inputs) {
    if (!(var.lo < var.hi)) {
      throw Error("FuzzyConfig: variable '" + var.name + "': lo must be < hi");
    }
    if (var.terms.empty()) {
      throw Error("FuzzyConfig: variable '" + var.name + "' has no terms");
    }
    for (const auto& [name, mf] : var.terms) mf.validate();
  }
  for (const auto& [name, mf] : output.terms) mf.validate();
  for (const auto& rule : rules) {
    if (rule.antecedents.empty()) throw Error("FuzzyConfig: rule with no antecedents");
    if (!(rule.weight > 0.0 && rule.weight <= 1.0)) {
      throw Error("FuzzyConfig: rule weight must be in (0,1]");
    }
    for (const auto& [var, term] : rule.antecedents) {
      auto idx = input_index(var);
      if (!idx) throw Error("FuzzyConfig: rule references unknown variable '" + var + "'");
      if (!inputs[*idx].terms.count(term)) {
        throw Error("FuzzyConfig: rule references unknown term '" + var + "." + term + "'");
      }
    }
    if (rule.consequent.first != output.name) {
      throw Error("FuzzyConfig: rule consequent must target output '" + output.name + "'");
    }
    if (!output.terms.count(rule.consequent.second)) {
      throw Error("FuzzyConfig: unknown output term '" + rule.consequent.second + "'");
    }
  }
}

std::optional<std::size_t> FuzzyConfig::input_index(
    const std::string& name) const {
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].name == name) return i;
  }
  return std::nullopt;
}

double infer(const FuzzyConfig& cfg, std::span<const double> x,
             InferenceTrace* trace) {
  if (x.size() != cfg.inputs.size()) {
    throw Error("infer: expected " + std::to_string(cfg.inputs.size()) +
                " inputs, got " + std::to_string(x.size()));
  }
  if (trace) {
    trace->activations.clear();
    trace->inputs.assign(x.begin(), x.end());
  }

  std::vector<double> strengths(cfg.rules.size(), 0.0);
  bool any = false;
  for (std::size_t r = 0; r < cfg.rules.size(); ++r) {
    const auto& rule = cfg.rules[r];
    double s = 0.0;
    bool first = true;
    for (const auto& [var, term] : rule.antecedents) {
      auto idx = *cfg.input_index(var);
      double deg = cfg.inputs[idx].terms.at(term).eval(x[idx]);
      if (rule.op == FuzzyRule::Connective::and_min) {
        if (cfg.tnorm == TNorm::product) {
          s = first ? deg : s * deg;
        } else {
          s = first ? deg : std::min(s, deg);
        }
      } else {
        s = first ? deg : std::max(s, deg);
      }
      first = false;
    }
    s *= rule.weight;
    strengths[r] = s;
    if (s > 0.0) {
      any = true;
      if (trace) trace->activations.push_back(RuleActivation{r, s});
    }
  }
  if (!any) return 0.0;  // declared fallback: no evidence, benign

  // aggregate clipped consequents by max; centroid over uniform samples
  const int n = cfg.defuzz_samples;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < n; ++k) {
    double z = static_cast<double>(k) / (n - 1);
    double m = 0.0;
    for (std::size_t r = 0; r < cfg.rules.size(); ++r) {
      if (strengths[r] <= 0.0) continue;
      const auto& mf = cfg.output.terms.at(cfg.rules[r].consequent.second);
      m = std::max(m, std::min(strengths[r], mf.eval(z)));
    }
    num += z * m;
    den += m;
  }
  if (den == 0.0) return 0.0;
  double mu = num / den;
  return std::clamp(mu, 0.0, 1.0);
}

int classify(double mu, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw Error("classify: theta must be in (0,1)");
  return mu >= theta ? 1 : 0;
}

RiskBand band(double mu, double b1, double b2) {
  if (!(b1 > 0.0 && b1 < b2 && b2 < 1.0)) {
    throw Error("band: boundaries must satisfy 0 < b1 < b2 < 1");
  }
  if (mu < b1) return RiskBand::low;
  if (mu < b2) return RiskBand::med;
  return RiskBand::high;
}

namespace {

MembershipFunction mf_from_json(const nlohmann::json& j) {
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "triangular") {
    return MembershipFunction::triangular(j.at("a").get<double>(),
                                          j.at("b").get<double>(),
                                          j.at("c").get<double>());
  }
  if (shape == "trapezoidal") {
    return MembershipFunction::trapezoidal(
        j.at("a").get<double>(), j.at("b").get<double>(),
        j.at("c").get<double>(), j.at("d").get<double>());
  }
  if (shape == "ramp_up") {
    return MembershipFunction::ramp_up(j.at("a").get<double>(),
                                       j.at("b").get<double>());
  }
  if (shape == "ramp_down") {
    return MembershipFunction::ramp_down(j.at("a").get<double>(),
                                         j.at("b").get<double>());
  }
  throw Error("unknown membership shape '" + shape + "'");
}

nlohmann::json mf_to_json(const MembershipFunction& mf) {
  using Shape = MembershipFunction::Shape;
  switch (mf.shape) {
    case Shape::triangular:
      return {{"shape", "triangular"}, {"a", mf.a}, {"b", mf.b}, {"c", mf.c}};
    case Shape::trapezoidal:
      return {{"shape", "trapezoidal"},
              {"a", mf.a},
              {"b", mf.b},
              {"c", mf.c},
              {"d", mf.d}};
    case Shape::ramp_up:
      return {{"shape", "ramp_up"}, {"a", mf.a}, {"b", mf.b}};
    case Shape::ramp_down:
      return {{"shape", "ramp_down"}, {"a", mf.a}, {"b", mf.b}};
  }
  return {};
}

LinguisticVariable var_from_json(const nlohmann::json& j) {
  LinguisticVariable var;
  var.name = j.at("name").get<std::string>();
  var.lo = j.at("universe").at(0).get<double>();
  var.hi = j.at("universe").at(1).get<double>();
  for (auto it = j.at("terms").begin(); it != j.at("terms").end(); ++it) {
    var.terms[it.key()] = mf_from_json(it.value());
  }
  return var;
}

nlohmann::json var_to_json(const LinguisticVariable& var) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [name, mf] : var.terms) terms[name] = mf_to_json(mf);
  return {{"name", var.name},
          {"universe", nlohmann::json::array({var.lo, var.hi})},
          {"terms", terms}};
}

}  // namespace

FuzzyConfig fuzzy_config_from_json(const nlohmann::json& j) {
  FuzzyConfig cfg;
  for (const auto& vj : j.at("inputs")) cfg.inputs.push_back(var_from_json(vj));
  cfg.output = var_from_json(j.at("output"));
  for (const auto& rj : j.at("rules")) {
    FuzzyRule rule;
    rule.op = rj.value("op", "and") == "or" ? FuzzyRule::Connective::or_max
                                            : FuzzyRule::Connective::and_min;
    for (const auto& aj : rj.at("if")) {
      rule.antecedents.emplace_back(aj.at(0).get<std::string>(),
                                    aj.at(1).get<std::string>());
    }
    rule.consequent = {rj.at("then").at(0).get<std::string>(),
                       rj.at("then").at(1).get<std::string>()};
    rule.weight = rj.value("weight", 1.0);
    cfg.rules.push_back(std::move(rule));
  }
  if (j.contains("tnorm")) {
    cfg.tnorm = j["tnorm"] == "product" ? TNorm::product : TNorm::minimum;
  }
  cfg.theta = j.value("theta", 0.5);
  if (j.contains("bands")) {
    cfg.band_lo = j["bands"].at(0).get<double>();
    cfg.band_hi = j["bands"].at(1).get<double>();
  }
  if (j.contains("defuzzifier")) {
    cfg.defuzz_samples = j["defuzzifier"].value("samples", 1001);
  }
  if (j.contains("ttp_hints")) {
    for (auto it = j["ttp_hints"].begin(); it != j["ttp_hints"].end(); ++it) {
      cfg.ttp_hints[it.key()] = it.value().get<std::string>();
    }
  }
  cfg.validate();
  return cfg;
}

nlohmann::json fuzzy_config_to_json(const FuzzyConfig& cfg) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& var : cfg.inputs) inputs.push_back(var_to_json(var));
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& rule : cfg.rules) {
    nlohmann::json ifs = nlohmann::json::array();
    for (const auto& [var, term] : rule.antecedents) {
      ifs.push_back(nlohmann::json::array({var, term}));
    }
    rules.push_back(nlohmann::json{
        {"if", ifs},
        {"op", rule.op == FuzzyRule::Connective::or_max ? "or" : "and"},
        {"then", nlohmann::json::array(
                     {rule.consequent.first, rule.consequent.second})},
        {"weight", rule.weight}});
  }
  nlohmann::json hints = nlohmann::json::object();
  for (const auto& [k, v] : cfg.ttp_hints) hints[k] = v;
  return nlohmann::json{
      {"inputs", inputs},
      {"output", var_to_json(cfg.output)},
      {"rules", rules},
      {"tnorm", cfg.tnorm == TNorm::product ? "product" : "min"},
      {"theta", cfg.theta},
      {"bands", nlohmann::json::array({cfg.band_lo, cfg.band_hi})},
      {"defuzzifier", {{"method", "centroid"}, {"samples", cfg.defuzz_samples}}},
      {"ttp_hints", hints}};
}

FuzzyConfig load_fuzzy_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_fuzzy_config: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return fuzzy_config_from_json(j);
}

}  // namespace hst
