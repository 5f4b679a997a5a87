#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hst {

/// Piecewise-linear membership function; breakpoints non-decreasing,
/// output always in [0,1]. Values outside the support evaluate to the
/// boundary degree.
struct MembershipFunction {
  enum class Shape { triangular, trapezoidal, ramp_up, ramp_down };

  Shape shape = Shape::triangular;
  double a = 0, b = 0, c = 0, d = 0;

  static MembershipFunction triangular(double a, double b, double c);
  static MembershipFunction trapezoidal(double a, double b, double c, double d);
  static MembershipFunction ramp_up(double a, double b);
  static MembershipFunction ramp_down(double a, double b);

  double eval(double v) const;
  void validate() const;  // throws on decreasing breakpoints
};

/// Degree of truth of `v` under `mf`.
double membership(const MembershipFunction& mf, double v);

struct LinguisticVariable {
  std::string name;
  double lo = 0.0, hi = 1.0;
  std::map<std::string, MembershipFunction> terms;
};

struct FuzzyRule {
  enum class Connective { and_min, or_max };
  Connective op = Connective::and_min;
  std::vector<std::pair<std::string, std::string>> antecedents;  // (var, term)
  std::pair<std::string, std::string> consequent;  // (output var, term)
  double weight = 1.0;  // in (0,1]
};

enum class TNorm { minimum, product };

enum class RiskBand { low, med, high };
const char* band_name(RiskBand b);

struct FuzzyConfig {
  std::vector<LinguisticVariable> inputs;  // aligned 1:1 with the FeatureSpec
  LinguisticVariable output;               // universe must be exactly [0,1]
  std::vector<FuzzyRule> rules;
  TNorm tnorm = TNorm::minimum;
  double theta = 0.5;          // in (0,1)
  double band_lo = 1.0 / 3.0;  // 0 < band_lo < band_hi < 1
  double band_hi = 2.0 / 3.0;
  int defuzz_samples = 1001;
  std::map<std::string, std::string> ttp_hints;  // input variable -> TTP

  void validate() const;
  std::optional<std::size_t> input_index(const std::string& name) const;
};

struct RuleActivation {
  std::size_t rule_index = 0;
  double strength = 0.0;
};

struct InferenceTrace {
  std::vector<RuleActivation> activations;  // non-zero strengths only
  std::vector<double> inputs;
};

/// Mamdani pipeline: fuzzify, per-rule firing strength (t-norm or max,
/// scaled by weight), min implication clipping the consequent, max
/// aggregation, centroid defuzzification over uniform samples of [0,1].
/// All strengths zero => 0 (declared benign fallback).
double infer(const FuzzyConfig& cfg, std::span<const double> x,
             InferenceTrace* trace = nullptr);

/// 1 iff mu >= theta (boundary inclusive).
int classify(double mu, double theta);

/// low if mu < b1; med if b1 <= mu < b2; high if mu >= b2.
RiskBand band(double mu, double b1, double b2);

FuzzyConfig fuzzy_config_from_json(const nlohmann::json& j);
nlohmann::json fuzzy_config_to_json(const FuzzyConfig& cfg);
FuzzyConfig load_fuzzy_config(const std::string& path);

}  // namespace hst
