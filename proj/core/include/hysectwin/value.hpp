#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

namespace hst {

/// Tagged scalar carried by observations, facts and envelope payloads.
/// One of: bool, integer, real, string.
class Value {
 public:
  enum class Kind { boolean, integer, real, string };

  Value() : v_(false) {}
  Value(bool b) : v_(b) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(static_cast<std::int64_t>(i)) {}
  Value(double d) : v_(d) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_bool() const { return kind() == Kind::boolean; }
  bool is_string() const { return kind() == Kind::string; }
  bool is_number() const {
    return kind() == Kind::integer || kind() == Kind::real;
  }

  bool as_bool() const { return std::get<bool>(v_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }

  /// Numeric view: integers and reals convert; booleans map to 1/0.
  /// Throws on strings.
  double as_double() const;

  /// Equality is numeric across integer/real (36 == 36.0); bools and
  /// strings compare only within their own kind.
  bool operator==(const Value& other) const;
  bool operator!=(const Value& other) const { return !(*this == other); }

  std::string repr() const;

  nlohmann::json to_json() const;
  static Value from_json(const nlohmann::json& j);

 private:
  std::variant<bool, std::int64_t, double, std::string> v_;
};

}  // namespace hst
