#include "hysectwin/value.hpp"

#include <cmath>
#include <cstdio>

#include "hysectwin/error.hpp"

namespace hst {

double Value::as_double() const {
  switch (kind()) {
    case Kind::boolean:
      return as_bool() ? 1.0 : 0.0;
    case Kind::integer:
      return static_cast<double>(as_int());
    case Kind::real:
      return std::get<double>(v_);
    case Kind::string:
      throw Error("Value: string is not numeric: \"" + as_string() + "\"");
  }
  return 0.0;
}

bool Value::operator==(const Value& other) const {
  if (is_number() && other.is_number()) {
    return as_double() == other.as_double();
  }
  return v_ == other.v_;
}

std::string Value::repr() const {
  switch (kind()) {
    case Kind::boolean:
      return as_bool() ? "true" : "false";
    case Kind::integer:
      return std::to_string(as_int());
    case Kind::real: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", std::get<double>(v_));
      return buf;
    }
    case Kind::string:
      return as_string();
  }
  return {};
}

nlohmann::json Value::to_json() const {
  switch (kind()) {
    case Kind::boolean:
      return as_bool();
    case Kind::integer:
      return as_int();
    case Kind::real:
      return std::get<double>(v_);
    case Kind::string:
      return as_string();
  }
  return nullptr;
}

Value Value::from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number_integer()) return Value(j.get<std::int64_t>());
  if (j.is_number_float()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw Error("Value: unsupported JSON scalar: " + j.dump());
}

}  // namespace hst
