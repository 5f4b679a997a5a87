#pragma once

#include <stdexcept>
#include <string>

namespace hst {

/// Base error for all library failures (config, parse, contract violations).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hst
