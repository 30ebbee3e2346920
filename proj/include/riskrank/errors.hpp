#pragma once

#include <stdexcept>
#include <string>

namespace riskrank {

// Bad input data: malformed files, schema violations, unknown references.
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: out-of-range knobs, missing required fields,
// unknown rule names. The CLI maps this to exit code 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace riskrank
