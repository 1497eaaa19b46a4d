#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace cabat {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Endpoint { continuous, binary, time_to_event };

inline const char* endpoint_name(Endpoint e) {
  switch (e) {
    case Endpoint::continuous: return "continuous";
    case Endpoint::binary: return "binary";
    case Endpoint::time_to_event: return "time_to_event";
  }
  return "?";
}

// One linear-predictor term: a covariate column raised to power 1 or 2.
struct Term {
  int column = 0;
  int power = 1;
  friend bool operator==(const Term&, const Term&) = default;
};

// Configuration / input problems (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime failures during simulation or fitting (CLI exit code 3).
struct RuntimeFailure : std::runtime_error {
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct CalibrationError : RuntimeFailure {
  explicit CalibrationError(const std::string& msg) : RuntimeFailure(msg) {}
};

struct ResamplingError : RuntimeFailure {
  explicit ResamplingError(const std::string& msg) : RuntimeFailure(msg) {}
};

struct FitError : RuntimeFailure {
  explicit FitError(const std::string& msg) : RuntimeFailure(msg) {}
};

}  // namespace cabat
