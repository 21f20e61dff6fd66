#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

// Argument outside an accepted window (time outside trace, negative stamps).
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Statistic requested on a trace with too few deliveries.
struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or malformed input file.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Parameter outside the mathematical domain of a formula.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Controller queried before it has the observations it needs.
struct NotReady : std::logic_error {
  using std::logic_error::logic_error;
};

// Socket failure, peer timeout.
struct NetworkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aoi
