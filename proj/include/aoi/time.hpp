#pragma once

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "aoi/error.hpp"

namespace aoi {

// All timestamps are integer nanoseconds; floating seconds appear only at the
// presentation boundary and inside area computations on differences.
using Nanos = std::chrono::nanoseconds;
using Seconds = std::chrono::duration<double>;

constexpr double to_seconds(Nanos d) { return static_cast<double>(d.count()) * 1e-9; }

inline Nanos from_seconds(double s) {
  if (!std::isfinite(s)) throw RangeError("non-finite duration");
  return Nanos{static_cast<std::int64_t>(std::llround(s * 1e9))};
}

// Parses "12.5ms", "1s", "250us", "40ns" or a bare number of seconds.
inline Nanos parse_duration(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
          text[pos] == '-' || text[pos] == '+' || text[pos] == 'e' || text[pos] == 'E')) {
    // an 'e' followed by nothing numeric is not an exponent
    if ((text[pos] == 'e' || text[pos] == 'E') &&
        (pos + 1 >= text.size() || !(std::isdigit(static_cast<unsigned char>(text[pos + 1])) ||
                                     text[pos + 1] == '-' || text[pos + 1] == '+')))
      break;
    ++pos;
  }
  const std::string number{text.substr(0, pos)};
  const std::string_view unit = text.substr(pos);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(number, &used);
    if (used != number.size()) throw ConfigError("");
  } catch (const std::exception&) {
    throw ConfigError("bad duration '" + std::string{text} + "'");
  }
  double scale = 1.0;
  if (unit.empty() || unit == "s")
    scale = 1.0;
  else if (unit == "ms")
    scale = 1e-3;
  else if (unit == "us")
    scale = 1e-6;
  else if (unit == "ns")
    scale = 1e-9;
  else
    throw ConfigError("bad duration unit in '" + std::string{text} + "'");
  return from_seconds(value * scale);
}

}  // namespace aoi
