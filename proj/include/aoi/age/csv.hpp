#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>

#include "aoi/age/trace.hpp"

namespace aoi {

inline constexpr std::string_view kTraceCsvHeader = "id,gen_ns,recv_ns,size_bytes";

namespace detail {

template <typename T>
T parse_unsigned(std::string_view field, std::size_t line, std::string_view what) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last)
    throw ConfigError("line " + std::to_string(line) + ": bad " + std::string{what} + " '" +
                      std::string{field} + "'");
  return value;
}

inline Nanos parse_stamp(std::string_view field, std::size_t line, std::string_view what) {
  const auto v = parse_unsigned<std::uint64_t>(field, line, what);
  if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    throw ConfigError("line " + std::to_string(line) + ": " + std::string{what} + " out of range");
  return Nanos{static_cast<std::int64_t>(v)};
}

}  // namespace detail

/// Reads the trace CSV. Malformed rows abort with the 1-based line number.
inline AgeTrace read_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ConfigError("line 1: empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceCsvHeader) throw ConfigError("line 1: expected header '" + std::string{kTraceCsvHeader} + "'");

  std::vector<PacketRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest{line};
    std::string_view fields[4];
    for (int f = 0; f < 4; ++f) {
      const auto comma = rest.find(',');
      if (f < 3 && comma == std::string_view::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": expected 4 fields");
      fields[f] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      if (f == 3 && comma != std::string_view::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": expected 4 fields");
    }
    PacketRecord r;
    r.id = detail::parse_unsigned<std::uint64_t>(fields[0], line_no, "id");
    r.gen_ts = detail::parse_stamp(fields[1], line_no, "gen_ns");
    if (!fields[2].empty()) r.recv_ts = detail::parse_stamp(fields[2], line_no, "recv_ns");
    r.size_bytes = detail::parse_unsigned<std::uint32_t>(fields[3], line_no, "size_bytes");
    if (!records.empty() && r.id <= records.back().id)
      throw ConfigError("line " + std::to_string(line_no) + ": ids must be strictly increasing");
    records.push_back(r);
  }
  return AgeTrace::from_records(std::move(records));
}

inline AgeTrace read_trace_csv(const std::string& path) {
  std::ifstream in{path};
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  return read_trace_csv(in);
}

inline void write_trace_csv(std::ostream& out, const AgeTrace& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.id << ',' << r.gen_ts.count() << ',';
    if (r.recv_ts) out << r.recv_ts->count();
    out << ',' << r.size_bytes << '\n';
  }
}

}  // namespace aoi
