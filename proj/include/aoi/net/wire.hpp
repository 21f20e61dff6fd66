#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

#include "aoi/error.hpp"

namespace aoi::net {

enum class MsgType : std::uint8_t {
  data = 0x01,
  echo_reply = 0x02,
  time_request = 0x03,
  time_response = 0x04,
};

inline constexpr std::array<std::uint8_t, 4> kMagic{'A', 'O', 'I', '1'};
inline constexpr std::size_t kHeaderBytes = 31;
inline constexpr std::size_t kDefaultDatagramBytes = 1058;
inline constexpr std::size_t kMaxDatagramBytes = 65507;

/// Fixed 31-byte big-endian header followed by payload_len zero bytes:
///   0  magic "AOI1"      4  msg_type   5  id
///   13 gen_ts (ns)       21 extra_ts (ns)   29 payload_len
struct WirePacket {
  MsgType type = MsgType::data;
  std::uint64_t id = 0;
  std::uint64_t gen_ts = 0;
  std::uint64_t extra_ts = 0;
  std::uint16_t payload_len = 0;

  std::size_t size() const { return kHeaderBytes + payload_len; }
  friend bool operator==(const WirePacket&, const WirePacket&) = default;

  /// A packet whose encoding is exactly `datagram_bytes` long.
  static WirePacket sized(MsgType type, std::uint64_t id, std::uint64_t gen_ts,
                          std::size_t datagram_bytes = kDefaultDatagramBytes) {
    if (datagram_bytes < kHeaderBytes || datagram_bytes > kHeaderBytes + 0xffff)
      throw ConfigError("datagram size must lie in [31, 65566] bytes");
    return {type, id, gen_ts, 0, static_cast<std::uint16_t>(datagram_bytes - kHeaderBytes)};
  }
};

namespace detail {

inline void put_be(std::uint8_t* p, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) {
    p[i] = static_cast<std::uint8_t>(v & 0xff);
    v >>= 8;
  }
}

inline std::uint64_t get_be(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
  return v;
}

inline bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x04; }

}  // namespace detail

inline void encode_into(const WirePacket& p, std::span<std::uint8_t> out) {
  if (out.size() < p.size()) throw RangeError("buffer too small for datagram");
  std::memcpy(out.data(), kMagic.data(), kMagic.size());
  out[4] = static_cast<std::uint8_t>(p.type);
  detail::put_be(out.data() + 5, p.id, 8);
  detail::put_be(out.data() + 13, p.gen_ts, 8);
  detail::put_be(out.data() + 21, p.extra_ts, 8);
  detail::put_be(out.data() + 29, p.payload_len, 2);
  std::memset(out.data() + kHeaderBytes, 0, p.payload_len);
}

inline std::vector<std::uint8_t> encode(const WirePacket& p) {
  std::vector<std::uint8_t> out(p.size());
  encode_into(p, out);
  return out;
}

/// nullopt for anything that is not a well-formed datagram: short, bad magic,
/// unknown type, or a length field that disagrees with the datagram size.
inline std::optional<WirePacket> decode(std::span<const std::uint8_t> in) {
  if (in.size() < kHeaderBytes) return std::nullopt;
  if (std::memcmp(in.data(), kMagic.data(), kMagic.size()) != 0) return std::nullopt;
  if (!detail::known_type(in[4])) return std::nullopt;
  WirePacket p;
  p.type = static_cast<MsgType>(in[4]);
  p.id = detail::get_be(in.data() + 5, 8);
  p.gen_ts = detail::get_be(in.data() + 13, 8);
  p.extra_ts = detail::get_be(in.data() + 21, 8);
  p.payload_len = static_cast<std::uint16_t>(detail::get_be(in.data() + 29, 2));
  if (in.size() != p.size()) return std::nullopt;
  return p;
}

}  // namespace aoi::net
