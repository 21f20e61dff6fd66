#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aoi/net/wire.hpp"

namespace aoi::net {

struct EchoCounters {
  std::uint64_t rx = 0;
  std::uint64_t echoed = 0;
  std::uint64_t malformed = 0;
};

inline std::string format_counters(const EchoCounters& c) {
  return "rx=" + std::to_string(c.rx) + " echoed=" + std::to_string(c.echoed) +
         " malformed=" + std::to_string(c.malformed);
}

/// Server-side datagram handling shared by the UDP server and the emulated
/// path. Data comes back byte-identical with the type flipped to echo-reply;
/// a time request is answered with the server clock in extra_ts.
class EchoResponder {
 public:
  std::optional<std::vector<std::uint8_t>> handle(std::span<const std::uint8_t> in,
                                                  std::uint64_t server_clock_ns) {
    ++counters_.rx;
    auto pkt = decode(in);
    if (!pkt) {
      ++counters_.malformed;
      return std::nullopt;
    }
    switch (pkt->type) {
      case MsgType::data: {
        std::vector<std::uint8_t> out(in.begin(), in.end());
        out[4] = static_cast<std::uint8_t>(MsgType::echo_reply);
        ++counters_.echoed;
        return out;
      }
      case MsgType::time_request: {
        WirePacket reply = *pkt;
        reply.type = MsgType::time_response;
        reply.extra_ts = server_clock_ns;
        ++counters_.echoed;
        return encode(reply);
      }
      default:
        ++counters_.malformed;
        return std::nullopt;
    }
  }

  const EchoCounters& counters() const { return counters_; }

 private:
  EchoCounters counters_;
};

}  // namespace aoi::net
