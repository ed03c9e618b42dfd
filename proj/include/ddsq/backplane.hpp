#pragma once

// Master-to-card serial link. One 48-bit word, sent msb first:
//
//   47..44 geo_addr   card slot 0-7, or 0xF for broadcast
//   43..40 bank       channel 0-3, or a control bank
//   39..24 mem_addr   target address in the card memory
//   23..0  payload
//
// The link is unencoded and point-to-point, so delivery time is a pure
// function of the send time: t_commit = t_send + 48/bitrate + commit latency.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddsq/coherence.hpp"
#include "ddsq/error.hpp"
#include "ddsq/nco.hpp"
#include "ddsq/program.hpp"
#include "ddsq/rational.hpp"

namespace ddsq {

inline constexpr std::uint8_t kBroadcast = 0xF;
inline constexpr unsigned kWireBits = 48;
inline constexpr std::uint8_t kControlBank = 0xF;

struct WireWord {
  std::uint8_t geo_addr = 0;
  std::uint8_t bank = 0;
  std::uint16_t mem_addr = 0;
  std::uint32_t payload = 0;

  friend bool operator==(const WireWord&, const WireWord&) = default;
};

inline bool valid_geo(std::uint8_t g) { return g < kMaxCards || g == kBroadcast; }

inline std::uint64_t encode_word(const WireWord& w) {
  if (!valid_geo(w.geo_addr))
    throw RangeError("geo_addr " + std::to_string(w.geo_addr) + " is reserved (valid: 0-7, 15)");
  if (w.bank > 0xF) throw RangeError("bank exceeds 4 bits");
  if (w.payload > 0xFFFFFF) throw RangeError("payload exceeds 24 bits");
  return (static_cast<std::uint64_t>(w.geo_addr) << 44) | (static_cast<std::uint64_t>(w.bank) << 40) |
         (static_cast<std::uint64_t>(w.mem_addr) << 24) | w.payload;
}

inline WireWord decode_word(std::uint64_t frame) {
  if (frame >> kWireBits) throw DecodeError("frame wider than 48 bits");
  WireWord w;
  w.geo_addr = static_cast<std::uint8_t>((frame >> 44) & 0xF);
  w.bank = static_cast<std::uint8_t>((frame >> 40) & 0xF);
  w.mem_addr = static_cast<std::uint16_t>((frame >> 24) & 0xFFFF);
  w.payload = static_cast<std::uint32_t>(frame & 0xFFFFFF);
  if (!valid_geo(w.geo_addr)) throw DecodeError("reserved geo_addr " + std::to_string(w.geo_addr));
  return w;
}

/// The six octets of a frame in transmission order.
inline std::array<std::uint8_t, 6> frame_bytes(std::uint64_t frame) {
  std::array<std::uint8_t, 6> b{};
  for (int i = 0; i < 6; ++i) b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(frame >> (40 - 8 * i));
  return b;
}

inline std::uint64_t frame_from_bytes(const std::array<std::uint8_t, 6>& b) {
  std::uint64_t f = 0;
  for (auto x : b) f = (f << 8) | x;
  return f;
}

struct LinkModel {
  std::uint64_t bitrate_bps = 166'000'000;
  std::uint32_t commit_latency_cycles = 2;
  std::uint64_t fabric_clock_hz = 125'000'000;

  /// Time on the wire for one word, in ns.
  Rational serialization_ns() const {
    return Rational(static_cast<std::int64_t>(kWireBits) * 1'000'000'000, static_cast<std::int64_t>(bitrate_bps));
  }

  /// Receive-to-memory latency, in ns.
  Rational commit_latency_ns() const {
    return Rational(static_cast<std::int64_t>(commit_latency_cycles) * 1'000'000'000,
                    static_cast<std::int64_t>(fabric_clock_hz));
  }

  Rational delivery_ns() const { return serialization_ns() + commit_latency_ns(); }

  void validate() const {
    if (bitrate_bps == 0 || fabric_clock_hz == 0) throw RangeError("link rates must be positive");
    if (commit_latency_ns() > Rational(20)) throw RangeError("commit latency exceeds 20 ns");
  }
};

/// Simulation state of one channel card.
struct ChannelCard {
  std::uint8_t slot = 0;
  std::array<NcoState, kChannelsPerCard> nco{};
  CoherenceClock clock;
  std::map<std::uint32_t, std::uint32_t> memory;  // (bank << 16 | addr) -> payload
  std::uint64_t triggers = 0;
  Rational last_trigger_ns;

  std::optional<std::uint32_t> read(std::uint8_t bank, std::uint16_t addr) const {
    auto it = memory.find((static_cast<std::uint32_t>(bank) << 16) | addr);
    if (it == memory.end()) return std::nullopt;
    return it->second;
  }
};

struct Commit {
  std::uint8_t card = 0;
  Rational commit_ns;
  WireWord word;
};

class Backplane {
 public:
  explicit Backplane(LinkModel link = {}) : link_(link) { link_.validate(); }

  const LinkModel& link() const { return link_; }

  void install(std::uint8_t slot) {
    if (slot >= kMaxCards) throw RangeError("slot must be 0-7");
    if (!cards_[slot]) {
      cards_[slot].emplace();
      cards_[slot]->slot = slot;
    }
  }

  bool installed(std::uint8_t slot) const { return slot < kMaxCards && cards_[slot].has_value(); }

  ChannelCard& card(std::uint8_t slot) {
    if (!installed(slot)) throw DeliveryError("no card in slot " + std::to_string(slot));
    return *cards_[slot];
  }
  const ChannelCard& card(std::uint8_t slot) const {
    if (!installed(slot)) throw DeliveryError("no card in slot " + std::to_string(slot));
    return *cards_[slot];
  }

  std::vector<std::uint8_t> slots() const {
    std::vector<std::uint8_t> s;
    for (std::uint8_t i = 0; i < kMaxCards; ++i)
      if (cards_[i]) s.push_back(i);
    return s;
  }

  /// Deliver one word sent at `t_send_ns` and write it into the addressed card memory.
  std::vector<Commit> deliver(const WireWord& w, const Rational& t_send_ns) {
    encode_word(w);  // field validation
    Rational t = t_send_ns + link_.delivery_ns();
    std::vector<Commit> out;
    if (w.geo_addr == kBroadcast) {
      for (auto s : slots()) out.push_back(write(s, w, t));
    } else {
      if (!installed(w.geo_addr))
        throw DeliveryError("unicast to empty slot " + std::to_string(w.geo_addr));
      out.push_back(write(w.geo_addr, w, t));
    }
    return out;
  }

  /// Send `words` back to back, starting no earlier than `t_ready_ns` and
  /// after any word already queued on the same link.
  std::vector<Commit> send_burst(const std::vector<WireWord>& words, const Rational& t_ready_ns) {
    std::vector<Commit> out;
    for (const auto& w : words) {
      encode_word(w);
      Rational start = t_ready_ns;
      auto lanes = lanes_for(w.geo_addr);
      for (auto l : lanes)
        if (busy_until_[l] > start) start = busy_until_[l];
      for (auto l : lanes) busy_until_[l] = start + link_.serialization_ns();
      auto c = deliver(w, start);
      out.insert(out.end(), c.begin(), c.end());
    }
    return out;
  }

  /// Shared trigger lane: every installed card starts at `t_ns` with its coherence clock at zero.
  std::vector<std::uint8_t> send_trigger(const Rational& t_ns) {
    auto s = slots();
    for (auto slot : s) {
      auto& c = *cards_[slot];
      c.clock.reset();
      c.triggers += 1;
      c.last_trigger_ns = t_ns;
    }
    return s;
  }

  void reset_links() { busy_until_.fill(Rational{}); }

 private:
  Commit write(std::uint8_t slot, const WireWord& w, const Rational& t) {
    auto& c = *cards_[slot];
    c.memory[(static_cast<std::uint32_t>(w.bank) << 16) | w.mem_addr] = w.payload;
    return Commit{slot, t, w};
  }

  std::vector<std::size_t> lanes_for(std::uint8_t geo) const {
    if (geo != kBroadcast) return {geo};
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < kMaxCards; ++i) all.push_back(i);
    return all;
  }

  LinkModel link_;
  std::array<std::optional<ChannelCard>, kMaxCards> cards_{};
  std::array<Rational, kMaxCards> busy_until_{};
};

}  // namespace ddsq
