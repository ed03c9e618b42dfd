#pragma once

#include <cstdint>

namespace ddsq {

/// Phase word that makes an edge at `total_cycles` after the trigger line up
/// with an oscillator that has been running at `ftw` since the trigger.
///
/// The 32-bit product is truncated to its top 16 bits, so the realised phase
/// may lag the free-running reference by less than one POW LSB.
constexpr std::uint16_t coherent_pow(std::uint32_t ftw, std::uint64_t total_cycles,
                                     std::uint16_t user_pow) {
  auto turns = static_cast<std::uint32_t>(static_cast<std::uint64_t>(ftw) * total_cycles);
  return static_cast<std::uint16_t>((turns >> 16) + user_pow);
}

/// Full 32-bit reference phase of a free-running NCO; coherent_pow() is its top half.
constexpr std::uint32_t reference_phase(std::uint32_t ftw, std::uint64_t total_cycles) {
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(ftw) * total_cycles);
}

/// Sysclk cycles since the most recent global trigger.
class CoherenceClock {
 public:
  std::uint64_t total_cycles() const noexcept { return total_cycles_; }

  void reset() noexcept { total_cycles_ = 0; }

  void advance(std::uint64_t cycles) noexcept { total_cycles_ += cycles; }

  /// Move to an absolute cycle count; the clock never runs backwards.
  void advance_to(std::uint64_t cycles) noexcept {
    if (cycles > total_cycles_) total_cycles_ = cycles;
  }

 private:
  std::uint64_t total_cycles_ = 0;
};

}  // namespace ddsq
