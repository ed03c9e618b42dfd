#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "ddsq/error.hpp"

namespace ddsq {

inline constexpr unsigned kFtwBits = 32;
inline constexpr unsigned kPowBits = 16;
inline constexpr unsigned kAsfBits = 14;
inline constexpr std::uint32_t kAsfMax = (1u << kAsfBits) - 1;  // 16383

/// Global clocking of the instrument. All channel cards share one system clock.
struct Timebase {
  std::uint64_t sysclk_hz = 1'000'000'000;
  std::uint32_t sync_divider = 16;
  std::uint32_t event_grain_ns = 8;
  std::uint32_t spi_update_ns = 1400;

  void validate() const {
    if (sysclk_hz == 0) throw RangeError("timebase: sysclk must be positive");
    if (sync_divider == 0) throw RangeError("timebase: sync divider must be >= 1");
    if (event_grain_ns == 0) throw RangeError("timebase: event grain must be >= 1 ns");
    if ((static_cast<unsigned __int128>(event_grain_ns) * sysclk_hz) % 1'000'000'000u != 0)
      throw RangeError("timebase: event grain is not a whole number of sysclk cycles");
  }

  /// Sysclk cycles per event grain (8 at 1 GHz).
  std::uint64_t grain_cycles() const {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(event_grain_ns) * sysclk_hz /
                                      1'000'000'000u);
  }

  /// Sysclk cycles elapsed in `ns` nanoseconds; `ns` must lie on the event grain.
  std::uint64_t cycles_from_ns(std::uint64_t ns) const {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(ns) * sysclk_hz / 1'000'000'000u);
  }

  double sync_clk_hz() const { return static_cast<double>(sysclk_hz) / sync_divider; }
  double nyquist_hz() const { return static_cast<double>(sysclk_hz) / 2.0; }
};

/// The three control words of one DDS channel.
struct TuningWordSet {
  std::uint32_t ftw = 0;
  std::uint16_t pow = 0;
  std::uint16_t asf = 0;  // 14 significant bits

  void validate() const {
    if (asf > kAsfMax) throw RangeError("asf exceeds 14 bits: " + std::to_string(asf));
  }

  friend bool operator==(const TuningWordSet&, const TuningWordSet&) = default;
};

namespace detail {

// round(q / den) for q >= 0 given as a double, ties away from zero, exactly.
inline std::uint64_t round_div_exact(double q, std::uint64_t den) {
  int exp = 0;
  double mant = std::frexp(q, &exp);  // q = mant * 2^exp, mant in [0.5, 1)
  auto m = static_cast<unsigned __int128>(std::ldexp(mant, 53));
  int shift = exp - 53;  // q = m * 2^shift
  unsigned __int128 n = m;
  unsigned __int128 d = den;
  if (shift >= 0) {
    n <<= shift;
  } else if (-shift <= 64) {
    d <<= -shift;
  } else {
    return 0;  // q < 2^-11, far below one half of any integer denominator
  }
  unsigned __int128 r = (2 * n + d) / (2 * d);
  return static_cast<std::uint64_t>(r);
}

}  // namespace detail

/// Frequency tuning word for `f_out` Hz: round(f * 2^32 / sysclk), ties away from zero.
inline std::uint32_t ftw_from_freq(double f_out, const Timebase& tb = {}) {
  if (!std::isfinite(f_out) || f_out < 0.0 || f_out > tb.nyquist_hz())
    throw RangeError("frequency out of range [0, Nyquist]: " + std::to_string(f_out));
  if (f_out == 0.0) return 0;
  // f * 2^32 is exact in binary floating point; the division is done in integers.
  return static_cast<std::uint32_t>(detail::round_div_exact(std::ldexp(f_out, kFtwBits), tb.sysclk_hz));
}

/// Output frequency actually produced by a tuning word.
inline double realized_freq(std::uint32_t ftw, const Timebase& tb = {}) {
  return static_cast<double>(ftw) * static_cast<double>(tb.sysclk_hz) / 4294967296.0;
}

/// Frequency resolution (one FTW LSB) in Hz.
inline double ftw_resolution_hz(const Timebase& tb = {}) { return realized_freq(1, tb); }

inline constexpr double kPowStepRad = 2.0 * std::numbers::pi / 65536.0;

/// Phase offset word for `phi` radians, wrapped into one turn.
inline std::uint16_t pow_from_phase(double phi) {
  if (!std::isfinite(phi)) throw RangeError("phase must be finite");
  double turns = phi / (2.0 * std::numbers::pi);
  double frac = turns - std::floor(turns);
  auto q = static_cast<std::int64_t>(std::llround(frac * 65536.0));
  return static_cast<std::uint16_t>(q & 0xFFFF);
}

inline double phase_from_pow(std::uint16_t pow) { return pow * kPowStepRad; }

/// Relative amplitude of one ASF step.
inline constexpr double kAsfStep = 1.0 / kAsfMax;

inline std::uint16_t asf_from_amplitude(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw RangeError("amplitude out of range [0, 1]: " + std::to_string(a));
  return static_cast<std::uint16_t>(std::llround(a * kAsfMax));
}

inline double amplitude_from_asf(std::uint16_t asf) { return static_cast<double>(asf) / kAsfMax; }

}  // namespace ddsq
