#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ddsq/timebase.hpp"

namespace ddsq {

/// Largest magnitude of a 14-bit signed DAC sample.
inline constexpr std::int16_t kDacFullScale = 8191;

struct NcoState {
  std::uint32_t accumulator = 0;
  TuningWordSet words{};
  std::uint64_t elapsed_cycles = 0;
};

/// Phase presented to the sine stage: accumulator plus the POW in the top 16 bits.
inline std::uint32_t output_phase(const NcoState& s) {
  return s.accumulator + (static_cast<std::uint32_t>(s.words.pow) << 16);
}

/// Unquantised output for the current cycle.
inline double ideal_sample(const NcoState& s) {
  double angle = 2.0 * std::numbers::pi * static_cast<double>(output_phase(s)) / 4294967296.0;
  return amplitude_from_asf(s.words.asf) * std::sin(angle);
}

inline std::int16_t quantize_sample(double x) {
  return static_cast<std::int16_t>(std::lround(x * kDacFullScale));
}

inline double level_to_amplitude(std::int16_t level) {
  return static_cast<double>(level) / kDacFullScale;
}

/// Advance the accumulator by `n` cycles without producing samples.
inline void fast_forward(NcoState& s, std::uint64_t n) {
  // ftw * n mod 2^64 keeps the low 32 bits intact.
  s.accumulator += static_cast<std::uint32_t>(static_cast<std::uint64_t>(s.words.ftw) * n);
  s.elapsed_cycles += n;
}

/// Produce `n` quantised samples, stepping the accumulator once per cycle.
inline std::vector<std::int16_t> step_nco(NcoState& s, std::uint64_t n) {
  std::vector<std::int16_t> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back(quantize_sample(ideal_sample(s)));
    s.accumulator += s.words.ftw;
  }
  s.elapsed_cycles += n;
  return out;
}

/// Same stepping as step_nco() but returns the samples before quantisation.
inline std::vector<double> step_nco_ideal(NcoState& s, std::uint64_t n) {
  std::vector<double> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back(ideal_sample(s));
    s.accumulator += s.words.ftw;
  }
  s.elapsed_cycles += n;
  return out;
}

}  // namespace ddsq
