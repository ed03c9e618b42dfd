#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/program.hpp"

namespace ddsq {

/// Rising half of a window, x in [0, 1] mapping 0 -> 1.
inline double rise_value(ShapeKind kind, double x) {
  if (x <= 0.0) return kind == ShapeKind::rectangular ? 1.0 : 0.0;
  if (x >= 1.0) return 1.0;
  switch (kind) {
    case ShapeKind::rectangular: return 1.0;
    case ShapeKind::hann: {
      double s = std::sin(0.5 * std::numbers::pi * x);
      return s * s;
    }
    case ShapeKind::blackman:
      return 0.42 - 0.5 * std::cos(std::numbers::pi * x) + 0.08 * std::cos(2.0 * std::numbers::pi * x);
  }
  return 1.0;
}

struct EnvelopeSpec {
  ShapeKind shape = ShapeKind::hann;
  std::uint32_t rise_samples = 0;
  std::uint32_t plateau_samples = 0;
  double sample_rate_hz = 62.5e6;

  std::uint32_t total_samples() const { return 2 * rise_samples + plateau_samples; }

  void validate(std::uint32_t grain_ns = 8) const {
    if (!(sample_rate_hz > 0)) throw RangeError("envelope sample rate must be positive");
    double ns = total_samples() * 1e9 / sample_rate_hz;
    double grains = ns / grain_ns;
    if (std::abs(grains - std::round(grains)) > 1e-9)
      throw RangeError("envelope duration does not fall on the event grain");
  }
};

/// Envelope samples: rise, plateau of ones, then the time-reversed rise.
/// Rise sample k sits at t = k/rate, so the rise starts at 0 and reaches 1 at
/// t = rise_samples/rate, the first plateau sample. With one plateau sample a
/// hann envelope is exactly the symmetric hann window of odd length.
inline std::vector<double> envelope_samples(const EnvelopeSpec& spec) {
  spec.validate();
  std::vector<double> out;
  out.reserve(spec.total_samples());
  std::vector<double> rise(spec.rise_samples);
  for (std::uint32_t k = 0; k < spec.rise_samples; ++k) {
    double x = static_cast<double>(k) / spec.rise_samples;
    rise[k] = rise_value(spec.shape, x);
  }
  out.insert(out.end(), rise.begin(), rise.end());
  out.insert(out.end(), spec.plateau_samples, 1.0);
  out.insert(out.end(), rise.rbegin(), rise.rend());
  return out;
}

/// Envelope of a pulse of length `len` with rise/fall time `rise` at time `t`
/// after the edge (all in the same unit).
inline double envelope_at(ShapeKind kind, double t, double rise, double len) {
  if (t < 0.0 || t >= len) return 0.0;
  if (kind == ShapeKind::rectangular || rise <= 0.0) return 1.0;
  if (t < rise) return rise_value(kind, t / rise);
  if (t > len - rise) return rise_value(kind, (len - t) / rise);
  return 1.0;
}

/// dB-linear variable-gain amplifier driven by the shaping DAC.
/// Defaults are configuration, not a datasheet fit.
struct VgaModel {
  double slope_db_per_volt = 50.0;
  double v_ref = 1.4;  // 0 dB relative gain
  double v_min = 0.0;
  double v_max = 1.4;
  double min_gain_db = -70.0;
  double control_bandwidth_hz = 3e6;
  unsigned dac_bits = 14;
  double dac_rate_hz = 62.5e6;

  void validate() const {
    if (!(slope_db_per_volt > 0)) throw RangeError("VGA slope must be positive");
    if (!(min_gain_db <= -30.0)) throw RangeError("VGA floor must reach at least -30 dB");
    if (!(v_max > v_min)) throw RangeError("VGA control range is empty");
    if (dac_bits == 0 || dac_bits > 24) throw RangeError("VGA DAC width out of range");
  }

  std::uint32_t dac_max_code() const { return (1u << dac_bits) - 1; }
  double control_lsb_v() const { return (v_max - v_min) / dac_max_code(); }
  double time_constant_s() const { return 1.0 / (2.0 * std::numbers::pi * control_bandwidth_hz); }
};

inline double vga_gain_db(double v, const VgaModel& m) {
  double g = m.slope_db_per_volt * (v - m.v_ref);
  return g < m.min_gain_db ? m.min_gain_db : g;
}

/// Span of gain the model can sweep over its control range.
inline double shaping_range_db(const VgaModel& m) {
  return vga_gain_db(m.v_max, m) - vga_gain_db(m.v_min, m);
}

struct ControlSample {
  std::uint32_t code = 0;
  double volts = 0.0;
};

inline ControlSample quantize_control(double v, const VgaModel& m) {
  if (v < m.v_min) v = m.v_min;
  if (v > m.v_max) v = m.v_max;
  auto code = static_cast<std::uint32_t>(std::lround((v - m.v_min) / m.control_lsb_v()));
  if (code > m.dac_max_code()) code = m.dac_max_code();
  return {code, m.v_min + code * m.control_lsb_v()};
}

/// Unquantised control voltage that makes the VGA gain equal `e` (0 maps to the floor).
inline double precompensate_voltage(double e, const VgaModel& m) {
  if (!(e > 0.0)) return m.v_min;
  return m.v_ref + 20.0 * std::log10(e) / m.slope_db_per_volt;
}

/// Linearise the logarithmic VGA: envelope (0..1) -> quantised control-DAC samples.
inline std::vector<ControlSample> precompensate(std::span<const double> envelope, const VgaModel& m) {
  m.validate();
  std::vector<ControlSample> out;
  out.reserve(envelope.size());
  for (double e : envelope) out.push_back(quantize_control(precompensate_voltage(e, m), m));
  return out;
}

inline double vga_gain_linear(double v, const VgaModel& m) { return std::pow(10.0, vga_gain_db(v, m) / 20.0); }

/// Single-pole low-pass model of the VGA control input.
class OnePoleFilter {
 public:
  OnePoleFilter(double bandwidth_hz, double dt_s, double initial = 0.0)
      : alpha_(1.0 - std::exp(-2.0 * std::numbers::pi * bandwidth_hz * dt_s)), y_(initial) {}

  double step(double x) {
    y_ += alpha_ * (x - y_);
    return y_;
  }

  double value() const { return y_; }

 private:
  double alpha_;
  double y_;
};

/// Control voltage as seen by the VGA after its finite control bandwidth,
/// sampled every `dt_s` seconds with zero-order-hold input.
inline std::vector<double> apply_control_bandwidth(std::span<const double> volts, const VgaModel& m, double dt_s,
                                                   double initial) {
  OnePoleFilter f(m.control_bandwidth_hz, dt_s, initial);
  std::vector<double> out;
  out.reserve(volts.size());
  for (double v : volts) out.push_back(f.step(v));
  return out;
}

/// Time for a step response to reach `fraction` of its final value.
inline double settle_time_s(const VgaModel& m, double fraction) {
  return -m.time_constant_s() * std::log(1.0 - fraction);
}

}  // namespace ddsq
