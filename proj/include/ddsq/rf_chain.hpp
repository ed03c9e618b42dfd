#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/fft.hpp"
#include "ddsq/timebase.hpp"

namespace ddsq {

/// Carrier range the analog output chain passes.
struct BandLimits {
  double f_min_hz = 10e6;
  double f_max_hz = 450e6;

  void validate() const {
    if (!(f_min_hz >= 0 && f_min_hz < f_max_hz)) throw RangeError("band limits must satisfy 0 <= f_min < f_max");
  }
  bool contains(double f) const { return f >= f_min_hz && f <= f_max_hz; }
};

struct DoublerChain {
  unsigned stages = 0;
  double input_freq_hz = 0.0;

  double output_freq_hz() const { return std::ldexp(input_freq_hz, static_cast<int>(stages)); }
};

/// One doubler: square the input, then keep only |f - 2 f_in| <= half_band_hz
/// with an ideal FFT brick wall. A tone of amplitude A comes out at A^2/2;
/// `renormalize` applies a gain of 2 so a unit tone stays unit.
inline std::vector<double> double_stage(std::span<const double> x, double sample_rate_hz, double f_in_hz,
                                        double half_band_hz, bool renormalize = false) {
  if (x.empty()) return {};
  if (!(sample_rate_hz > 4.0 * f_in_hz)) throw RangeError("sample rate too low for the doubled tone");
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
  auto X = rfft(sq);
  const double df = sample_rate_hz / static_cast<double>(x.size());
  for (std::size_t k = 0; k < X.size(); ++k) {
    double f = static_cast<double>(k) * df;
    if (std::abs(f - 2.0 * f_in_hz) > half_band_hz) X[k] = 0.0;
  }
  auto y = irfft(X, x.size());
  if (renormalize)
    for (auto& v : y) v *= 2.0;
  return y;
}

/// Run a signal through `chain.stages` renormalised doublers.
inline std::vector<double> run_doubler_chain(std::span<const double> x, double sample_rate_hz,
                                             const DoublerChain& chain, double half_band_hz) {
  std::vector<double> y(x.begin(), x.end());
  double f = chain.input_freq_hz;
  for (unsigned s = 0; s < chain.stages; ++s) {
    y = double_stage(y, sample_rate_hz, f, half_band_hz, true);
    f *= 2.0;
  }
  return y;
}

enum class Sideband : std::uint8_t { upper, lower };

struct SsbConfig {
  double lo_freq_hz = 3.2e9;
  double amp_imbalance = 0.0;    // I path gain is (1 + eps) times Q
  double phase_error_rad = 0.0;  // LO quadrature error from -90 degrees
  Sideband sideband = Sideband::upper;

  void validate() const {
    if (!(lo_freq_hz > 0)) throw RangeError("LO frequency must be positive");
    if (!(std::abs(amp_imbalance) < 0.5)) throw RangeError("|amplitude imbalance| must be < 0.5");
    if (!(std::abs(phase_error_rad) < std::numbers::pi / 4)) throw RangeError("|phase error| must be < pi/4");
  }

  double desired_freq_hz(double f_m) const { return sideband == Sideband::upper ? lo_freq_hz + f_m : lo_freq_hz - f_m; }
  double image_freq_hz(double f_m) const { return sideband == Sideband::upper ? lo_freq_hz - f_m : lo_freq_hz + f_m; }
};

/// Hartley mixer: I cos(w_LO t) -/+ Q sin(w_LO t + phase_error), with the I
/// path scaled by (1 + eps). Minus selects the upper sideband.
inline std::vector<double> ssb_mix(std::span<const double> i_stream, std::span<const double> q_stream,
                                   double sample_rate_hz, const SsbConfig& cfg) {
  cfg.validate();
  if (i_stream.size() != q_stream.size()) throw RangeError("I and Q streams differ in length");
  const double w = 2.0 * std::numbers::pi * cfg.lo_freq_hz / sample_rate_hz;
  const double sign = cfg.sideband == Sideband::upper ? -1.0 : 1.0;
  std::vector<double> out(i_stream.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    double ph = w * static_cast<double>(n);
    out[n] = (1.0 + cfg.amp_imbalance) * i_stream[n] * std::cos(ph) +
             sign * q_stream[n] * std::sin(ph + cfg.phase_error_rad);
  }
  return out;
}

/// Image-to-desired power ratio of the mixer fed with I = a_i cos(w t),
/// Q = a_q sin(w t + theta). Exact for the model above.
inline double image_rejection_db(double eps, double phi, double a_i = 1.0, double a_q = 1.0, double theta = 0.0) {
  const double A = (1.0 + eps) * a_i;
  const double B = a_q;
  const double d = phi - theta;
  const double s = phi + theta;
  double img = A * A + B * B - 2.0 * A * B * std::cos(d);
  double des = A * A + B * B + 2.0 * A * B * std::cos(s);
  return 10.0 * std::log10(std::max(img, des * 1e-30) / des);  // floor at -300 dB
}

/// Quadrature test tones for an SSB measurement, sampled at `fs`.
struct QuadratureTones {
  std::vector<double> i;
  std::vector<double> q;
};

inline QuadratureTones quadrature_tones(double f_m, double sample_rate_hz, std::size_t n, double a_i = 1.0,
                                        double a_q = 1.0, double theta = 0.0) {
  QuadratureTones t{std::vector<double>(n), std::vector<double>(n)};
  const double w = 2.0 * std::numbers::pi * f_m / sample_rate_hz;
  for (std::size_t k = 0; k < n; ++k) {
    t.i[k] = a_i * std::cos(w * static_cast<double>(k));
    t.q[k] = a_q * std::sin(w * static_cast<double>(k) + theta);
  }
  return t;
}

/// Image rejection measured from the spectrum of the mixed waveform. All
/// tones must fall on FFT bins of an `n`-point record.
inline double measure_image_rejection_db(const SsbConfig& cfg, double f_m, double sample_rate_hz, std::size_t n,
                                         double a_i = 1.0, double a_q = 1.0, double theta = 0.0) {
  auto tones = quadrature_tones(f_m, sample_rate_hz, n, a_i, a_q, theta);
  auto y = ssb_mix(tones.i, tones.q, sample_rate_hz, cfg);
  auto p = power_spectrum(y);
  const double df = sample_rate_hz / static_cast<double>(n);
  auto bin = [&](double f) {
    double k = f / df;
    if (std::abs(k - std::round(k)) > 1e-9 || k < 0 || k >= static_cast<double>(p.size()))
      throw RangeError("tone does not fall on an FFT bin");
    return static_cast<std::size_t>(std::llround(k));
  };
  double des = p[bin(cfg.desired_freq_hz(f_m))];
  double img = p[bin(cfg.image_freq_hz(f_m))];
  const double floor = des * 1e-30;
  return 10.0 * std::log10(std::max(img, floor) / des);
}

/// Digital trims on the Q channel: asf offset and pow offset, in LSBs.
struct Trim {
  std::int32_t asf = 0;
  std::int32_t pow = 0;

  friend bool operator==(const Trim&, const Trim&) = default;
};

struct TuneOptions {
  double target_dbc = -60.0;
  unsigned max_evaluations = 200;
  std::int32_t initial_step = 64;
};

struct TuneResult {
  Trim trim;
  double image_dbc = 0.0;
  unsigned evaluations = 0;
  bool converged = false;
};

/// Pattern search over the integer (asf, pow) trim lattice. A successful
/// move doubles that coordinate's step; a failed pair of probes halves it.
/// `measure(Trim)` returns the image level in dBc.
template <class Measure>
TuneResult search_trim(Measure&& measure, const TuneOptions& opt = {}, Trim start = {}) {
  TuneResult r;
  r.trim = start;
  r.image_dbc = measure(start);
  r.evaluations = 1;
  std::int32_t step[2] = {opt.initial_step, opt.initial_step};
  auto done = [&] { return r.image_dbc <= opt.target_dbc; };
  while (!done() && r.evaluations < opt.max_evaluations && (step[0] > 0 || step[1] > 0)) {
    for (int c = 0; c < 2 && !done(); ++c) {
      if (step[c] == 0) continue;
      bool moved = false;
      for (int dir : {+1, -1}) {
        if (r.evaluations >= opt.max_evaluations) break;
        Trim t = r.trim;
        (c == 0 ? t.asf : t.pow) += dir * step[c];
        double v = measure(t);
        ++r.evaluations;
        if (v < r.image_dbc) {
          r.trim = t;
          r.image_dbc = v;
          moved = true;
          break;
        }
      }
      step[c] = moved ? std::min(step[c] * 2, std::int32_t{1} << 20) : step[c] / 2;
    }
  }
  r.converged = done();
  return r;
}

/// Forward model of a DDS-driven Hartley mixer: I and Q channels at the
/// nominal asf, Q trimmed by `t`, analog imbalance from `cfg`.
struct DdsQuadraturePair {
  std::uint16_t nominal_asf = 14745;  // 0.9 of full scale leaves trim headroom

  double image_dbc(const SsbConfig& cfg, Trim t) const {
    double a_i = amplitude_from_asf(nominal_asf);
    std::int64_t q = static_cast<std::int64_t>(nominal_asf) + t.asf;
    if (q < 0) q = 0;
    if (q > kAsfMax) q = kAsfMax;
    double a_q = amplitude_from_asf(static_cast<std::uint16_t>(q));
    auto pw = static_cast<std::uint16_t>(static_cast<std::uint32_t>(t.pow) & 0xFFFF);
    return image_rejection_db(cfg.amp_imbalance, cfg.phase_error_rad, a_i, a_q, phase_from_pow(pw));
  }
};

inline TuneResult tune_imbalance(const SsbConfig& cfg, const DdsQuadraturePair& pair = {},
                                 const TuneOptions& opt = {}) {
  cfg.validate();
  return search_trim([&](Trim t) { return pair.image_dbc(cfg, t); }, opt);
}

}  // namespace ddsq
