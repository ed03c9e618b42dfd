#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/fft.hpp"

namespace ddsq {

/// Single-sideband phase noise L(f) in dBc/Hz at ascending offsets.
struct SpectralDensity {
  std::vector<double> offsets_hz;
  std::vector<double> levels_dbc_hz;
  double carrier_hz = 0.0;
  double bin_width_hz = 0.0;  // set by the estimator; 0 for tabulated profiles

  void validate() const {
    if (offsets_hz.size() != levels_dbc_hz.size()) throw RangeError("offset and level columns differ in length");
    if (!(carrier_hz > 0)) throw RangeError("carrier frequency must be positive");
    for (std::size_t i = 0; i < offsets_hz.size(); ++i) {
      if (!(offsets_hz[i] > 0) || !std::isfinite(offsets_hz[i])) throw RangeError("offsets must be positive");
      if (i > 0 && !(offsets_hz[i] > offsets_hz[i - 1])) throw RangeError("offsets must be strictly ascending");
      if (!std::isfinite(levels_dbc_hz[i])) throw RangeError("levels must be finite");
    }
  }

  std::size_t size() const { return offsets_hz.size(); }
};

struct PsdConfig {
  std::size_t segment = 4096;
  double overlap = 0.5;
};

inline constexpr std::size_t kMinPsdSamples = 4096;

/// Welch estimate of L(f) from a phase record in radians: Hann-windowed
/// segments, averaged periodograms, L = S_phi / 2 with S_phi one-sided.
/// DC and Nyquist bins are dropped.
inline SpectralDensity estimate_psd(std::span<const double> phase_rad, double sample_rate_hz, double carrier_hz,
                                    const PsdConfig& cfg = {}) {
  if (phase_rad.size() < kMinPsdSamples)
    throw RangeError("PSD estimate needs at least " + std::to_string(kMinPsdSamples) + " samples");
  if (!(sample_rate_hz > 0)) throw RangeError("sample rate must be positive");
  std::size_t m = std::min(cfg.segment, phase_rad.size());
  if (m < 16) throw RangeError("PSD segment too short");
  auto hop = static_cast<std::size_t>(std::max(1.0, std::floor(static_cast<double>(m) * (1.0 - cfg.overlap))));

  std::vector<double> w(m);
  double w2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double s = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(m));
    w[i] = s * s;  // periodic Hann
    w2 += w[i] * w[i];
  }

  std::vector<double> acc(m / 2 + 1, 0.0);
  std::size_t segments = 0;
  std::vector<double> seg(m);
  for (std::size_t start = 0; start + m <= phase_rad.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += phase_rad[start + i];
    mean /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) seg[i] = (phase_rad[start + i] - mean) * w[i];
    auto p = power_spectrum(seg);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
    ++segments;
  }

  SpectralDensity sd;
  sd.carrier_hz = carrier_hz;
  sd.bin_width_hz = sample_rate_hz / static_cast<double>(m);
  const double norm = 1.0 / (sample_rate_hz * w2 * static_cast<double>(segments));
  for (std::size_t k = 1; k < m / 2; ++k) {
    double l = acc[k] * norm;  // (2 |X|^2 / (fs sum w^2)) / 2
    sd.offsets_hz.push_back(static_cast<double>(k) * sd.bin_width_hz);
    sd.levels_dbc_hz.push_back(10.0 * std::log10(std::max(l, 1e-300)));
  }
  return sd;
}

/// Instantaneous phase deviation of a real waveform around `carrier_hz`,
/// via the analytic signal. A linear trend is removed.
inline std::vector<double> phase_from_waveform(std::span<const double> x, double sample_rate_hz, double carrier_hz) {
  const std::size_t n = x.size();
  if (n < 2) throw RangeError("waveform too short");
  std::vector<cplx> c(x.begin(), x.end());
  auto X = cfft(c);
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n) X[k] *= 2.0;
    else if (2 * k > n) X[k] = 0.0;
  }
  auto a = cfft(X, true);
  std::vector<double> ph(n);
  const double w = 2.0 * std::numbers::pi * carrier_hz / sample_rate_hz;
  double prev = 0.0, unwrap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = std::arg(a[i] * std::polar(1.0, -w * static_cast<double>(i)));
    if (i > 0) {
      double d = v - prev;
      if (d > std::numbers::pi) unwrap -= 2.0 * std::numbers::pi;
      else if (d < -std::numbers::pi) unwrap += 2.0 * std::numbers::pi;
    }
    prev = v;
    ph[i] = v + unwrap;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto t = static_cast<double>(i);
    sx += t;
    sy += ph[i];
    sxx += t * t;
    sxy += t * ph[i];
  }
  auto dn = static_cast<double>(n);
  double slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  double icpt = (sy - slope * sx) / dn;
  for (std::size_t i = 0; i < n; ++i) ph[i] -= icpt + slope * static_cast<double>(i);
  return ph;
}

/// Integrated power (dBc) of an estimated PSD between two offsets.
inline double band_power_dbc(const SpectralDensity& sd, double f_lo, double f_hi) {
  if (!(sd.bin_width_hz > 0)) throw RangeError("band power needs an estimated (binned) spectrum");
  double p = 0.0;
  for (std::size_t i = 0; i < sd.size(); ++i)
    if (sd.offsets_hz[i] >= f_lo && sd.offsets_hz[i] <= f_hi) p += std::pow(10.0, sd.levels_dbc_hz[i] / 10.0);
  return 10.0 * std::log10(p * sd.bin_width_hz);
}

/// Rescale to another carrier: phase noise grows as 20 log10 of the ratio.
inline SpectralDensity normalize_carrier(const SpectralDensity& sd, double new_carrier_hz) {
  if (!(new_carrier_hz > 0)) throw RangeError("carrier frequency must be positive");
  SpectralDensity out = sd;
  const double shift = 20.0 * std::log10(new_carrier_hz / sd.carrier_hz);
  for (auto& l : out.levels_dbc_hz) l += shift;
  out.carrier_hz = new_carrier_hz;
  return out;
}

namespace detail {

// L in dBc/Hz at f, log-linear between tabulated points.
inline double level_at(const SpectralDensity& sd, std::size_t seg, double f) {
  double f1 = sd.offsets_hz[seg], f2 = sd.offsets_hz[seg + 1];
  double l1 = sd.levels_dbc_hz[seg], l2 = sd.levels_dbc_hz[seg + 1];
  return l1 + (l2 - l1) * std::log10(f / f1) / std::log10(f2 / f1);
}

// Exact integral of S(f) = S_a (f / a)^alpha over [a, b].
inline double power_law_integral(double a, double b, double s_a, double alpha) {
  if (std::abs(alpha + 1.0) < 1e-12) return s_a * a * std::log(b / a);
  return s_a * a / (alpha + 1.0) * (std::pow(b / a, alpha + 1.0) - 1.0);
}

}  // namespace detail

/// Integral of 10^(L/10) over [f_lo, f_hi] in rad^2/Hz * Hz, each tabulated
/// segment treated as a power law.
inline double integrate_phase_power(const SpectralDensity& sd, double f_lo, double f_hi) {
  sd.validate();
  if (sd.size() < 2) throw RangeError("need at least two points to integrate");
  if (!(f_hi >= f_lo)) throw RangeError("empty band: f_hi < f_lo");
  if (f_lo < sd.offsets_hz.front() || f_hi > sd.offsets_hz.back())
    throw RangeError("band outside the tabulated offsets");
  if (f_hi == f_lo) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < sd.size(); ++i) {
    double a = std::max(f_lo, sd.offsets_hz[i]);
    double b = std::min(f_hi, sd.offsets_hz[i + 1]);
    if (b <= a) continue;
    double la = detail::level_at(sd, i, a);
    double lb = detail::level_at(sd, i, b);
    double alpha = (lb - la) / (10.0 * std::log10(b / a));
    total += detail::power_law_integral(a, b, std::pow(10.0, la / 10.0), alpha);
  }
  return total;
}

/// RMS jitter in seconds over [f_lo, f_hi]: sqrt(2 * integral L) / (2 pi f_c).
inline double integrate_jitter(const SpectralDensity& sd, double f_lo, double f_hi) {
  return std::sqrt(2.0 * integrate_phase_power(sd, f_lo, f_hi)) / (2.0 * std::numbers::pi * sd.carrier_hz);
}

struct JitterComponent {
  std::string name;
  double rms_fs = 0.0;
};

struct JitterBudget {
  std::vector<JitterComponent> components;
  double combined_rms_fs = 0.0;

  /// True when an observed jitter is explained by (does not exceed) the budget.
  bool bounds(double observed_fs) const { return observed_fs <= combined_rms_fs; }
};

inline JitterBudget combine_jitter(std::vector<JitterComponent> components) {
  double s = 0.0;
  for (const auto& c : components) {
    if (!(c.rms_fs >= 0)) throw RangeError("jitter component '" + c.name + "' is negative");
    s += c.rms_fs * c.rms_fs;
  }
  return {std::move(components), std::sqrt(s)};
}

/// Output noise density of the VGA vs its control voltage, as a configured
/// piecewise-linear curve plus a constant source-noise offset.
struct VgaNoiseModel {
  std::vector<std::pair<double, double>> knots;  // (volts, dBm/Hz), ascending volts
  double offset_db = 0.0;

  /// Illustrative curve rising with gain; configuration, not a datasheet fit.
  static VgaNoiseModel illustrative() {
    return {{{0.0, -162.0}, {0.2, -161.0}, {0.4, -159.0}, {0.6, -156.0}, {0.8, -152.5}, {1.0, -149.0},
             {1.2, -146.0}, {1.4, -143.5}},
            0.0};
  }
};

inline double vga_noise_floor(double v_gain, const VgaNoiseModel& m) {
  if (m.knots.size() < 2) throw RangeError("VGA noise curve needs at least two knots");
  if (!(v_gain >= m.knots.front().first && v_gain <= m.knots.back().first))
    throw RangeError("control voltage outside the noise curve");
  for (std::size_t i = 0; i + 1 < m.knots.size(); ++i) {
    auto [v1, n1] = m.knots[i];
    auto [v2, n2] = m.knots[i + 1];
    if (!(v2 > v1)) throw RangeError("VGA noise knots must ascend in voltage");
    if (v_gain <= v2) {
      if (v_gain == v1) return n1 + m.offset_db;
      if (v_gain == v2) return n2 + m.offset_db;
      return n1 + (n2 - n1) * (v_gain - v1) / (v2 - v1) + m.offset_db;
    }
  }
  return m.knots.back().second + m.offset_db;
}

/// Band-limited phase noise for synthetic traces: white Gaussian noise of
/// standard deviation `sigma_rad` through `order` one-pole low-pass stages.
inline std::vector<double> synth_phase_noise(std::size_t n, double sigma_rad, double corner_hz,
                                             double sample_rate_hz, std::uint64_t seed, unsigned order = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma_rad);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * corner_hz / sample_rate_hz);
  for (unsigned s = 0; s < order; ++s) {
    double y = 0.0;
    for (auto& v : x) {
      y += a * (v - y);
      v = y;
    }
  }
  return x;
}

// CSV form: a carrier line, a column header, then one row per offset.
//
//   # carrier_hz=1000000000
//   offset_hz,level_dbc_hz
//   10,-150

inline void write_psd_csv(std::ostream& os, const SpectralDensity& sd) {
  std::ostringstream c;
  c.precision(17);
  c << sd.carrier_hz;
  os << "# carrier_hz=" << c.str() << "\n";
  os << "offset_hz,level_dbc_hz\n";
  char buf[96];
  for (std::size_t i = 0; i < sd.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.6f\n", sd.offsets_hz[i], sd.levels_dbc_hz[i]);
    os << buf;
  }
}

inline SpectralDensity read_psd_csv(std::istream& is) {
  SpectralDensity sd;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  auto parse = [&](const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw ParseError(lineno, 1, "not a number: '" + s + "'");
    return v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto p = line.find("carrier_hz=");
      if (p != std::string::npos) sd.carrier_hz = parse(line.substr(p + 11));
      continue;
    }
    if (!header) {
      if (line != "offset_hz,level_dbc_hz") throw ParseError(lineno, 1, "expected header 'offset_hz,level_dbc_hz'");
      header = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(lineno, 1, "expected two columns");
    sd.offsets_hz.push_back(parse(line.substr(0, comma)));
    sd.levels_dbc_hz.push_back(parse(line.substr(comma + 1)));
  }
  if (!header) throw ParseError(lineno, 1, "missing PSD header");
  if (!(sd.carrier_hz > 0)) throw ParseError(1, 1, "missing '# carrier_hz=' line");
  sd.validate();
  return sd;
}

inline SpectralDensity read_psd_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return read_psd_csv(f);
}

}  // namespace ddsq
