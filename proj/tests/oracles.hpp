#pragma once

// Reference implementations used only by the tests. Each one recomputes a
// quantity the slow, obvious way so the library's fast path can be checked
// against something that shares none of its code.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double kPi = std::numbers::pi;

// FTW for an integer frequency: round(f * 2^32 / clk), ties away from zero,
// entirely in integer arithmetic.
inline std::uint32_t ftw_integer_hz(std::uint64_t f_hz, std::uint64_t clk_hz) {
  unsigned __int128 num = static_cast<unsigned __int128>(f_hz) << 32;
  unsigned __int128 q = num / clk_hz;
  unsigned __int128 r = num % clk_hz;
  if (2 * r >= clk_hz) ++q;
  return static_cast<std::uint32_t>(q);
}

// Free-running accumulator stepped once per cycle.
inline std::uint32_t brute_accumulator(std::uint32_t ftw, std::uint64_t cycles, std::uint32_t start = 0) {
  std::uint32_t acc = start;
  for (std::uint64_t i = 0; i < cycles; ++i) acc += ftw;
  return acc;
}

// DTFT magnitude squared of a real sequence at normalized frequency nu (cycles/sample).
inline double dtft_power(const std::vector<double>& x, double nu) {
  std::complex<double> s = 0;
  for (std::size_t n = 0; n < x.size(); ++n) s += x[n] * std::polar(1.0, -2.0 * kPi * nu * static_cast<double>(n));
  return std::norm(s);
}

// First sidelobe of a pulse envelope, relative to the mainlobe, found by a
// dense DTFT scan: walk down to the first null, then up to the next maximum.
inline double dtft_first_sidelobe_db(const std::vector<double>& env, double step_nu, double max_nu) {
  double p0 = dtft_power(env, 0.0);
  double prev = p0;
  double nu = step_nu;
  while (nu < max_nu) {
    double p = dtft_power(env, nu);
    if (p > prev) break;
    prev = p;
    nu += step_nu;
  }
  double best = prev;
  while (nu < max_nu) {
    double p = dtft_power(env, nu);
    if (p < best) break;
    best = p;
    nu += step_nu;
  }
  return 10.0 * std::log10(best / p0);
}

// Single-bin DFT power (Goertzel would do, a direct sum is clearer).
inline double bin_power(const std::vector<double>& x, std::size_t k) {
  std::complex<double> s = 0;
  double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k) * static_cast<double>(i) / n);
  return std::norm(s);
}

// Image rejection of a Hartley mixer measured by direct synthesis: the I path
// carries gain (1+eps), the Q path a phase error phi on the LO.
inline double synth_image_rejection_db(double eps, double phi, double lo_hz, double fm_hz, double fs, std::size_t n,
                                       bool upper) {
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / fs;
    double wi = 2 * kPi * fm_hz * t;
    double wl = 2 * kPi * lo_hz * t;
    double iv = std::cos(wi), qv = std::sin(wi);
    double q_term = qv * std::sin(wl + phi);
    y[i] = (1 + eps) * iv * std::cos(wl) + (upper ? -q_term : q_term);
  }
  auto kd = static_cast<std::size_t>(std::llround((upper ? lo_hz + fm_hz : lo_hz - fm_hz) * static_cast<double>(n) / fs));
  auto ki = static_cast<std::size_t>(std::llround((upper ? lo_hz - fm_hz : lo_hz + fm_hz) * static_cast<double>(n) / fs));
  return 10.0 * std::log10(bin_power(y, ki) / bin_power(y, kd));
}

// RMS jitter of a piecewise profile by fine trapezoid integration on a log grid.
template <class L>
double numeric_jitter_fs(L level_dbc_hz, double f_lo, double f_hi, double carrier_hz, int points = 200000) {
  double a = std::log(f_lo), b = std::log(f_hi);
  double h = (b - a) / points;
  double sum = 0;
  for (int i = 0; i <= points; ++i) {
    double u = a + h * i;
    double f = std::exp(u);
    double v = std::pow(10.0, level_dbc_hz(f) / 10.0) * f;  // df = f du
    sum += (i == 0 || i == points) ? v / 2 : v;
  }
  double integral = sum * h;
  return std::sqrt(2.0 * integral) / (2 * kPi * carrier_hz) * 1e15;
}

// Poisson CDF P(X <= k) by direct summation.
inline double poisson_cdf(unsigned k, double mean) {
  double term = std::exp(-mean), sum = term;
  for (unsigned i = 1; i <= k; ++i) {
    term *= mean / i;
    sum += term;
  }
  return sum;
}

}  // namespace oracle
