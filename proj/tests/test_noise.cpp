#include <catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

#include "ddsq/noise.hpp"
#include "oracles.hpp"

using namespace ddsq;
using Catch::Approx;

namespace {

constexpr double kFs = 1e9;
constexpr std::size_t kN = 65536;

SpectralDensity fixture(const char* name) { return read_psd_csv(std::string(DDSQ_FIXTURE_DIR "/") + name); }

// Log-linear interpolation written out independently of the library.
auto interpolator(const SpectralDensity& sd) {
  return [&sd](double f) {
    std::size_t i = 0;
    while (i + 2 < sd.size() && f > sd.offsets_hz[i + 1]) ++i;
    double u = (std::log(f) - std::log(sd.offsets_hz[i])) / (std::log(sd.offsets_hz[i + 1]) - std::log(sd.offsets_hz[i]));
    return sd.levels_dbc_hz[i] + u * (sd.levels_dbc_hz[i + 1] - sd.levels_dbc_hz[i]);
  };
}

double variance(const std::vector<double>& x) {
  double m = 0, v = 0;
  for (double s : x) m += s;
  m /= static_cast<double>(x.size());
  for (double s : x) v += (s - m) * (s - m);
  return v / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("phase modulation sidebands read -46 dBc at beta 0.01", "[noise][psd]") {
  const double fc = 6400 * kFs / kN;   // bin-centred carrier
  const double fm = 10 * kFs / 4096;   // centred in a Welch bin
  const double beta = 0.01;
  std::vector<double> x(kN);
  for (std::size_t n = 0; n < kN; ++n) {
    double t = static_cast<double>(n) / kFs;
    x[n] = std::cos(2 * oracle::kPi * fc * t + beta * std::sin(2 * oracle::kPi * fm * t));
  }
  auto ph = phase_from_waveform(x, kFs, fc);
  auto sd = estimate_psd(ph, kFs, fc);
  double bw = sd.bin_width_hz;
  CHECK(band_power_dbc(sd, fm - 4 * bw, fm + 4 * bw) == Approx(20 * std::log10(beta / 2)).margin(0.1));
  CHECK(band_power_dbc(sd, fm - 4 * bw, fm + 4 * bw) == Approx(-46.0).margin(0.1));
}

TEST_CASE("a pure tone has no phase noise above the numerical floor", "[noise][psd]") {
  const double fc = 6400 * kFs / kN;
  std::vector<double> x(kN);
  for (std::size_t n = 0; n < kN; ++n) x[n] = std::cos(2 * oracle::kPi * fc * static_cast<double>(n) / kFs);
  auto sd = estimate_psd(phase_from_waveform(x, kFs, fc), kFs, fc);
  CHECK(*std::max_element(sd.levels_dbc_hz.begin(), sd.levels_dbc_hz.end()) < -250.0);
}

TEST_CASE("white phase noise gives a flat density at the analytic level", "[noise][psd]") {
  const double sigma = 1e-3;
  auto ph = synth_phase_noise(1 << 18, sigma, kFs, kFs, 11, 0);
  auto sd = estimate_psd(ph, kFs, 1e9);
  // one-sided S_phi = 2 sigma^2 / fs and L = S_phi / 2
  const double expected = 10 * std::log10(sigma * sigma / kFs);
  for (std::size_t start = 0; start + 64 <= sd.size(); start += 64) {
    double p = 0;
    for (std::size_t k = start; k < start + 64; ++k) p += std::pow(10.0, sd.levels_dbc_hz[k] / 10);
    REQUIRE(10 * std::log10(p / 64) == Approx(expected).margin(1.0));
  }
}

TEST_CASE("integrated density matches the time-domain variance", "[noise][psd][property]") {
  for (unsigned order : {0u, 1u, 2u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto ph = synth_phase_noise(1 << 17, 2e-3, 50e6, kFs, seed, order);
      auto sd = estimate_psd(ph, kFs, 1e9);
      double l = 0;
      for (double v : sd.levels_dbc_hz) l += std::pow(10.0, v / 10);
      double integrated = 2 * l * sd.bin_width_hz;
      REQUIRE(integrated == Approx(variance(ph)).epsilon(0.02));
    }
  }
}

TEST_CASE("synthetic noise is reproducible per seed", "[noise]") {
  CHECK(synth_phase_noise(1000, 1, 1e6, 1e9, 4) == synth_phase_noise(1000, 1, 1e6, 1e9, 4));
  CHECK(synth_phase_noise(1000, 1, 1e6, 1e9, 4) != synth_phase_noise(1000, 1, 1e6, 1e9, 5));
}

TEST_CASE("PSD estimation rejects short records", "[noise][psd]") {
  std::vector<double> x(kMinPsdSamples - 1);
  CHECK_THROWS_AS(estimate_psd(x, kFs, 1e9), RangeError);
  std::vector<double> y(kMinPsdSamples);
  CHECK_THROWS_AS(estimate_psd(y, 0, 1e9), RangeError);
}

TEST_CASE("98.6 MHz data normalised to 1 GHz rises by 20.12 dB", "[noise][normalize]") {
  auto sd = fixture("residual_98p6mhz.csv");
  CHECK(sd.carrier_hz == 98.6e6);
  auto n = normalize_carrier(sd, 1e9);
  CHECK(n.carrier_hz == 1e9);
  for (std::size_t i = 0; i < sd.size(); ++i) {
    CHECK(n.offsets_hz[i] == sd.offsets_hz[i]);
    CHECK(n.levels_dbc_hz[i] - sd.levels_dbc_hz[i] == Approx(20.12).margin(0.01));
  }
  // jitter in seconds is unchanged by the rescaling
  CHECK(integrate_jitter(n, 10, 1e8) == Approx(integrate_jitter(sd, 10, 1e8)).epsilon(1e-12));
  CHECK_THROWS_AS(normalize_carrier(sd, 0), RangeError);
}

TEST_CASE("flat -150 dBc/Hz over 10 Hz to 100 MHz at 1 GHz is 71.2 fs", "[noise][jitter]") {
  auto sd = fixture("flat_150dbc_1ghz.csv");
  double fs_rms = integrate_jitter(sd, 10, 1e8) * 1e15;
  double closed = std::sqrt(2 * 1e-15 * (1e8 - 10)) / (2 * oracle::kPi * 1e9) * 1e15;
  CHECK(fs_rms == Approx(closed).epsilon(1e-12));
  CHECK(fs_rms == Approx(71.2).margin(0.1));
  CHECK(fs_rms == Approx(oracle::numeric_jitter_fs(interpolator(sd), 10, 1e8, 1e9)).epsilon(1e-6));
}

TEST_CASE("power-law segments integrate exactly", "[noise][jitter]") {
  auto sd = fixture("modeled_clock_1ghz.csv");
  double ours = integrate_jitter(sd, 10, 1e8) * 1e15;
  CHECK(ours == Approx(oracle::numeric_jitter_fs(interpolator(sd), 10, 1e8, 1e9)).epsilon(1e-5));
  // a sub-band that starts and ends inside segments
  CHECK(integrate_jitter(sd, 37, 2.5e6) * 1e15 ==
        Approx(oracle::numeric_jitter_fs(interpolator(sd), 37, 2.5e6, 1e9)).epsilon(1e-5));
}

TEST_CASE("modelled clock profile integrates to 270 fs", "[noise][jitter]") {
  auto sd = fixture("modeled_clock_1ghz.csv");
  CHECK(integrate_jitter(sd, 10, 1e8) * 1e15 == Approx(270.0).epsilon(0.10));
}

TEST_CASE("jitter grows with bandwidth and level", "[noise][jitter][property]") {
  auto sd = fixture("modeled_clock_1ghz.csv");
  double prev = 0;
  for (double hi : {1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8}) {
    double j = integrate_jitter(sd, 10, hi);
    REQUIRE(j > prev);
    prev = j;
  }
  CHECK(integrate_jitter(sd, 1e3, 1e3) == 0.0);
  SpectralDensity up = sd;
  for (auto& l : up.levels_dbc_hz) l += 10;
  CHECK(integrate_jitter(up, 10, 1e8) == Approx(std::sqrt(10.0) * integrate_jitter(sd, 10, 1e8)).epsilon(1e-12));
}

TEST_CASE("integration checks its band", "[noise][jitter]") {
  auto sd = fixture("flat_150dbc_1ghz.csv");
  CHECK_THROWS_AS(integrate_jitter(sd, 1, 1e8), RangeError);
  CHECK_THROWS_AS(integrate_jitter(sd, 10, 1e9), RangeError);
  CHECK_THROWS_AS(integrate_jitter(sd, 1e6, 1e3), RangeError);
  SpectralDensity one = sd;
  one.offsets_hz.resize(1);
  one.levels_dbc_hz.resize(1);
  CHECK_THROWS_AS(integrate_jitter(one, 10, 10), RangeError);
}

TEST_CASE("jitter budget combines in quadrature", "[noise][budget]") {
  auto b = combine_jitter({{"crosspoint", 500}, {"fanout", 86}});
  CHECK(b.combined_rms_fs == Approx(507.3).margin(0.05));
  CHECK(b.combined_rms_fs == Approx(std::hypot(500.0, 86.0)));
  CHECK(b.bounds(270.0));
  CHECK_FALSE(b.bounds(600.0));
  CHECK(combine_jitter({}).combined_rms_fs == 0.0);
  CHECK_THROWS_AS(combine_jitter({{"bad", -1}}), RangeError);
}

TEST_CASE("VGA noise follows its configured curve", "[noise][vga]") {
  auto m = VgaNoiseModel::illustrative();
  for (const auto& [v, n] : m.knots) CHECK(vga_noise_floor(v, m) == n);
  CHECK(vga_noise_floor(0.1, m) == Approx(-161.5));
  double prev = -1e9;
  for (double v = 0.0; v <= 1.4; v += 0.01) {
    double n = vga_noise_floor(std::min(v, 1.4), m);
    REQUIRE(n >= prev);
    prev = n;
  }
  auto src = m;
  src.offset_db = 5.0;
  CHECK(vga_noise_floor(0.7, src) == Approx(vga_noise_floor(0.7, m) + 5.0));
  CHECK_THROWS_AS(vga_noise_floor(1.5, m), RangeError);
  CHECK_THROWS_AS(vga_noise_floor(0.5, VgaNoiseModel{{{0.0, -150.0}}, 0}), RangeError);
}

TEST_CASE("PSD CSV round trip", "[noise][csv]") {
  SpectralDensity sd;
  sd.carrier_hz = 98.6e6;
  sd.offsets_hz = {10, 1234.5, 1e6};
  sd.levels_dbc_hz = {-100.25, -130.125, -155.5};
  std::stringstream s;
  write_psd_csv(s, sd);
  auto back = read_psd_csv(s);
  CHECK(back.carrier_hz == sd.carrier_hz);
  CHECK(back.offsets_hz == sd.offsets_hz);
  CHECK(back.levels_dbc_hz == sd.levels_dbc_hz);

  std::istringstream bad_header("# carrier_hz=1e9\nfreq,level\n10,-100\n");
  CHECK_THROWS_AS(read_psd_csv(bad_header), ParseError);
  std::istringstream no_carrier("offset_hz,level_dbc_hz\n10,-100\n");
  CHECK_THROWS_AS(read_psd_csv(no_carrier), ParseError);
  std::istringstream descending("# carrier_hz=1e9\noffset_hz,level_dbc_hz\n100,-100\n10,-100\n");
  CHECK_THROWS_AS(read_psd_csv(descending), RangeError);
  std::istringstream junk("# carrier_hz=1e9\noffset_hz,level_dbc_hz\n10,abc\n");
  CHECK_THROWS_AS(read_psd_csv(junk), ParseError);
}
