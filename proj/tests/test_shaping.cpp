#include <catch_amalgamated.hpp>

#include <random>

#include "ddsq/fft.hpp"
#include "ddsq/shaping.hpp"
#include "ddsq/simulator.hpp"
#include "oracles.hpp"

using namespace ddsq;
using Catch::Approx;

TEST_CASE("envelope endpoints", "[shaping]") {
  EnvelopeSpec hann{ShapeKind::hann, 25, 1};
  auto e = envelope_samples(hann);
  REQUIRE(e.size() == 51);
  CHECK(e.front() == 0.0);
  CHECK(e[25] == 1.0);
  CHECK(e[24] < 1.0);
  CHECK(e.back() == 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i] == e[e.size() - 1 - i]);

  auto r = envelope_samples({ShapeKind::rectangular, 4, 2});
  CHECK(r == std::vector<double>(10, 1.0));

  auto b = envelope_samples({ShapeKind::blackman, 50, 1});
  CHECK(b.front() == Approx(0.0).margin(1e-15));
  CHECK(b[50] == 1.0);

  // hann with one plateau sample is the textbook symmetric window
  for (std::size_t n = 0; n < e.size(); ++n)
    CHECK(e[n] == Approx(std::pow(std::sin(oracle::kPi * n / 50.0), 2)).margin(1e-12));
}

TEST_CASE("envelope duration must land on the event grain", "[shaping]") {
  // One 16 ns sample is two grains, so any sample count is fine at 62.5 MHz;
  // at 100 MHz a 10 ns sample is not.
  CHECK_NOTHROW(EnvelopeSpec{ShapeKind::hann, 3, 1}.validate());
  CHECK_THROWS_AS((EnvelopeSpec{ShapeKind::hann, 1, 1, 100e6}.validate()), RangeError);
  CHECK_NOTHROW((EnvelopeSpec{ShapeKind::hann, 2, 0, 100e6}.validate(8)));
}

TEST_CASE("hann rise follows sin squared", "[shaping]") {
  for (double x : {0.1, 0.25, 0.5, 0.9})
    CHECK(rise_value(ShapeKind::hann, x) == Approx(std::pow(std::sin(oracle::kPi * x / 2), 2)));
  CHECK(envelope_at(ShapeKind::hann, 50, 100, 1000) == Approx(0.5));
  CHECK(envelope_at(ShapeKind::hann, 950, 100, 1000) == Approx(0.5));
  CHECK(envelope_at(ShapeKind::hann, 500, 100, 1000) == 1.0);
  CHECK(envelope_at(ShapeKind::hann, 1000, 100, 1000) == 0.0);
}

TEST_CASE("sidelobes of a 2 us pulse from a dense DTFT", "[shaping][spectrum]") {
  // 125 samples at 62.5 MHz = 2 us.
  auto rect = envelope_samples({ShapeKind::rectangular, 0, 125});
  auto hann = envelope_samples({ShapeKind::hann, 62, 1});
  double rect_db = oracle::dtft_first_sidelobe_db(rect, 1.0 / 8192, 0.1);
  double hann_db = oracle::dtft_first_sidelobe_db(hann, 1.0 / 8192, 0.1);
  CHECK(rect_db == Approx(-13.26).margin(0.2));
  CHECK(hann_db <= -31.0);

  // The FFT path agrees with the DTFT oracle.
  auto p = power_spectrum(hann, 1 << 16);
  CHECK(first_sidelobe(p).level_db == Approx(hann_db).margin(0.05));
  auto pr = power_spectrum(rect, 1 << 16);
  CHECK(first_sidelobe(pr).level_db == Approx(rect_db).margin(0.05));
}

TEST_CASE("hann sidelobes sit below rectangular beyond the main lobe", "[shaping][spectrum][property]") {
  // Equal energy and duration; compare the sidelobe envelopes bin by bin
  // beyond the hann main lobe (two rect lobe widths).
  const std::size_t n = 128, nfft = 1 << 14;
  auto rect = envelope_samples({ShapeKind::rectangular, 0, 128});
  auto hann = envelope_samples({ShapeKind::hann, 64, 0});
  double er = 0, eh = 0;
  for (double v : rect) er += v * v;
  for (double v : hann) eh += v * v;
  for (double& v : hann) v *= std::sqrt(er / eh);
  auto pr = power_spectrum(rect, nfft);
  auto ph = power_spectrum(hann, nfft);
  // Sidelobe envelope: running maximum over one rect lobe width.
  const std::size_t lobe = nfft / n;
  for (std::size_t k = 3 * lobe; k + lobe < pr.size(); k += lobe) {
    double mr = 0, mh = 0;
    for (std::size_t j = k; j < k + lobe; ++j) {
      mr = std::max(mr, pr[j]);
      mh = std::max(mh, ph[j]);
    }
    REQUIRE(mh < mr);
  }
}

TEST_CASE("rendered hann pulse keeps its sidelobes through the VGA", "[shaping][simulator]") {
  // 2 us hann pulse at 100 MHz rendered at 1 GS/s with a zero-order-held,
  // precompensated and quantized control voltage.
  Timebase tb;
  ExecutedEdge e;
  e.wait_ns = 2000;
  e.words = {ftw_from_freq(100e6), 0, 16383};
  e.shape = ShapeRef{ShapeKind::hann, 125};
  auto x = render_channel(std::span(&e, 1), 0, 2000, tb);
  auto p = power_spectrum(x, 1 << 18);
  auto s = first_sidelobe(p);
  CHECK(s.peak_bin * 1e9 / (1 << 18) == Approx(100e6).margin(1e9 / (1 << 18)));
  CHECK(s.level_db <= -31.0);

  e.shape.reset();
  auto xr = render_channel(std::span(&e, 1), 0, 2000, tb);
  CHECK(first_sidelobe(power_spectrum(xr, 1 << 18)).level_db == Approx(-13.26).margin(0.2));
}

TEST_CASE("VGA precompensation examples", "[shaping]") {
  VgaModel m;
  CHECK(precompensate_voltage(1.0, m) == m.v_ref);
  CHECK(precompensate_voltage(0.1, m) == Approx(m.v_ref - 20.0 / m.slope_db_per_volt));
  CHECK(precompensate_voltage(0.0, m) == m.v_min);
  CHECK(shaping_range_db(m) >= 40.0);
  CHECK(vga_gain_db(m.v_ref, m) == 0.0);
  CHECK(vga_gain_db(-10.0, m) == m.min_gain_db);
}

TEST_CASE("VGA round trip stays within one control LSB", "[shaping][property]") {
  VgaModel m;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> log_e(-2.0, 0.0);
  const double lsb_db = m.control_lsb_v() * m.slope_db_per_volt;
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> env(64);
    for (auto& v : env) v = std::pow(10.0, log_e(rng));
    auto ctl = precompensate(env, m);
    for (std::size_t k = 0; k < env.size(); ++k) {
      double err_db = std::abs(vga_gain_db(ctl[k].volts, m) - 20 * std::log10(env[k]));
      worst = std::max(worst, err_db);
    }
  }
  CHECK(worst <= lsb_db / 2 * (1 + 1e-9));
}

TEST_CASE("control bandwidth settles like a one-pole filter", "[shaping]") {
  VgaModel m;
  CHECK(m.time_constant_s() == Approx(53.05e-9).epsilon(1e-3));
  CHECK(settle_time_s(m, 0.99) * 1e9 == Approx(244.3).margin(0.1));
  CHECK(settle_time_s(m, 0.99) <= 5 * m.time_constant_s());

  const double dt = 1e-9;
  std::vector<double> step(400, 1.0);
  auto y = apply_control_bandwidth(step, m, dt, 0.0);
  double worst = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    double t = (k + 1) * dt;
    worst = std::max(worst, std::abs(y[k] - (1 - std::exp(-t / m.time_constant_s()))));
  }
  CHECK(worst <= 1e-6);
  CHECK(y[244] >= 0.99);
}
