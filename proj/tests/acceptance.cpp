// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ddsq/app.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace ddsq;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = DDSQ_SOURCE_DIR;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Verdict resolution() {
  Verdict v;
  v.require(std::round(ftw_resolution_hz() * 1e11) == 23283064365.0, "ftw LSB 0.23283064365 Hz");
  v.require(std::round(kPowStepRad * 1e9) == 95874.0, "pow LSB 95.874 urad");
  v.require(std::round(kAsfStep * 1e6) == 61.0, "asf step 6.1e-5");
  v.note("ftw=" + num("%.11f", ftw_resolution_hz()) + " Hz pow=" + num("%.3f", kPowStepRad * 1e6) +
         " urad asf=" + num("%.2e", kAsfStep));
  return v;
}

Verdict coherence() {
  Verdict v;
  std::mt19937_64 rng(2024);
  std::size_t edges_checked = 0;
  std::uint32_t worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto hc = gen::random_hops(rng);
    OutcomeSource src = PlaybackSource::of({Outcome::dark});
    EdgeRecorder rec;
    run_experiment(std::span(&hc.prog, 1), src, 1, SimConfig{}, &rec);
    const auto& edges = rec.edges().at(0);
    v.require(edges.size() == hc.prog.edges.size(), "every edge executed");
    for (std::size_t i = 0; i < edges.size() && i < hc.prog.edges.size(); ++i) {
      const auto& x = edges[i];
      const auto& e = hc.prog.edges[i];
      auto cycles = static_cast<std::uint64_t>(x.t_ns - x.trigger_ns);
      std::uint32_t free_running = oracle::brute_accumulator(e.words.ftw, cycles) + (std::uint32_t{e.words.pow} << 16);
      auto lag = static_cast<std::uint32_t>(free_running - (std::uint32_t{x.words.pow} << 16));
      worst = std::max(worst, lag);
      ++edges_checked;
    }
  }
  v.require(worst < 65536u, "phase within one 16-bit LSB");
  v.note(std::to_string(edges_checked) + " edges, worst lag " + num("%.4f", worst / 65536.0) + " LSB");
  return v;
}

Verdict compression() {
  Verdict v;
  Timebase tb;
  CompileReport rep;
  auto bin = compile_to_binary(slurp(kSource / "demo/compression/sequence.ddsq"), tb, rep);
  std::size_t edges = 0;
  std::uint64_t pulses = 0;
  for (const auto& c : rep.channels) {
    edges += c.edges;
    pulses += c.pulses;
  }
  v.require(pulses == 2000, "2000 pulses");
  v.require(edges <= 32, "at most 32 unique edges");
  v.require(bin.size() <= 2048, "at most 2048 bytes");
  v.require(decode_all(bin).size() == rep.channels.size(), "demo decodes");
  gen::ProgramGen g(99);
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
    auto p = g.program();
    if (decode(encode(p)) == p) ++exact;
  }
  v.require(exact == 1000, "1000 random round trips");
  v.note(std::to_string(pulses) + " pulses, " + std::to_string(edges) + " edges, " + std::to_string(bin.size()) +
         " bytes, " + std::to_string(exact) + "/1000 round trips");
  return v;
}

Verdict protocol() {
  Verdict v;
  LinkModel link;
  v.require(link.serialization_ns() == Rational(24000, 83), "exact serialization");
  v.require(link.serialization_ns().to_decimal(3) == "289.157", "289.157 ns");
  v.require(link.commit_latency_ns() <= Rational(20), "commit latency <= 20 ns");

  Backplane bp;
  for (std::uint8_t s = 0; s < 8; ++s) bp.install(s);
  auto c = bp.deliver({kBroadcast, 0, 7, 99}, Rational(1000));
  bool same = c.size() == 8;
  for (const auto& x : c) same = same && x.commit_ns == c[0].commit_ns;
  v.require(same, "broadcast to 8 cards at one timestamp");

  std::mt19937_64 rng(48);
  std::uniform_int_distribution<std::uint64_t> frame(0, (1ull << 48) - 1);
  std::uniform_int_distribution<unsigned> geo(0, 7);
  int ok = 0;
  for (int i = 0; i < 1'000'000; ++i) {
    auto f = (frame(rng) & ~(0xFull << 44)) | (static_cast<std::uint64_t>(geo(rng)) << 44);
    auto w = decode_word(f);
    if (encode_word(w) == f && decode_word(encode_word(w)) == w) ++ok;
  }
  v.require(ok == 1'000'000, "codec bijective on 1e6 words");
  v.note("serialize " + link.serialization_ns().to_decimal(3) + " ns, commit " + link.commit_latency_ns().to_decimal(0) +
         " ns, " + std::to_string(ok) + " words");
  return v;
}

Verdict feedback() {
  Verdict v;
  auto m = load_manifest(kSource / "demo/syndrome/run.manifest");
  auto programs = detail::load_programs(m);
  auto src = m.source.make(m.seed);
  auto res = run_experiment(programs, src, m.shots, m.sim);
  Rational worst;
  std::size_t branches = 0;
  for (const auto& s : res.shots)
    for (const auto& b : s.branches) {
      ++branches;
      v.require(b.budget.balanced(), "report sums to the observed gap");
      v.require(b.commits.size() == 3, "three parameter updates");
      if (b.budget.total() > worst) worst = b.budget.total();
    }
  v.require(branches == m.shots, "one branch per shot");
  v.require(worst <= Rational(40000), "loop within 40 us");
  v.note(std::to_string(branches) + " branches, worst loop " + worst.to_decimal(3) + " ns");
  return v;
}

Verdict shaping() {
  Verdict v;
  Timebase tb;
  ExecutedEdge e;
  e.wait_ns = 2000;
  e.words = {ftw_from_freq(100e6), 0, 16383};
  e.shape = ShapeRef{ShapeKind::hann, 125};
  double hann = first_sidelobe(power_spectrum(render_channel(std::span(&e, 1), 0, 2000, tb), 1 << 18)).level_db;
  e.shape.reset();
  double rect = first_sidelobe(power_spectrum(render_channel(std::span(&e, 1), 0, 2000, tb), 1 << 18)).level_db;
  v.require(hann <= -31.0, "hann sidelobe <= -31 dB");
  v.require(std::abs(rect + 13.3) <= 0.2, "rectangular sidelobe -13.3 +/- 0.2 dB");

  VgaModel m;
  const double lsb_db = m.control_lsb_v() * m.slope_db_per_volt;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> log_e(-2.0, 0.0);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> env(64);
    for (auto& x : env) x = std::pow(10.0, log_e(rng));
    auto ctl = precompensate(env, m);
    for (std::size_t k = 0; k < env.size(); ++k)
      worst = std::max(worst, std::abs(vga_gain_db(ctl[k].volts, m) - 20 * std::log10(env[k])));
  }
  v.require(worst <= lsb_db, "VGA round trip within one control LSB");
  v.note("hann " + num("%.2f", hann) + " dB, rect " + num("%.2f", rect) + " dB, VGA worst " +
         num("%.3f", worst / lsb_db) + " LSB");
  return v;
}

Verdict image_rejection() {
  Verdict v;
  constexpr double fs = 8.192e9, fm = 100e6;
  constexpr std::size_t n = 8192;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> eps(-0.05, 0.05), phi(-5.0, 5.0);
  double worst = 0;
  for (int i = 0; i < 40; ++i) {
    SsbConfig cfg;
    cfg.amp_imbalance = eps(rng);
    cfg.phase_error_rad = phi(rng) * oracle::kPi / 180;
    cfg.sideband = i % 2 ? Sideband::lower : Sideband::upper;
    worst = std::max(worst, std::abs(measure_image_rejection_db(cfg, fm, fs, n) -
                                     image_rejection_db(cfg.amp_imbalance, cfg.phase_error_rad)));
  }
  v.require(worst <= 0.1, "closed form vs FFT within 0.1 dB");
  double perfect = measure_image_rejection_db(SsbConfig{}, fm, fs, n);
  v.require(perfect <= -120.0, "perfect quadrature image <= -120 dBc");
  SsbConfig cfg;
  cfg.amp_imbalance = 0.02;
  cfg.phase_error_rad = 2 * oracle::kPi / 180;
  auto r = tune_imbalance(cfg);
  v.require(r.image_dbc <= -60.0 && r.evaluations <= 200, "tuner reaches -60 dBc within 200 evaluations");
  v.note("worst disagreement " + num("%.4f", worst) + " dB, perfect " + num("%.1f", perfect) + " dBc, tuner " +
         num("%.1f", r.image_dbc) + " dBc in " + std::to_string(r.evaluations) + " evaluations");
  return v;
}

Verdict jitter() {
  Verdict v;
  const fs::path fx = kSource / "tests/fixtures";
  double flat = integrate_jitter(read_psd_csv((fx / "flat_150dbc_1ghz.csv").string()), 10, 1e8) * 1e15;
  v.require(std::abs(flat - 71.2) <= 0.1, "flat profile 71.2 +/- 0.1 fs");
  auto budget = combine_jitter({{"crosspoint", 500}, {"fanout", 86}});
  v.require(std::abs(budget.combined_rms_fs - 507.3) <= 0.05, "RSS(500, 86) = 507.3 fs");
  v.require(budget.bounds(270.0), "270 fs within the budget");
  auto raw = read_psd_csv((fx / "residual_98p6mhz.csv").string());
  auto norm = normalize_carrier(raw, 1e9);
  double shift = norm.levels_dbc_hz[0] - raw.levels_dbc_hz[0];
  v.require(std::abs(shift - 20.12) <= 0.01, "98.6 MHz to 1 GHz shift +20.12 dB");
  double modelled = integrate_jitter(read_psd_csv((fx / "modeled_clock_1ghz.csv").string()), 10, 1e8) * 1e15;
  v.require(std::abs(modelled - 270.0) <= 27.0, "modelled clock fixture 270 fs +/- 10 %");
  v.note("flat " + num("%.3f", flat) + " fs, RSS " + num("%.2f", budget.combined_rms_fs) + " fs, shift " +
         num("%+.4f", shift) + " dB, modelled " + num("%.1f", modelled) + " fs");
  return v;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> t;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) t[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return t;
}

Verdict determinism() {
  Verdict v;
  auto base = fs::temp_directory_path() / "ddsq_acceptance";
  fs::remove_all(base);
  std::ostringstream out, err;
  auto m = kSource / "demo/mixed_species/run.manifest";
  int a = cmd_run(m, base / "a", {}, out, err);
  int b = cmd_run(m, base / "b", {}, out, err);
  v.require(a == kExitOk && b == kExitOk, "both runs succeed");
  auto ta = tree(base / "a"), tb = tree(base / "b");
  v.require(!ta.empty() && ta == tb, "byte-identical output trees");
  std::size_t bytes = 0;
  for (const auto& [k, s] : ta) bytes += s.size();
  v.note(std::to_string(ta.size()) + " files, " + std::to_string(bytes) + " bytes");
  fs::remove_all(base);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> check;
    double limit_s;  // 0: no runtime bound
  };
  const Criterion criteria[] = {
      {"resolution contracts", resolution, 1.0},
      {"phase coherence", coherence, 30.0},
      {"memory compression", compression, 0.0},
      {"protocol timing", protocol, 0.0},
      {"feedback budget", feedback, 0.0},
      {"shaping spectra", shaping, 10.0},
      {"SSB image rejection", image_rejection, 0.0},
      {"jitter math", jitter, 0.0},
      {"end-to-end determinism", determinism, 0.0},
  };
  int failed = 0, i = 0;
  for (const auto& c : criteria) {
    ++i;
    Verdict v;
    auto t0 = std::chrono::steady_clock::now();
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.note(std::string("exception: ") + e.what());
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && dt > c.limit_s) v.require(false, "runtime over " + num("%.0f", c.limit_s) + " s");
    if (!v.pass) ++failed;
    std::printf("criterion %d %s: %s (%s; %.2f s)\n", i, c.name, v.pass ? "PASS" : "FAIL", v.detail.c_str(), dt);
  }
  std::printf("%d/%d criteria passed\n", i - failed, i);
  return failed == 0 ? 0 : 1;
}
