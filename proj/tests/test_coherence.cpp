#include <catch_amalgamated.hpp>

#include <random>

#include "ddsq/coherence.hpp"
#include "ddsq/simulator.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace ddsq;

TEST_CASE("coherent pow examples", "[coherence]") {
  CHECK(coherent_pow(0, 12345, 77) == 77);
  CHECK(coherent_pow(0x10000, 1, 0) == 1);
  CHECK(coherent_pow(0x8000, 1, 0) == 0);  // truncated, not rounded
  CHECK(coherent_pow(ftw_from_freq(250e6), 1, 0) == 16384);
  CHECK(coherent_pow(ftw_from_freq(250e6), 3, 16384) == 0);
  CHECK(reference_phase(0xFFFFFFFF, 2) == 0xFFFFFFFE);
}

TEST_CASE("coherence clock never runs backwards", "[coherence]") {
  CoherenceClock c;
  c.advance_to(100);
  c.advance_to(40);
  CHECK(c.total_cycles() == 100);
  c.advance(8);
  CHECK(c.total_cycles() == 108);
  c.reset();
  CHECK(c.total_cycles() == 0);
}

TEST_CASE("coherent pow is additive in the user offset", "[coherence][property]") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::uint32_t> w;
  std::uniform_int_distribution<std::uint64_t> cyc(0, 1ull << 40);
  for (int i = 0; i < 10000; ++i) {
    auto ftw = w(rng);
    auto n = cyc(rng);
    auto u = static_cast<std::uint16_t>(w(rng));
    REQUIRE(coherent_pow(ftw, n, u) == static_cast<std::uint16_t>(coherent_pow(ftw, n, 0) + u));
    REQUIRE(coherent_pow(ftw, n, 0) == static_cast<std::uint16_t>(reference_phase(ftw, n) >> 16));
  }
}

using gen::random_hops;

TEST_CASE("coherent edges track a free-running oscillator at their frequency", "[coherence][property]") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto hc = random_hops(rng);
    OutcomeSource src = PlaybackSource::of({Outcome::dark});
    EdgeRecorder rec;
    run_experiment(std::span(&hc.prog, 1), src, 1, SimConfig{}, &rec);
    const auto& edges = rec.edges().at(0);
    REQUIRE(edges.size() == hc.prog.edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& x = edges[i];
      const auto& e = hc.prog.edges[i];
      auto cycles = static_cast<std::uint64_t>(x.t_ns - x.trigger_ns);
      std::uint32_t free_running = oracle::brute_accumulator(e.words.ftw, cycles) + (std::uint32_t{e.words.pow} << 16);
      std::uint32_t realized = std::uint32_t{x.words.pow} << 16;
      // The realized phase may lag, never lead, by less than one 16-bit LSB.
      REQUIRE(static_cast<std::uint32_t>(free_running - realized) < 65536u);
    }
  }
}

TEST_CASE("absolute edges keep their programmed phase", "[coherence]") {
  SequenceProgram p;
  p.edges.push_back({10, {ftw_from_freq(10e6), 1234, 100}, std::nullopt, PhaseMode::absolute, std::nullopt});
  p.edges.push_back({10, {ftw_from_freq(20e6), 4321, 100}, std::nullopt, PhaseMode::absolute, std::nullopt});
  p.program = {Instruction::play(0), Instruction::play(1), Instruction::play(0)};
  OutcomeSource src = PlaybackSource::of({Outcome::dark});
  EdgeRecorder rec;
  run_experiment(std::span(&p, 1), src, 1, SimConfig{}, &rec);
  const auto& e = rec.edges().at(0);
  CHECK(e[0].words.pow == 1234);
  CHECK(e[1].words.pow == 4321);
  CHECK(e[2].words.pow == 1234);
}

TEST_CASE("rendered coherent waveform continues the reference across a hop", "[coherence]") {
  // f1 -> f2 -> f1: the samples of the second f1 segment equal those of an
  // oscillator that never left f1, to within the truncation of the pow.
  auto f1 = ftw_from_freq(37.5e6), f2 = ftw_from_freq(80e6);
  SequenceProgram p;
  p.edges.push_back({25, {f1, 0, 16383}, std::nullopt, PhaseMode::coherent, std::nullopt});
  p.edges.push_back({13, {f2, 0, 16383}, std::nullopt, PhaseMode::coherent, std::nullopt});
  p.program = {Instruction::play(0), Instruction::play(1), Instruction::play(0)};
  OutcomeSource src = PlaybackSource::of({Outcome::dark});
  EdgeRecorder rec;
  run_experiment(std::span(&p, 1), src, 1, SimConfig{}, &rec);
  auto wave = render_channel(rec.edges().at(0), 0, 504);
  NcoState ref;
  ref.words = {f1, 0, 16383};
  auto ideal = step_nco_ideal(ref, 504);
  double max_err = 0;
  for (std::size_t k = 304; k < 504; ++k) max_err = std::max(max_err, std::abs(wave[k] - ideal[k]));
  CHECK(max_err <= 2 * oracle::kPi / 65536.0 + 1.0 / 8191);
}
