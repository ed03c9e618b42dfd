#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "ddsq/backplane.hpp"
#include "ddsq/error.hpp"
#include "ddsq/program.hpp"
#include "ddsq/rational.hpp"
#include "ddsq/timebase.hpp"

namespace ddsq {

enum class Outcome : std::uint8_t { dark = 0, bright = 1 };

inline const char* to_string(Outcome o) { return o == Outcome::bright ? "bright" : "dark"; }

struct DetectionEvent {
  std::uint8_t counter_id = 0;
  std::int64_t window_start_ns = 0;
  std::int64_t window_len_ns = 0;
  std::uint32_t counts = 0;
};

/// Bright iff counts >= threshold; a tie reads as bright.
inline Outcome threshold_detect(std::uint32_t counts, std::uint32_t threshold) {
  return counts >= threshold ? Outcome::bright : Outcome::dark;
}

inline Outcome threshold_detect(const DetectionEvent& e, std::uint32_t threshold) {
  if (e.counter_id >= kPhotonCounters) throw RangeError("photon counter id must be 0-7");
  return threshold_detect(e.counts, threshold);
}

/// Counts registered on the eight photon counters during one detection window.
struct WindowSample {
  std::array<std::uint32_t, kPhotonCounters> counts{};
  std::optional<Outcome> forced;  // playback of a bare outcome bypasses the threshold
  std::optional<Outcome> truth;   // state drawn by a synthetic source

  std::uint32_t total(std::uint8_t mask) const {
    std::uint32_t n = 0;
    for (unsigned i = 0; i < kPhotonCounters; ++i)
      if (mask & (1u << i)) n += counts[i];
    return n;
  }
};

/// Replays a fixed list of outcomes or counts, one entry per detection
/// window, wrapping around at the end of the list.
class PlaybackSource {
 public:
  struct Entry {
    std::optional<Outcome> outcome;
    std::uint32_t counts = 0;
  };

  explicit PlaybackSource(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw RangeError("playback source needs at least one entry");
  }

  static PlaybackSource of(std::initializer_list<Outcome> outcomes) {
    std::vector<Entry> e;
    for (auto o : outcomes) e.push_back({o, 0});
    return PlaybackSource(std::move(e));
  }

  WindowSample sample(std::uint8_t mask) {
    const Entry& e = entries_[next_++ % entries_.size()];
    WindowSample s;
    if (e.outcome) {
      s.forced = e.outcome;
      s.truth = e.outcome;
    } else {
      for (unsigned i = 0; i < kPhotonCounters; ++i)
        if (mask & (1u << i)) s.counts[i] = e.counts;
    }
    return s;
  }

 private:
  std::vector<Entry> entries_;
  std::size_t next_ = 0;
};

/// Seeded synthetic detection: each window draws a bright/dark state, then
/// Poisson counts with the matching mean on every gated counter.
class PoissonSource {
 public:
  PoissonSource(std::uint64_t seed, double bright_mean, double dark_mean, double p_bright = 0.5)
      : rng_(seed), bright_mean_(bright_mean), dark_mean_(dark_mean), p_bright_(p_bright) {
    if (!(bright_mean > 0) || !(dark_mean > 0)) throw RangeError("Poisson means must be positive");
    if (!(p_bright >= 0 && p_bright <= 1)) throw RangeError("p_bright must be in [0, 1]");
  }

  WindowSample sample(std::uint8_t mask) {
    WindowSample s;
    std::bernoulli_distribution state(p_bright_);
    s.truth = state(rng_) ? Outcome::bright : Outcome::dark;
    std::poisson_distribution<std::uint32_t> counts(*s.truth == Outcome::bright ? bright_mean_ : dark_mean_);
    for (unsigned i = 0; i < kPhotonCounters; ++i)
      if (mask & (1u << i)) s.counts[i] = counts(rng_);
    return s;
  }

  double bright_mean() const { return bright_mean_; }
  double dark_mean() const { return dark_mean_; }
  double p_bright() const { return p_bright_; }

 private:
  std::mt19937_64 rng_;
  double bright_mean_;
  double dark_mean_;
  double p_bright_;
};

class OutcomeSource {
 public:
  OutcomeSource(PlaybackSource s) : src_(std::move(s)) {}  // NOLINT(implicit)
  OutcomeSource(PoissonSource s) : src_(std::move(s)) {}   // NOLINT(implicit)

  WindowSample sample(std::uint8_t mask) {
    return std::visit([&](auto& s) { return s.sample(mask); }, src_);
  }

 private:
  std::variant<PlaybackSource, PoissonSource> src_;
};

enum class UpdatePath : std::uint8_t { wire, spi };

struct FeedbackConfig {
  std::int64_t detect_latency_ns = 8;  // counter latch after the window closes
  std::int64_t decide_ns = 1000;       // controller processing
  UpdatePath path = UpdatePath::wire;
};

/// Latency of one feedback path, from the end of a detection window to the
/// first edge of the selected branch body. `slack` is the idle time between
/// the last update landing and the branch point.
struct FeedbackBudget {
  Rational detect;
  Rational decide;
  Rational update;
  Rational slack;
  Rational observed_gap;

  Rational total() const { return detect + decide + update; }
  bool balanced() const { return total() + slack == observed_gap; }
};

/// Words written by a branch resolution, per branch slot on the card:
/// three 24-bit payloads carry the tuning words of the first selected edge,
/// and the last also latches the outcome.
inline constexpr std::size_t kWordsPerBranchUpdate = 3;

inline std::vector<WireWord> branch_update_words(std::uint8_t card, std::uint8_t lane, std::uint32_t branch_seq,
                                                 Outcome outcome, const TuningWordSet& w, PhaseMode mode) {
  auto base = static_cast<std::uint16_t>(0x8000 | ((branch_seq & 0x1FFF) << 2));
  std::vector<WireWord> out;
  out.push_back({card, lane, base, w.ftw >> 8});
  out.push_back({card, lane, static_cast<std::uint16_t>(base | 1), ((w.ftw & 0xFFu) << 16) | w.pow});
  std::uint32_t tail = w.asf | (mode == PhaseMode::coherent ? 1u << 14 : 0u) |
                       (outcome == Outcome::bright ? 1u << 23 : 0u);
  out.push_back({card, lane, static_cast<std::uint16_t>(base | 2), tail});
  return out;
}

/// First edge a body would play, descending into loops and taken branches.
inline const EdgeEvent* first_edge(const InstructionList& body, const std::vector<EdgeEvent>& edges) {
  for (const auto& ins : body) {
    switch (ins.op) {
      case OpCode::play: return &edges.at(ins.edge);
      case OpCode::loop:
        if (auto* e = first_edge(ins.body, edges)) return e;
        break;
      case OpCode::branch: return nullptr;  // depends on a later outcome
      case OpCode::wait_trigger: return nullptr;
    }
  }
  return nullptr;
}

struct BranchContext {
  std::uint8_t card = 0;
  std::uint8_t lane = 0;
  std::uint32_t branch_seq = 0;
  Rational window_end_ns;
  Rational branch_ns;
};

struct BranchResolution {
  bool then_taken = true;
  const InstructionList* body = nullptr;
  std::vector<WireWord> words;
  std::vector<Commit> commits;
  FeedbackBudget budget;
};

/// Select the branch body for `outcome` and push its parameters to the card.
/// Throws SequencingError when the update would land after the branch point.
inline BranchResolution resolve_branch(Outcome outcome, const Instruction& branch, const SequenceProgram& prog,
                                       const BranchContext& ctx, Backplane& bp, const FeedbackConfig& cfg,
                                       const Timebase& tb) {
  if (branch.op != OpCode::branch) throw SequencingError("resolve_branch called on a non-branch instruction");
  BranchResolution r;
  r.then_taken = outcome == Outcome::bright;
  r.body = r.then_taken ? &branch.body : &branch.else_body;

  TuningWordSet words{};
  PhaseMode mode = PhaseMode::absolute;
  if (const EdgeEvent* e = first_edge(*r.body, prog.edges)) {
    words = e->words;
    mode = e->phase_mode;
  }
  r.words = branch_update_words(ctx.card, ctx.lane, ctx.branch_seq, outcome, words, mode);

  Rational ready = ctx.window_end_ns + Rational(cfg.detect_latency_ns) + Rational(cfg.decide_ns);
  r.commits = bp.send_burst(r.words, ready);
  Rational applied = ready;
  for (const auto& c : r.commits)
    if (c.commit_ns > applied) applied = c.commit_ns;
  if (cfg.path == UpdatePath::spi) applied += Rational(static_cast<std::int64_t>(tb.spi_update_ns));

  r.budget.detect = Rational(cfg.detect_latency_ns);
  r.budget.decide = Rational(cfg.decide_ns);
  r.budget.update = applied - ready;
  r.budget.observed_gap = ctx.branch_ns - ctx.window_end_ns;
  r.budget.slack = ctx.branch_ns - applied;
  if (applied > ctx.branch_ns)
    throw SequencingError("branch deadline passed on card " + std::to_string(ctx.card) + " channel " +
                          std::to_string(ctx.lane) + ": update lands at " + applied.to_decimal(3) +
                          " ns, branch point at " + ctx.branch_ns.to_decimal(3) + " ns");
  return r;
}

}  // namespace ddsq
