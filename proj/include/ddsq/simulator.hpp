#pragma once

// Event-driven experiment scheduler. One timeline owns every channel: the
// lane with the earliest pending instruction runs next (ties go to the lower
// channel), so results never depend on evaluation order.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ddsq/backplane.hpp"
#include "ddsq/coherence.hpp"
#include "ddsq/error.hpp"
#include "ddsq/mch.hpp"
#include "ddsq/nco.hpp"
#include "ddsq/program.hpp"
#include "ddsq/shaping.hpp"
#include "ddsq/timebase.hpp"

namespace ddsq {

struct SimConfig {
  Timebase timebase;
  LinkModel link;
  FeedbackConfig feedback;
  std::int64_t shot_gap_ns = 1000;
  /// Installed card slots. Empty: one card per slot that a program uses.
  std::vector<std::uint8_t> cards;

  void validate() const {
    timebase.validate();
    link.validate();
    if (shot_gap_ns < 0 || shot_gap_ns % timebase.event_grain_ns != 0)
      throw RangeError("shot gap must be a non-negative multiple of the event grain");
    if (feedback.detect_latency_ns < 0 || feedback.decide_ns < 0)
      throw RangeError("feedback latencies must be non-negative");
  }
};

struct ExecutedEdge {
  std::uint32_t shot = 0;
  std::uint8_t card = 0;
  std::uint8_t lane = 0;
  std::uint8_t channel = 0;
  std::int64_t t_ns = 0;
  std::int64_t wait_ns = 0;
  std::int64_t trigger_ns = 0;
  std::uint32_t edge_index = 0;
  TuningWordSet words;  // as applied, coherent phase resolved
  PhaseMode mode = PhaseMode::absolute;
  std::optional<ShapeRef> shape;
  std::optional<std::uint8_t> detect_mask;
  bool conditional = false;  // first edge of a selected branch body
};

struct DetectionWindow {
  std::uint32_t shot = 0;
  std::uint8_t channel = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::uint8_t mask = 0;
  WindowSample sample;
};

struct BranchRecord {
  std::uint32_t shot = 0;
  std::uint8_t card = 0;
  std::uint8_t lane = 0;
  std::uint8_t channel = 0;
  std::uint32_t branch_seq = 0;
  std::int64_t window_end_ns = 0;
  std::int64_t branch_ns = 0;
  std::uint32_t counts = 0;
  std::uint32_t threshold = 0;
  Outcome outcome = Outcome::dark;
  bool forced = false;
  std::optional<Outcome> truth;
  bool then_taken = false;
  FeedbackBudget budget;
  std::vector<Commit> commits;
};

class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_shot_start(std::uint32_t /*shot*/, std::int64_t /*t_ns*/) {}
  virtual void on_trigger(std::uint32_t /*shot*/, std::int64_t /*t_ns*/) {}
  virtual void on_edge(const ExecutedEdge&) {}
  virtual void on_detection(const DetectionWindow&) {}
  virtual void on_branch(const BranchRecord&) {}
  virtual void on_wait_trigger(std::uint32_t /*shot*/, std::uint8_t /*channel*/, std::int64_t /*t_ns*/) {}
  virtual void on_channel_end(std::uint32_t /*shot*/, std::uint8_t /*channel*/, std::int64_t /*t_ns*/) {}
  virtual void on_shot_end(std::uint32_t /*shot*/, std::int64_t /*t_ns*/) {}
};

struct Tally {
  std::uint64_t shots = 0;
  std::uint64_t branches = 0;
  std::uint64_t bright = 0;
  std::uint64_t dark = 0;
  std::uint64_t then_taken = 0;
  std::uint64_t else_taken = 0;
  std::uint64_t with_truth = 0;
  std::uint64_t misclassified = 0;

  friend bool operator==(const Tally&, const Tally&) = default;
};

struct ShotResult {
  std::uint32_t shot = 0;
  std::int64_t trigger_ns = 0;
  std::int64_t end_ns = 0;
  std::vector<BranchRecord> branches;
};

struct ExperimentResult {
  std::vector<ShotResult> shots;
  Tally tally;
};

inline std::uint8_t card_of(std::uint8_t channel) { return static_cast<std::uint8_t>(channel / kChannelsPerCard); }
inline std::uint8_t lane_of(std::uint8_t channel) { return static_cast<std::uint8_t>(channel % kChannelsPerCard); }

namespace detail {

struct Frame {
  const InstructionList* list = nullptr;
  std::size_t pc = 0;
  std::uint32_t remaining = 1;  // iterations left, including the current one
};

enum class LaneState { running, waiting, done };

struct Lane {
  const SequenceProgram* prog = nullptr;
  std::uint8_t card = 0;
  std::uint8_t lane = 0;
  std::vector<Frame> stack;
  std::int64_t t = 0;
  std::int64_t trigger_ns = 0;
  LaneState state = LaneState::running;
  std::uint32_t branch_seq = 0;
  bool next_conditional = false;

  // Next instruction, unwinding finished loop iterations and bodies.
  const Instruction* next() {
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.pc < f.list->size()) return &(*f.list)[f.pc++];
      if (--f.remaining > 0) {
        f.pc = 0;
        continue;
      }
      stack.pop_back();
    }
    return nullptr;
  }
};

}  // namespace detail

/// Run `shots` repetitions of the loaded programs. Shots follow each other
/// after `shot_gap_ns`; `trigger` instructions park a channel until every
/// running channel has parked or finished, then a trigger fires on the
/// shared lane and restarts the coherence clock.
inline ExperimentResult run_experiment(std::span<const SequenceProgram> programs, OutcomeSource& source,
                                       std::uint32_t shots, const SimConfig& cfg, Observer* obs = nullptr) {
  cfg.validate();
  const Timebase& tb = cfg.timebase;
  const auto grain = static_cast<std::int64_t>(tb.event_grain_ns);

  Backplane bp(cfg.link);
  for (auto s : cfg.cards) bp.install(s);

  std::vector<detail::Lane> lanes;
  std::vector<bool> seen(kMaxChannels, false);
  for (const auto& p : programs) {
    validate(p);
    if (seen[p.channel]) throw SequencingError("two programs for channel " + std::to_string(p.channel));
    seen[p.channel] = true;
    auto card = card_of(p.channel);
    if (cfg.cards.empty()) bp.install(card);
    else if (!bp.installed(card))
      throw DeliveryError("program for channel " + std::to_string(p.channel) + " targets empty slot " +
                          std::to_string(card));
    detail::Lane l;
    l.prog = &p;
    l.card = card;
    l.lane = lane_of(p.channel);
    lanes.push_back(l);
  }
  std::sort(lanes.begin(), lanes.end(),
            [](const detail::Lane& a, const detail::Lane& b) { return a.prog->channel < b.prog->channel; });

  ExperimentResult result;
  std::int64_t t_shot = 0;
  for (std::uint32_t shot = 0; shot < shots; ++shot) {
    ShotResult sr;
    sr.shot = shot;
    sr.trigger_ns = t_shot;
    if (obs) obs->on_shot_start(shot, t_shot);
    for (auto& l : lanes) {
      l.stack.assign(1, detail::Frame{&l.prog->program, 0, 1});
      l.t = t_shot;
      l.trigger_ns = t_shot;
      l.state = detail::LaneState::running;
      l.branch_seq = 0;
      l.next_conditional = false;
    }
    std::vector<DetectionWindow> windows;

    for (;;) {
      detail::Lane* cur = nullptr;
      for (auto& l : lanes)
        if (l.state == detail::LaneState::running && (!cur || l.t < cur->t)) cur = &l;

      if (!cur) {
        std::int64_t t_trig = -1;
        for (auto& l : lanes)
          if (l.state == detail::LaneState::waiting) t_trig = std::max(t_trig, l.t);
        if (t_trig < 0) break;
        bp.send_trigger(Rational(t_trig));
        if (obs) obs->on_trigger(shot, t_trig);
        for (auto& l : lanes) {
          if (l.state != detail::LaneState::waiting) continue;
          l.state = detail::LaneState::running;
          l.t = t_trig;
          l.trigger_ns = t_trig;
        }
        continue;
      }

      detail::Lane& l = *cur;
      const SequenceProgram& prog = *l.prog;
      const Instruction* ins = l.next();
      if (!ins) {
        l.state = detail::LaneState::done;
        if (obs) obs->on_channel_end(shot, prog.channel, l.t);
        continue;
      }

      switch (ins->op) {
        case OpCode::play: {
          const EdgeEvent& e = prog.edges[ins->edge];
          ExecutedEdge x;
          x.shot = shot;
          x.card = l.card;
          x.lane = l.lane;
          x.channel = prog.channel;
          x.t_ns = l.t;
          x.wait_ns = static_cast<std::int64_t>(e.wait_grains) * grain;
          x.trigger_ns = l.trigger_ns;
          x.edge_index = ins->edge;
          x.words = e.words;
          x.mode = e.phase_mode;
          x.shape = e.shape;
          x.detect_mask = e.detect_mask;
          x.conditional = l.next_conditional;
          l.next_conditional = false;

          auto cycles = tb.cycles_from_ns(static_cast<std::uint64_t>(l.t - l.trigger_ns));
          if (e.phase_mode == PhaseMode::coherent) x.words.pow = coherent_pow(e.words.ftw, cycles, e.words.pow);
          ChannelCard& card = bp.card(l.card);
          card.clock.advance_to(cycles);
          card.nco[l.lane] = NcoState{0, x.words, cycles};
          if (obs) obs->on_edge(x);

          if (e.detect_mask) {
            DetectionWindow w;
            w.shot = shot;
            w.channel = prog.channel;
            w.start_ns = l.t;
            w.end_ns = l.t + x.wait_ns;
            w.mask = *e.detect_mask;
            w.sample = source.sample(w.mask);
            if (obs) obs->on_detection(w);
            windows.push_back(w);
          }
          l.t += x.wait_ns;
          break;
        }
        case OpCode::loop:
          l.stack.push_back(detail::Frame{&ins->body, 0, ins->count});
          break;
        case OpCode::branch: {
          const DetectionWindow* w = nullptr;
          for (const auto& cand : windows)
            if ((cand.mask & ins->counter_mask) && cand.end_ns <= l.t && (!w || cand.end_ns >= w->end_ns))
              w = &cand;
          if (!w)
            throw SequencingError("branch on channel " + std::to_string(prog.channel) + " at " +
                                  std::to_string(l.t) + " ns has no completed detection window on its counters");
          BranchRecord br;
          br.shot = shot;
          br.card = l.card;
          br.lane = l.lane;
          br.channel = prog.channel;
          br.branch_seq = l.branch_seq++;
          br.window_end_ns = w->end_ns;
          br.branch_ns = l.t;
          br.counts = w->sample.total(ins->counter_mask);
          br.threshold = ins->threshold;
          br.forced = w->sample.forced.has_value();
          br.outcome = br.forced ? *w->sample.forced : threshold_detect(br.counts, ins->threshold);
          br.truth = w->sample.truth;

          BranchContext ctx{l.card, l.lane, br.branch_seq, Rational(br.window_end_ns), Rational(br.branch_ns)};
          auto res = resolve_branch(br.outcome, *ins, prog, ctx, bp, cfg.feedback, tb);
          br.then_taken = res.then_taken;
          br.budget = res.budget;
          br.commits = std::move(res.commits);
          if (!res.body->empty()) {
            l.stack.push_back(detail::Frame{res.body, 0, 1});
            l.next_conditional = true;
          }

          auto& tally = result.tally;
          tally.branches += 1;
          (br.outcome == Outcome::bright ? tally.bright : tally.dark) += 1;
          (br.then_taken ? tally.then_taken : tally.else_taken) += 1;
          if (br.truth) {
            tally.with_truth += 1;
            if (*br.truth != br.outcome) tally.misclassified += 1;
          }
          if (obs) obs->on_branch(br);
          sr.branches.push_back(std::move(br));
          break;
        }
        case OpCode::wait_trigger:
          l.state = detail::LaneState::waiting;
          if (obs) obs->on_wait_trigger(shot, prog.channel, l.t);
          break;
      }
    }

    std::int64_t end = t_shot;
    for (const auto& l : lanes) end = std::max(end, l.t);
    sr.end_ns = end;
    if (obs) obs->on_shot_end(shot, end);
    result.tally.shots += 1;
    result.shots.push_back(std::move(sr));
    t_shot = end + cfg.shot_gap_ns;
  }
  return result;
}

/// Collects every executed edge, grouped by channel in time order.
class EdgeRecorder : public Observer {
 public:
  void on_edge(const ExecutedEdge& e) override { edges_[e.channel].push_back(e); }
  const std::map<std::uint8_t, std::vector<ExecutedEdge>>& edges() const { return edges_; }

 private:
  std::map<std::uint8_t, std::vector<ExecutedEdge>> edges_;
};

/// Normalised output of one channel sampled once per sysclk cycle over
/// [t0_ns, t1_ns). Samples outside every edge are zero. Shaped edges scale
/// the DDS output by the VGA gain for the precompensated, zero-order-held
/// envelope on the shaping DAC.
inline std::vector<double> render_channel(std::span<const ExecutedEdge> edges, std::int64_t t0_ns,
                                          std::int64_t t1_ns, const Timebase& tb = {}, const VgaModel& vga = {}) {
  std::vector<double> out;
  if (t1_ns <= t0_ns) return out;
  const std::uint64_t n = tb.cycles_from_ns(static_cast<std::uint64_t>(t1_ns - t0_ns));
  out.assign(n, 0.0);
  const double ns_per_cycle = 1e9 / static_cast<double>(tb.sysclk_hz);
  const double dac_ns = 1e9 / vga.dac_rate_hz;
  const auto grain = static_cast<double>(tb.event_grain_ns);

  for (const auto& e : edges) {
    std::int64_t a = std::max(e.t_ns, t0_ns);
    std::int64_t b = std::min(e.t_ns + e.wait_ns, t1_ns);
    if (a >= b) continue;
    auto first = tb.cycles_from_ns(static_cast<std::uint64_t>(a - t0_ns));
    auto last = tb.cycles_from_ns(static_cast<std::uint64_t>(b - t0_ns));
    auto offset = tb.cycles_from_ns(static_cast<std::uint64_t>(a - e.t_ns));
    NcoState s{0, e.words, 0};
    fast_forward(s, offset);
    const double len_ns = static_cast<double>(e.wait_ns);
    for (std::uint64_t k = first; k < last && k < n; ++k) {
      double v = level_to_amplitude(quantize_sample(ideal_sample(s)));
      if (e.shape && e.shape->kind != ShapeKind::rectangular) {
        double t_rel = static_cast<double>(k - first + offset) * ns_per_cycle;
        double held = std::floor(t_rel / dac_ns) * dac_ns;
        double env = envelope_at(e.shape->kind, held, e.shape->rise_grains * grain, len_ns);
        v *= vga_gain_linear(quantize_control(precompensate_voltage(env, vga), vga).volts, vga);
      }
      out[k] = v;
      fast_forward(s, 1);
    }
  }
  return out;
}

}  // namespace ddsq
