#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/timebase.hpp"

namespace ddsq {

inline constexpr unsigned kChannelsPerCard = 4;
inline constexpr unsigned kMaxCards = 8;
inline constexpr unsigned kMaxChannels = kChannelsPerCard * kMaxCards;  // 32
inline constexpr unsigned kPhotonCounters = 8;

inline constexpr std::uint64_t kMaxWaitGrains = (std::uint64_t{1} << 48) - 1;
inline constexpr std::uint32_t kMaxRiseGrains = (1u << 14) - 1;
inline constexpr std::uint32_t kMaxThreshold = (1u << 24) - 1;

enum class PhaseMode : std::uint8_t { absolute = 0, coherent = 1 };

enum class ShapeKind : std::uint8_t { rectangular = 0, hann = 1, blackman = 2 };

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::rectangular: return "rect";
    case ShapeKind::hann: return "hann";
    case ShapeKind::blackman: return "blackman";
  }
  return "?";
}

/// Amplitude envelope of an edge. Shapes are addressed by (kind, rise time)
/// and packed into the 16-bit shape reference of the edge record.
struct ShapeRef {
  ShapeKind kind = ShapeKind::hann;
  std::uint16_t rise_grains = 0;

  std::uint16_t pack() const {
    return static_cast<std::uint16_t>((static_cast<unsigned>(kind) << 14) | (rise_grains & kMaxRiseGrains));
  }
  static ShapeRef unpack(std::uint16_t v) {
    return ShapeRef{static_cast<ShapeKind>(v >> 14), static_cast<std::uint16_t>(v & kMaxRiseGrains)};
  }

  friend bool operator==(const ShapeRef&, const ShapeRef&) = default;
};

/// One timed change of the channel output. The words take effect when the
/// edge fires and are held for `wait_grains` event grains, after which the
/// next instruction executes.
struct EdgeEvent {
  std::uint64_t wait_grains = 1;
  TuningWordSet words{};
  std::optional<ShapeRef> shape;
  PhaseMode phase_mode = PhaseMode::absolute;
  /// Photon counters gated open while this edge is held (empty: not a detection window).
  std::optional<std::uint8_t> detect_mask;

  friend bool operator==(const EdgeEvent&, const EdgeEvent&) = default;
};

enum class OpCode : std::uint8_t { play = 1, loop = 2, branch = 3, wait_trigger = 4 };

struct Instruction {
  OpCode op = OpCode::play;
  std::uint32_t edge = 0;          // play
  std::uint32_t count = 0;         // loop iterations
  std::uint8_t counter_mask = 0;   // branch
  std::uint32_t threshold = 0;     // branch, 24 bits
  std::vector<Instruction> body;   // loop body, or branch taken on "bright"
  std::vector<Instruction> else_body;

  static Instruction play(std::uint32_t idx) {
    Instruction i;
    i.op = OpCode::play;
    i.edge = idx;
    return i;
  }
  static Instruction loop(std::uint32_t n, std::vector<Instruction> body) {
    Instruction i;
    i.op = OpCode::loop;
    i.count = n;
    i.body = std::move(body);
    return i;
  }
  static Instruction branch(std::uint8_t mask, std::uint32_t threshold, std::vector<Instruction> then_body,
                            std::vector<Instruction> else_body) {
    Instruction i;
    i.op = OpCode::branch;
    i.counter_mask = mask;
    i.threshold = threshold;
    i.body = std::move(then_body);
    i.else_body = std::move(else_body);
    return i;
  }
  static Instruction wait_trigger() {
    Instruction i;
    i.op = OpCode::wait_trigger;
    return i;
  }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

using InstructionList = std::vector<Instruction>;

/// Compressed event stream for one rf channel.
struct SequenceProgram {
  std::uint8_t channel = 0;
  std::vector<EdgeEvent> edges;
  InstructionList program;

  friend bool operator==(const SequenceProgram&, const SequenceProgram&) = default;
};

// ---------------------------------------------------------------------------
// Sizes of the binary encoding (see codec.hpp)

inline constexpr std::size_t kHeaderBytes = 10;
inline constexpr std::size_t kEdgeBytes = 16;
inline constexpr std::size_t kWordBytes = 4;

/// Number of 4-byte instruction words `list` occupies.
inline std::size_t instruction_words(const InstructionList& list) {
  std::size_t n = 0;
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play:
      case OpCode::wait_trigger: n += 1; break;
      case OpCode::loop: n += 2 + instruction_words(ins.body); break;
      case OpCode::branch: n += 2 + instruction_words(ins.body) + instruction_words(ins.else_body); break;
    }
  }
  return n;
}

inline std::size_t encoded_size(const SequenceProgram& p) {
  return kHeaderBytes + kEdgeBytes * p.edges.size() + kWordBytes * instruction_words(p.program);
}

inline void validate_edge(const EdgeEvent& e) {
  e.words.validate();
  if (e.wait_grains == 0 || e.wait_grains > kMaxWaitGrains)
    throw RangeError("edge wait must be in [1, 2^48) grains");
  if (e.shape && e.detect_mask) throw RangeError("a detection edge cannot carry a shape");
  if (e.shape && (static_cast<unsigned>(e.shape->kind) > 2 || e.shape->rise_grains > kMaxRiseGrains))
    throw RangeError("invalid shape reference");
  if (e.detect_mask && *e.detect_mask == 0) throw RangeError("detection edge needs a non-empty counter mask");
}

namespace detail {

inline void validate_list(const InstructionList& list, std::size_t edge_count, bool in_branch) {
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play:
        if (ins.edge >= edge_count) throw RangeError("edge index " + std::to_string(ins.edge) + " out of range");
        break;
      case OpCode::loop:
        if (ins.count == 0) throw RangeError("loop count must be >= 1");
        validate_list(ins.body, edge_count, in_branch);
        break;
      case OpCode::branch:
        if (ins.counter_mask == 0) throw RangeError("branch needs a non-empty counter mask");
        if (ins.threshold > kMaxThreshold) throw RangeError("branch threshold exceeds 24 bits");
        validate_list(ins.body, edge_count, true);
        validate_list(ins.else_body, edge_count, true);
        break;
      case OpCode::wait_trigger:
        if (in_branch) throw RangeError("trigger wait inside a branch body");
        break;
    }
  }
}

}  // namespace detail

/// Structural validity: indices in range, positive loop counts, field widths.
inline void validate(const SequenceProgram& p) {
  if (p.channel >= kMaxChannels) throw RangeError("channel index must be < 32");
  for (const auto& e : p.edges) validate_edge(e);
  detail::validate_list(p.program, p.edges.size(), false);
}

/// Duration of `list` in event grains, assuming branch bodies are balanced
/// (the longer body is counted). Trigger waits contribute nothing.
inline std::uint64_t duration_grains(const InstructionList& list, const std::vector<EdgeEvent>& edges) {
  std::uint64_t total = 0;
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play: total += edges.at(ins.edge).wait_grains; break;
      case OpCode::loop: total += ins.count * duration_grains(ins.body, edges); break;
      case OpCode::branch: {
        auto a = duration_grains(ins.body, edges);
        auto b = duration_grains(ins.else_body, edges);
        total += a > b ? a : b;
        break;
      }
      case OpCode::wait_trigger: break;
    }
  }
  return total;
}

/// Number of PlayEdge executions when every loop is unrolled (then-bodies taken).
inline std::uint64_t unrolled_edge_count(const InstructionList& list) {
  std::uint64_t n = 0;
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play: n += 1; break;
      case OpCode::loop: n += ins.count * unrolled_edge_count(ins.body); break;
      case OpCode::branch: n += unrolled_edge_count(ins.body); break;
      case OpCode::wait_trigger: break;
    }
  }
  return n;
}

/// Played edges that emit rf outside a detection window, taking the then-body of branches.
inline std::uint64_t unrolled_pulse_count(const InstructionList& list, const std::vector<EdgeEvent>& edges) {
  std::uint64_t n = 0;
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play: {
        const auto& e = edges.at(ins.edge);
        n += (e.words.asf > 0 && !e.detect_mask) ? 1 : 0;
        break;
      }
      case OpCode::loop: n += ins.count * unrolled_pulse_count(ins.body, edges); break;
      case OpCode::branch: n += unrolled_pulse_count(ins.body, edges); break;
      case OpCode::wait_trigger: break;
    }
  }
  return n;
}

}  // namespace ddsq
