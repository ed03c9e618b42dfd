#pragma once

// Binary layout of an encoded channel program (little-endian throughout):
//
//   header (10 bytes)   "DDSQ" | version u8 | channel u8 | edge_count u16 | instr_count u16
//   edge   (16 bytes)   wait u48 | ftw u32 | pow u16 | asf u14 + flags u2 | shape_ref u16
//   instr  ( 4 bytes)   opcode u4 (bits 31..28) | operand u28
//
// flags: bit 14 = coherent phase, bit 15 = detection window.
// shape_ref: 0xFFFF = none; otherwise kind u2 | rise_grains u14.
// For a detection edge shape_ref holds the photon-counter mask.
//
// instr_count counts 4-byte words. Loop and Branch carry one extra word:
//   PLAY    operand = edge index
//   LOOP    operand = body words;                     extra = iteration count u32
//   BRANCH  operand = then words u14 | else words u14; extra = mask u8 | threshold u24
//   WAIT    operand = 0
// Bodies follow their header word in order (then-body before else-body).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/program.hpp"

namespace ddsq {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'D', 'D', 'S', 'Q'};
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kMaxEdges = 0xFFFF;
inline constexpr std::size_t kMaxInstructionWords = 0xFFFF;
inline constexpr std::uint16_t kNoShape = 0xFFFF;

struct EncodedProgram {
  std::vector<std::uint8_t> bytes;

  std::size_t byte_length() const noexcept { return bytes.size(); }
};

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint64_t v, int nbytes) {
    for (int i = 0; i < nbytes; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t get(int nbytes) {
    if (pos_ + static_cast<std::size_t>(nbytes) > in_.size()) throw DecodeError("truncated input");
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(nbytes);
    return v;
  }

  std::size_t position() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::uint32_t word(OpCode op, std::uint32_t operand) {
  return (static_cast<std::uint32_t>(op) << 28) | (operand & 0x0FFFFFFFu);
}

inline void encode_list(const InstructionList& list, std::vector<std::uint32_t>& out) {
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play: out.push_back(word(OpCode::play, ins.edge)); break;
      case OpCode::wait_trigger: out.push_back(word(OpCode::wait_trigger, 0)); break;
      case OpCode::loop: {
        auto n = instruction_words(ins.body);
        if (n > 0x0FFFFFFF) throw RangeError("loop body too large to encode");
        out.push_back(word(OpCode::loop, static_cast<std::uint32_t>(n)));
        out.push_back(ins.count);
        encode_list(ins.body, out);
        break;
      }
      case OpCode::branch: {
        auto a = instruction_words(ins.body);
        auto b = instruction_words(ins.else_body);
        if (a > 0x3FFF || b > 0x3FFF) throw RangeError("branch body exceeds 16383 words");
        out.push_back(word(OpCode::branch, static_cast<std::uint32_t>((a << 14) | b)));
        out.push_back((static_cast<std::uint32_t>(ins.counter_mask) << 24) | ins.threshold);
        encode_list(ins.body, out);
        encode_list(ins.else_body, out);
        break;
      }
    }
  }
}

inline InstructionList decode_list(std::span<const std::uint32_t> words, std::size_t edge_count, bool in_branch) {
  InstructionList out;
  std::size_t i = 0;
  auto need = [&](std::size_t n) {
    if (i + n > words.size()) throw DecodeError("instruction body overruns its enclosing block");
  };
  while (i < words.size()) {
    std::uint32_t w = words[i++];
    auto op = static_cast<OpCode>(w >> 28);
    std::uint32_t operand = w & 0x0FFFFFFFu;
    switch (op) {
      case OpCode::play:
        if (operand >= edge_count) throw DecodeError("edge index " + std::to_string(operand) + " out of range");
        out.push_back(Instruction::play(operand));
        break;
      case OpCode::wait_trigger:
        if (operand != 0) throw DecodeError("trigger wait with non-zero operand");
        if (in_branch) throw DecodeError("trigger wait inside a branch body");
        out.push_back(Instruction::wait_trigger());
        break;
      case OpCode::loop: {
        need(1);
        std::uint32_t count = words[i++];
        if (count == 0) throw DecodeError("loop count of zero");
        need(operand);
        auto body = decode_list(words.subspan(i, operand), edge_count, in_branch);
        i += operand;
        out.push_back(Instruction::loop(count, std::move(body)));
        break;
      }
      case OpCode::branch: {
        need(1);
        std::uint32_t extra = words[i++];
        std::size_t a = operand >> 14;
        std::size_t b = operand & 0x3FFF;
        need(a + b);
        auto then_body = decode_list(words.subspan(i, a), edge_count, true);
        auto else_body = decode_list(words.subspan(i + a, b), edge_count, true);
        i += a + b;
        auto mask = static_cast<std::uint8_t>(extra >> 24);
        if (mask == 0) throw DecodeError("branch with empty counter mask");
        out.push_back(Instruction::branch(mask, extra & kMaxThreshold, std::move(then_body), std::move(else_body)));
        break;
      }
      default: throw DecodeError("unknown opcode " + std::to_string(static_cast<unsigned>(op)));
    }
  }
  return out;
}

}  // namespace detail

inline EncodedProgram encode(const SequenceProgram& p) {
  if (p.edges.size() > kMaxEdges) throw RangeError("edge table overflow: more than 65535 unique edges");
  validate(p);
  std::vector<std::uint32_t> words;
  detail::encode_list(p.program, words);
  if (words.size() > kMaxInstructionWords) throw RangeError("program exceeds 65535 instruction words");

  EncodedProgram enc;
  enc.bytes.reserve(encoded_size(p));
  detail::ByteWriter w(enc.bytes);
  for (auto c : kMagic) w.put(c, 1);
  w.put(kFormatVersion, 1);
  w.put(p.channel, 1);
  w.put(p.edges.size(), 2);
  w.put(words.size(), 2);
  for (const auto& e : p.edges) {
    w.put(e.wait_grains, 6);
    w.put(e.words.ftw, 4);
    w.put(e.words.pow, 2);
    std::uint16_t asf_flags = e.words.asf;
    if (e.phase_mode == PhaseMode::coherent) asf_flags |= 1u << 14;
    if (e.detect_mask) asf_flags |= 1u << 15;
    w.put(asf_flags, 2);
    std::uint16_t ref = kNoShape;
    if (e.detect_mask) ref = *e.detect_mask;
    else if (e.shape) ref = e.shape->pack();
    w.put(ref, 2);
  }
  for (auto word : words) w.put(word, 4);
  return enc;
}

namespace detail {

inline SequenceProgram decode_one(ByteReader& r) {
  for (auto c : kMagic)
    if (r.get(1) != c) throw DecodeError("bad magic");
  auto version = r.get(1);
  if (version != kFormatVersion) throw DecodeError("unsupported format version " + std::to_string(version));
  SequenceProgram p;
  p.channel = static_cast<std::uint8_t>(r.get(1));
  if (p.channel >= kMaxChannels) throw DecodeError("channel index out of range");
  auto edge_count = static_cast<std::size_t>(r.get(2));
  auto word_count = static_cast<std::size_t>(r.get(2));
  p.edges.reserve(edge_count);
  for (std::size_t i = 0; i < edge_count; ++i) {
    EdgeEvent e;
    e.wait_grains = r.get(6);
    if (e.wait_grains == 0) throw DecodeError("edge with zero wait");
    e.words.ftw = static_cast<std::uint32_t>(r.get(4));
    e.words.pow = static_cast<std::uint16_t>(r.get(2));
    auto asf_flags = static_cast<std::uint16_t>(r.get(2));
    e.words.asf = asf_flags & kAsfMax;
    e.phase_mode = (asf_flags & (1u << 14)) ? PhaseMode::coherent : PhaseMode::absolute;
    auto ref = static_cast<std::uint16_t>(r.get(2));
    if (asf_flags & (1u << 15)) {
      if (ref == 0 || ref > 0xFF) throw DecodeError("detection edge with invalid counter mask");
      e.detect_mask = static_cast<std::uint8_t>(ref);
    } else if (ref != kNoShape) {
      auto s = ShapeRef::unpack(ref);
      if (static_cast<unsigned>(s.kind) > 2) throw DecodeError("unknown shape kind");
      e.shape = s;
    }
    p.edges.push_back(e);
  }
  std::vector<std::uint32_t> words(word_count);
  for (auto& w : words) w = static_cast<std::uint32_t>(r.get(4));
  p.program = decode_list(words, edge_count, false);
  return p;
}

}  // namespace detail

inline SequenceProgram decode(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  auto p = detail::decode_one(r);
  if (!r.done()) throw DecodeError("trailing bytes after program");
  return p;
}

inline SequenceProgram decode(const EncodedProgram& e) { return decode(std::span<const std::uint8_t>(e.bytes)); }

/// Decode a file holding several back-to-back channel programs.
inline std::vector<SequenceProgram> decode_all(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  std::vector<SequenceProgram> out;
  while (!r.done()) out.push_back(detail::decode_one(r));
  return out;
}

inline bool has_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && bytes[0] == kMagic[0] && bytes[1] == kMagic[1] && bytes[2] == kMagic[2] &&
         bytes[3] == kMagic[3];
}

}  // namespace ddsq
