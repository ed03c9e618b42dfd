#pragma once

// Compiler for the line-oriented pulse-program language.
//
//   channel <n> { ... }
//   pulse f=<freq> [amp=<0..1>] [phase=<rad|coherent[:rad]>] len=<dur> [shape=<name>(rise=<dur>)]
//   detect len=<dur> counter=<mask> [f=<freq> amp=<0..1> phase=...]
//   wait <dur>
//   repeat <n> { ... }
//   branch counter=<mask> threshold=<n> { ... } [else { ... }]
//   trigger
//
// '#' starts a comment. Durations take ns/us/ms/s suffixes and must be whole
// multiples of the event grain.

#include <cctype>
#include <cmath>
#include <cerrno>
#include <initializer_list>
#include <numbers>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/program.hpp"
#include "ddsq/timebase.hpp"

namespace ddsq {

namespace dsl {

enum class TokKind { word, lbrace, rbrace, newline, end };

struct Token {
  TokKind kind;
  std::string text;
  std::size_t line;
  std::size_t col;
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t n) {
    i += n;
    col += n;
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      out.push_back({TokKind::newline, "\n", line, col});
      ++i;
      ++line;
      col = 1;
    } else if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
    } else if (c == ' ' || c == '\t' || c == '\r') {
      advance(1);
    } else if (c == '{') {
      out.push_back({TokKind::lbrace, "{", line, col});
      advance(1);
    } else if (c == '}') {
      out.push_back({TokKind::rbrace, "}", line, col});
      advance(1);
    } else {
      std::size_t start = i, start_col = col;
      while (i < src.size() && !std::isspace(static_cast<unsigned char>(src[i])) && src[i] != '{' &&
             src[i] != '}' && src[i] != '#')
        advance(1);
      out.push_back({TokKind::word, std::string(src.substr(start, i - start)), line, start_col});
    }
  }
  out.push_back({TokKind::end, "", line, col});
  return out;
}

/// Exact decimal literal: value = mantissa / 10^scale.
struct Decimal {
  std::uint64_t mantissa = 0;
  unsigned scale = 0;
};

inline std::optional<std::pair<Decimal, std::string_view>> split_decimal(std::string_view s) {
  Decimal d;
  std::size_t i = 0;
  bool digits = false, dot = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c >= '0' && c <= '9') {
      if (d.mantissa > (UINT64_MAX - 9) / 10) return std::nullopt;
      d.mantissa = d.mantissa * 10 + static_cast<unsigned>(c - '0');
      if (dot) ++d.scale;
      digits = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (!digits) return std::nullopt;
  return std::make_pair(d, s.substr(i));
}

}  // namespace dsl

class Compiler {
 public:
  explicit Compiler(Timebase tb = {}) : tb_(tb) { tb_.validate(); }

  std::vector<SequenceProgram> compile(std::string_view source) {
    toks_ = dsl::tokenize(source);
    pos_ = 0;
    std::map<unsigned, SequenceProgram> programs;
    skip_newlines();
    while (peek().kind != dsl::TokKind::end) {
      const auto& kw = expect_word("'channel'");
      if (kw.text != "channel") throw ParseError(kw.line, kw.col, "expected 'channel', found '" + kw.text + "'");
      const auto& num = expect_word("channel number");
      auto ch = parse_uint(num);
      if (ch >= kMaxChannels)
        throw SemanticError(num.line, "undefined channel " + std::to_string(ch) + " (valid: 0..31)");
      if (programs.count(static_cast<unsigned>(ch)))
        throw SemanticError(num.line, "channel " + std::to_string(ch) + " defined twice");
      expect(dsl::TokKind::lbrace, "'{'");
      edges_.clear();
      edge_index_.clear();
      auto block = compile_block(false);
      expect(dsl::TokKind::rbrace, "'}'");
      end_of_statement();
      SequenceProgram p;
      p.channel = static_cast<std::uint8_t>(ch);
      p.edges = std::move(edges_);
      p.program = std::move(block.list);
      programs.emplace(static_cast<unsigned>(ch), std::move(p));
      skip_newlines();
    }
    std::vector<SequenceProgram> out;
    for (auto& [ch, p] : programs) out.push_back(std::move(p));
    return out;
  }

 private:
  struct Block {
    InstructionList list;
    std::uint64_t grains = 0;
    bool has_trigger = false;
  };

  using EdgeKey = std::tuple<std::uint64_t, std::uint32_t, std::uint16_t, std::uint16_t, int, int, int>;

  // -- token helpers --------------------------------------------------------

  const dsl::Token& peek() const { return toks_[pos_]; }
  const dsl::Token& next() { return toks_[pos_++]; }

  void skip_newlines() {
    while (peek().kind == dsl::TokKind::newline) ++pos_;
  }

  const dsl::Token& expect(dsl::TokKind k, const char* what) {
    const auto& t = peek();
    if (t.kind != k) throw ParseError(t.line, t.col, std::string("expected ") + what + describe(t));
    return next();
  }

  const dsl::Token& expect_word(const char* what) { return expect(dsl::TokKind::word, what); }

  static std::string describe(const dsl::Token& t) {
    switch (t.kind) {
      case dsl::TokKind::word: return ", found '" + t.text + "'";
      case dsl::TokKind::newline: return ", found end of line";
      case dsl::TokKind::end: return ", found end of input";
      case dsl::TokKind::lbrace: return ", found '{'";
      case dsl::TokKind::rbrace: return ", found '}'";
    }
    return "";
  }

  // A statement ends at a newline, a closing brace or the end of input.
  void end_of_statement() {
    const auto& t = peek();
    if (t.kind == dsl::TokKind::newline) {
      skip_newlines();
      return;
    }
    if (t.kind == dsl::TokKind::rbrace || t.kind == dsl::TokKind::end) return;
    throw ParseError(t.line, t.col, "unexpected '" + t.text + "' at end of statement");
  }

  // -- literal parsing ------------------------------------------------------

  static std::uint64_t parse_uint(const dsl::Token& t) {
    const std::string& s = t.text;
    int base = 10;
    std::size_t off = 0;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
      base = 16;
      off = 2;
    }
    if (off >= s.size()) throw ParseError(t.line, t.col, "expected an integer, found '" + s + "'");
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s.c_str() + off, &end, base);
    if (errno != 0 || *end != '\0' || s[off] == '-' || s[off] == '+')
      throw ParseError(t.line, t.col, "expected an integer, found '" + s + "'");
    return v;
  }

  static double parse_real(const dsl::Token& t, std::string_view s, std::string_view& rest) {
    std::string buf(s);
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str()) throw ParseError(t.line, t.col, "expected a number, found '" + buf + "'");
    rest = s.substr(static_cast<std::size_t>(end - buf.c_str()));
    return v;
  }

  double parse_frequency(const dsl::Token& t, std::string_view s) const {
    std::string_view unit;
    double v = parse_real(t, s, unit);
    double scale = 0;
    if (unit.empty() || unit == "Hz" || unit == "hz") scale = 1;
    else if (unit == "kHz" || unit == "khz") scale = 1e3;
    else if (unit == "MHz" || unit == "mhz") scale = 1e6;
    else if (unit == "GHz" || unit == "ghz") scale = 1e9;
    else throw ParseError(t.line, t.col, "unknown frequency unit '" + std::string(unit) + "'");
    return v * scale;
  }

  /// Duration in event grains; rejects values that are not whole grains.
  std::uint64_t parse_duration(const dsl::Token& t, std::string_view s) const {
    auto split = dsl::split_decimal(s);
    if (!split) throw ParseError(t.line, t.col, "malformed duration '" + std::string(s) + "'");
    auto [dec, unit] = *split;
    std::uint64_t ns_per_unit = 0;
    if (unit.empty() || unit == "ns") ns_per_unit = 1;
    else if (unit == "us" || unit == "\xC2\xB5s" || unit == "\xCE\xBCs") ns_per_unit = 1'000;
    else if (unit == "ms") ns_per_unit = 1'000'000;
    else if (unit == "s") ns_per_unit = 1'000'000'000;
    else throw ParseError(t.line, t.col, "unknown duration unit '" + std::string(unit) + "'");
    unsigned __int128 num = static_cast<unsigned __int128>(dec.mantissa) * ns_per_unit;
    unsigned __int128 den = 1;
    for (unsigned i = 0; i < dec.scale; ++i) den *= 10;
    if (num % den != 0)
      throw SemanticError(t.line, "duration '" + std::string(s) + "' is not a whole number of nanoseconds");
    unsigned __int128 ns = num / den;
    if (ns % tb_.event_grain_ns != 0)
      throw SemanticError(t.line, "duration '" + std::string(s) + "' is not a multiple of the " +
                                      std::to_string(tb_.event_grain_ns) + " ns event grain");
    unsigned __int128 grains = ns / tb_.event_grain_ns;
    if (grains > kMaxWaitGrains) throw SemanticError(t.line, "duration '" + std::string(s) + "' too long");
    return static_cast<std::uint64_t>(grains);
  }

  struct Attr {
    std::string key;
    std::string value;
    const dsl::Token* tok;
  };

  std::vector<Attr> parse_attrs() {
    std::vector<Attr> attrs;
    while (peek().kind == dsl::TokKind::word) {
      const auto& t = next();
      auto eq = t.text.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == t.text.size())
        throw ParseError(t.line, t.col, "expected key=value, found '" + t.text + "'");
      attrs.push_back({t.text.substr(0, eq), t.text.substr(eq + 1), &t});
    }
    return attrs;
  }

  static const Attr* find(const std::vector<Attr>& attrs, std::string_view key) {
    for (const auto& a : attrs)
      if (a.key == key) return &a;
    return nullptr;
  }

  static void check_keys(const std::vector<Attr>& attrs, std::initializer_list<std::string_view> allowed) {
    for (const auto& a : attrs) {
      bool ok = false;
      for (auto k : allowed) ok = ok || a.key == k;
      if (!ok) throw ParseError(a.tok->line, a.tok->col, "unknown attribute '" + a.key + "'");
      for (const auto& b : attrs)
        if (&b != &a && b.key == a.key)
          throw ParseError(b.tok->line, b.tok->col, "duplicate attribute '" + a.key + "'");
    }
  }

  const Attr& require(const std::vector<Attr>& attrs, std::string_view key, const dsl::Token& stmt) {
    const Attr* a = find(attrs, key);
    if (!a) throw ParseError(stmt.line, stmt.col, "missing attribute '" + std::string(key) + "'");
    return *a;
  }

  // Reads f/amp/phase into `words` and `mode`.
  void parse_rf(const std::vector<Attr>& attrs, TuningWordSet& words, PhaseMode& mode, bool f_required,
                const dsl::Token& stmt) {
    const Attr* f = f_required ? &require(attrs, "f", stmt) : find(attrs, "f");
    if (f) {
      double hz = parse_frequency(*f->tok, f->value);
      try {
        words.ftw = ftw_from_freq(hz, tb_);
      } catch (const RangeError& e) {
        throw SemanticError(f->tok->line, e.what());
      }
    }
    if (const Attr* a = find(attrs, "amp")) {
      std::string_view rest;
      double amp = parse_real(*a->tok, a->value, rest);
      if (!rest.empty()) throw ParseError(a->tok->line, a->tok->col, "malformed amplitude '" + a->value + "'");
      try {
        words.asf = asf_from_amplitude(amp);
      } catch (const RangeError& e) {
        throw SemanticError(a->tok->line, e.what());
      }
    } else {
      words.asf = f ? static_cast<std::uint16_t>(kAsfMax) : 0;
    }
    mode = PhaseMode::absolute;
    if (const Attr* p = find(attrs, "phase")) {
      std::string_view v = p->value;
      if (v.rfind("coherent", 0) == 0) {
        mode = PhaseMode::coherent;
        v.remove_prefix(8);
        if (v.empty()) return;
        if (v[0] != ':' && v[0] != '+')
          throw ParseError(p->tok->line, p->tok->col, "malformed phase '" + p->value + "'");
        v.remove_prefix(1);
      }
      std::string_view rest;
      double rad = parse_real(*p->tok, v, rest);
      if (rest == "deg") rad *= std::numbers::pi / 180.0;
      else if (!rest.empty() && rest != "rad")
        throw ParseError(p->tok->line, p->tok->col, "malformed phase '" + p->value + "'");
      if (!std::isfinite(rad)) throw SemanticError(p->tok->line, "phase must be finite");
      words.pow = pow_from_phase(rad);
    }
  }

  std::optional<ShapeRef> parse_shape(const Attr& a, std::uint64_t len_grains) const {
    const std::string& v = a.value;
    if (v == "rect" || v == "rectangular") return std::nullopt;
    auto open = v.find('(');
    if (open == std::string::npos || v.back() != ')')
      throw ParseError(a.tok->line, a.tok->col, "malformed shape '" + v + "'");
    std::string name = v.substr(0, open);
    std::string arg = v.substr(open + 1, v.size() - open - 2);
    ShapeRef s;
    if (name == "hann") s.kind = ShapeKind::hann;
    else if (name == "blackman") s.kind = ShapeKind::blackman;
    else if (name == "rect" || name == "rectangular") s.kind = ShapeKind::rectangular;
    else throw SemanticError(a.tok->line, "unknown shape '" + name + "'");
    if (arg.rfind("rise=", 0) != 0) throw ParseError(a.tok->line, a.tok->col, "shape needs rise=<dur>");
    std::uint64_t rise = parse_duration(*a.tok, std::string_view(arg).substr(5));
    if (rise > kMaxRiseGrains) throw SemanticError(a.tok->line, "shape rise time too long");
    if (2 * rise > len_grains) throw SemanticError(a.tok->line, "shape rise and fall exceed the pulse length");
    s.rise_grains = static_cast<std::uint16_t>(rise);
    return s;
  }

  std::uint8_t parse_mask(const Attr& a) const {
    auto v = parse_uint(dsl::Token{dsl::TokKind::word, a.value, a.tok->line, a.tok->col});
    if (v == 0 || v > 0xFF) throw SemanticError(a.tok->line, "counter mask must select one of the 8 counters");
    return static_cast<std::uint8_t>(v);
  }

  // -- edge table -----------------------------------------------------------

  std::uint32_t intern(const EdgeEvent& e) {
    EdgeKey key{e.wait_grains, e.words.ftw, e.words.pow, e.words.asf, static_cast<int>(e.phase_mode),
                e.shape ? e.shape->pack() : -1, e.detect_mask ? *e.detect_mask : -1};
    auto it = edge_index_.find(key);
    if (it != edge_index_.end()) return it->second;
    auto idx = static_cast<std::uint32_t>(edges_.size());
    edges_.push_back(e);
    edge_index_.emplace(key, idx);
    return idx;
  }

  void emit_edge(Block& b, const EdgeEvent& e) {
    b.list.push_back(Instruction::play(intern(e)));
    b.grains += e.wait_grains;
  }

  EdgeEvent idle_edge(std::uint64_t grains) const {
    EdgeEvent e;
    e.wait_grains = grains;
    return e;
  }

  // -- statements -----------------------------------------------------------

  Block compile_block(bool in_branch) {
    Block b;
    skip_newlines();
    while (peek().kind == dsl::TokKind::word) {
      const auto& kw = next();
      if (kw.text == "pulse") {
        auto attrs = parse_attrs();
        check_keys(attrs, {"f", "amp", "phase", "len", "shape"});
        EdgeEvent e;
        const auto& len = require(attrs, "len", kw);
        e.wait_grains = parse_duration(*len.tok, len.value);
        if (e.wait_grains == 0) throw SemanticError(len.tok->line, "pulse length must be at least one grain");
        parse_rf(attrs, e.words, e.phase_mode, true, kw);
        if (const Attr* s = find(attrs, "shape")) e.shape = parse_shape(*s, e.wait_grains);
        emit_edge(b, e);
      } else if (kw.text == "detect") {
        auto attrs = parse_attrs();
        check_keys(attrs, {"f", "amp", "phase", "len", "counter"});
        EdgeEvent e;
        const auto& len = require(attrs, "len", kw);
        e.wait_grains = parse_duration(*len.tok, len.value);
        if (e.wait_grains == 0) throw SemanticError(len.tok->line, "detection window must be at least one grain");
        e.detect_mask = parse_mask(require(attrs, "counter", kw));
        parse_rf(attrs, e.words, e.phase_mode, false, kw);
        emit_edge(b, e);
      } else if (kw.text == "wait") {
        const auto& d = expect_word("duration");
        auto grains = parse_duration(d, d.text);
        if (grains == 0) throw SemanticError(d.line, "wait must be at least one grain");
        emit_edge(b, idle_edge(grains));
      } else if (kw.text == "trigger") {
        if (in_branch) throw SemanticError(kw.line, "'trigger' is not allowed inside a branch body");
        b.list.push_back(Instruction::wait_trigger());
        b.has_trigger = true;
      } else if (kw.text == "repeat") {
        const auto& n = expect_word("repeat count");
        auto count = parse_uint(n);
        if (count == 0 || count > UINT32_MAX)
          throw SemanticError(n.line, "repeat count must be in [1, 2^32)");
        expect(dsl::TokKind::lbrace, "'{'");
        auto body = compile_block(in_branch);
        expect(dsl::TokKind::rbrace, "'}'");
        if (body.list.empty()) throw SemanticError(kw.line, "empty repeat body");
        b.grains += count * body.grains;
        b.has_trigger = b.has_trigger || body.has_trigger;
        b.list.push_back(Instruction::loop(static_cast<std::uint32_t>(count), std::move(body.list)));
      } else if (kw.text == "branch") {
        compile_branch(b, kw);
      } else {
        throw ParseError(kw.line, kw.col, "unknown statement '" + kw.text + "'");
      }
      end_of_statement();
    }
    return b;
  }

  void compile_branch(Block& b, const dsl::Token& kw) {
    auto attrs = parse_attrs();
    check_keys(attrs, {"counter", "threshold"});
    auto mask = parse_mask(require(attrs, "counter", kw));
    const auto& thr = require(attrs, "threshold", kw);
    auto threshold = parse_uint(dsl::Token{dsl::TokKind::word, thr.value, thr.tok->line, thr.tok->col});
    if (threshold > kMaxThreshold) throw SemanticError(thr.tok->line, "threshold exceeds 24 bits");
    expect(dsl::TokKind::lbrace, "'{'");
    auto then_b = compile_block(true);
    expect(dsl::TokKind::rbrace, "'}'");
    Block else_b;
    std::size_t save = pos_;
    skip_newlines();
    if (peek().kind == dsl::TokKind::word && peek().text == "else") {
      next();
      expect(dsl::TokKind::lbrace, "'{'");
      else_b = compile_block(true);
      expect(dsl::TokKind::rbrace, "'}'");
    } else {
      pos_ = save;
    }
    // Both outcomes must leave the channel at the same point of the timeline.
    if (else_b.list.empty() && then_b.grains > 0) emit_edge(else_b, idle_edge(then_b.grains));
    else if (then_b.list.empty() && else_b.grains > 0) emit_edge(then_b, idle_edge(else_b.grains));
    if (then_b.grains != else_b.grains)
      throw SemanticError(kw.line, "branch bodies differ in duration (" + std::to_string(then_b.grains) + " vs " +
                                       std::to_string(else_b.grains) + " grains)");
    b.grains += then_b.grains;
    b.list.push_back(Instruction::branch(mask, static_cast<std::uint32_t>(threshold), std::move(then_b.list),
                                         std::move(else_b.list)));
  }

  Timebase tb_;
  std::vector<dsl::Token> toks_;
  std::size_t pos_ = 0;
  std::vector<EdgeEvent> edges_;
  std::map<EdgeKey, std::uint32_t> edge_index_;
};

/// Compile pulse-program text into one program per declared channel, ordered by channel.
inline std::vector<SequenceProgram> compile(std::string_view source, const Timebase& tb = {}) {
  return Compiler(tb).compile(source);
}

}  // namespace ddsq
