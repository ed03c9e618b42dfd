#pragma once

// Command implementations behind the ddsq executable. Each returns a process
// exit code and writes only to the streams and paths it is given, so the
// commands can be driven from tests.
//
// Exit codes:
//   0  success
//   1  parse error: malformed program text, CSV or command input
//   2  semantic error: off-grid time, value out of range, band outside data
//   3  manifest error
//   4  a program referenced by a manifest failed to compile or decode
//   5  runtime sequencing or delivery error
//   6  I/O error

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ddsq/backplane.hpp"
#include "ddsq/codec.hpp"
#include "ddsq/dsl.hpp"
#include "ddsq/error.hpp"
#include "ddsq/fft.hpp"
#include "ddsq/manifest.hpp"
#include "ddsq/noise.hpp"
#include "ddsq/rf_chain.hpp"
#include "ddsq/simulator.hpp"

namespace ddsq {

enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 1,
  kExitSemantic = 2,
  kExitManifest = 3,
  kExitProgram = 4,
  kExitSequencing = 5,
  kExitIo = 6,
};

inline constexpr std::size_t kSizeBudgetBytes = 2048;

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  auto s = read_text(p);
  return {s.begin(), s.end()};
}

}  // namespace detail

// ---------------------------------------------------------------- compile

struct CompileReport {
  struct Channel {
    std::uint8_t channel = 0;
    std::size_t edges = 0;
    std::size_t words = 0;
    std::uint64_t played = 0;
    std::uint64_t pulses = 0;
    std::size_t bytes = 0;
  };
  std::vector<Channel> channels;
  std::size_t total_bytes = 0;
};

/// Compile source text into the concatenated binary of its channel programs.
/// A source with no channel block yields one header-only program for channel 0.
inline std::vector<std::uint8_t> compile_to_binary(std::string_view source, const Timebase& tb, CompileReport& rep) {
  auto programs = compile(source, tb);
  if (programs.empty()) programs.push_back(SequenceProgram{});
  std::vector<std::uint8_t> bin;
  for (const auto& p : programs) {
    auto enc = encode(p);
    rep.channels.push_back({p.channel, p.edges.size(), instruction_words(p.program),
                            unrolled_edge_count(p.program),
                            unrolled_pulse_count(p.program, p.edges), enc.byte_length()});
    bin.insert(bin.end(), enc.bytes.begin(), enc.bytes.end());
  }
  rep.total_bytes = bin.size();
  return bin;
}

inline int cmd_compile(const std::filesystem::path& src, const std::filesystem::path& out_path, std::ostream& out,
                       std::ostream& err, const Timebase& tb = {}) {
  std::string text;
  try {
    text = detail::read_text(src);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  CompileReport rep;
  std::vector<std::uint8_t> bin;
  try {
    bin = compile_to_binary(text, tb, rep);
  } catch (const ParseError& e) {
    err << src.string() << ":" << e.what() << "\n";
    return kExitParse;
  } catch (const SemanticError& e) {
    err << src.string() << ": " << e.what() << "\n";
    return kExitSemantic;
  } catch (const RangeError& e) {
    err << src.string() << ": " << e.what() << "\n";
    return kExitSemantic;
  }
  std::ofstream f(out_path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bin.data()), static_cast<std::streamsize>(bin.size()));
  if (!f) {
    err << "error: cannot write " << out_path.string() << "\n";
    return kExitIo;
  }
  for (const auto& c : rep.channels)
    out << "channel=" << unsigned(c.channel) << " edges=" << c.edges << " instr_words=" << c.words
        << " played=" << c.played
        << " pulses=" << c.pulses << " bytes=" << c.bytes << "\n";
  out << "total_bytes=" << rep.total_bytes << " budget=" << kSizeBudgetBytes
      << (rep.total_bytes <= kSizeBudgetBytes ? " within_budget" : " over_budget") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::pair<std::int64_t, std::int64_t>> window;
  std::uint32_t trace_shots = 10;  // shots written to the timeline
};

namespace detail {

inline std::string edge_detail(const ExecutedEdge& e, const Timebase& tb) {
  std::ostringstream d;
  d << "shot=" << e.shot << " edge=" << e.edge_index << " f_hz=" << fmt("%.6f", realized_freq(e.words.ftw, tb))
    << " ftw=" << e.words.ftw << " pow=" << e.words.pow << " asf=" << e.words.asf << " wait_ns=" << e.wait_ns;
  if (e.mode == PhaseMode::coherent) d << " coherent";
  if (e.shape) d << " shape=" << to_string(e.shape->kind) << "/rise_ns=" << e.shape->rise_grains * tb.event_grain_ns;
  if (e.detect_mask) d << " detect_mask=0x" << std::hex << unsigned(*e.detect_mask) << std::dec;
  if (e.conditional) d << " conditional";
  return d.str();
}

class RunWriter : public Observer {
 public:
  RunWriter(std::ostream& timeline, const Timebase& tb, std::uint32_t trace_shots,
            std::optional<std::pair<std::int64_t, std::int64_t>> window)
      : tl_(timeline), tb_(tb), trace_shots_(trace_shots), window_(window) {}

  void on_shot_start(std::uint32_t shot, std::int64_t t) override {
    if (shot < trace_shots_) tl_ << t << ",*,*,shot_start,shot=" << shot << "\n";
  }
  void on_trigger(std::uint32_t shot, std::int64_t t) override {
    if (shot < trace_shots_) tl_ << t << ",*,*,trigger,shot=" << shot << "\n";
  }
  void on_edge(const ExecutedEdge& e) override {
    if (e.shot < trace_shots_)
      tl_ << e.t_ns << "," << unsigned(e.card) << "," << unsigned(e.channel) << ",edge," << edge_detail(e, tb_)
          << "\n";
    if (e.words.asf > 0 && !e.detect_mask) carriers_[e.channel].insert(e.words.ftw);
    if (window_ && e.t_ns < window_->second && e.t_ns + e.wait_ns > window_->first) edges_[e.channel].push_back(e);
  }
  void on_detection(const DetectionWindow& w) override {
    if (w.shot >= trace_shots_) return;
    tl_ << w.start_ns << "," << unsigned(w.channel / kChannelsPerCard) << "," << unsigned(w.channel) << ",detect,shot=" << w.shot << " end_ns=" << w.end_ns
        << " mask=0x" << std::hex << unsigned(w.mask) << std::dec;
    if (w.sample.forced) tl_ << " playback=" << to_string(*w.sample.forced);
    else {
      tl_ << " counts=";
      for (unsigned i = 0; i < kPhotonCounters; ++i) tl_ << (i ? ":" : "") << w.sample.counts[i];
    }
    tl_ << "\n";
  }
  void on_branch(const BranchRecord& b) override {
    if (b.shot < trace_shots_)
      tl_ << b.branch_ns << "," << unsigned(b.card) << "," << unsigned(b.channel) << ",branch,shot=" << b.shot
          << " seq=" << b.branch_seq << " outcome=" << to_string(b.outcome)
          << " taken=" << (b.then_taken ? "then" : "else") << " update_done_ns="
          << (Rational(b.branch_ns) - b.budget.slack).to_decimal(3) << "\n";
  }
  void on_wait_trigger(std::uint32_t shot, std::uint8_t ch, std::int64_t t) override {
    if (shot < trace_shots_) tl_ << t << "," << unsigned(ch / kChannelsPerCard) << "," << unsigned(ch)
                                 << ",wait_trigger,shot=" << shot << "\n";
  }
  void on_channel_end(std::uint32_t shot, std::uint8_t ch, std::int64_t t) override {
    if (shot < trace_shots_) tl_ << t << "," << unsigned(ch / kChannelsPerCard) << "," << unsigned(ch)
                                 << ",end,shot=" << shot << "\n";
  }

  const std::map<std::uint8_t, std::vector<ExecutedEdge>>& window_edges() const { return edges_; }
  const std::map<std::uint8_t, std::set<std::uint32_t>>& carriers() const { return carriers_; }

 private:
  std::ostream& tl_;
  Timebase tb_;
  std::uint32_t trace_shots_;
  std::optional<std::pair<std::int64_t, std::int64_t>> window_;
  std::map<std::uint8_t, std::vector<ExecutedEdge>> edges_;
  std::map<std::uint8_t, std::set<std::uint32_t>> carriers_;
};

inline std::vector<SequenceProgram> load_programs(const RunManifest& m) {
  std::vector<SequenceProgram> all;
  for (const auto& path : m.programs) {
    auto bytes = read_bytes(path);
    std::vector<SequenceProgram> ps;
    try {
      if (has_magic(bytes)) ps = decode_all(bytes);
      else ps = compile(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), m.sim.timebase);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), e.column(), path.filename().string() + ": " + e.what());
    } catch (const SemanticError& e) {
      throw SemanticError(e.line(), path.filename().string() + ": " + e.what());
    }
    for (auto& p : ps) all.push_back(std::move(p));
  }
  std::set<unsigned> seen;
  for (const auto& p : all)
    if (!seen.insert(p.channel).second)
      throw ManifestError(0, "channel " + std::to_string(p.channel) + " is programmed by more than one file");
  return all;
}

}  // namespace detail

inline int cmd_run(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                   const RunOptions& opt, std::ostream& out, std::ostream& err) {
  RunManifest m;
  try {
    m = load_manifest(manifest_path);
  } catch (const ManifestError& e) {
    err << e.what() << "\n";
    return kExitManifest;
  }
  if (opt.seed) m.seed = *opt.seed;
  if (opt.window) m.window = opt.window;

  std::vector<SequenceProgram> programs;
  try {
    programs = detail::load_programs(m);
  } catch (const ManifestError& e) {
    err << e.what() << "\n";
    return kExitManifest;
  } catch (const Error& e) {
    err << "program: " << e.what() << "\n";
    return kExitProgram;
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    err << "error: cannot create " << out_dir.string() << "\n";
    return kExitIo;
  }

  std::ofstream timeline(out_dir / "timeline.csv");
  timeline << "t_ns,card,channel,event,detail\n";
  detail::RunWriter writer(timeline, m.sim.timebase, opt.trace_shots, m.window);
  auto source = m.source.make(m.seed);
  ExperimentResult res;
  try {
    res = run_experiment(programs, source, m.shots, m.sim, &writer);
  } catch (const SequencingError& e) {
    err << "sequencing error: " << e.what() << "\n";
    return kExitSequencing;
  } catch (const DeliveryError& e) {
    err << "delivery error: " << e.what() << "\n";
    return kExitSequencing;
  }

  std::ofstream outcomes(out_dir / "outcomes.csv");
  outcomes << "shot,channel,branch,counts,threshold,outcome,branch_taken,window_end_ns,branch_ns\n";
  std::ofstream feedback(out_dir / "feedback.csv");
  feedback << "shot,channel,branch,window_end_ns,branch_ns,detect_ns,decide_ns,update_ns,total_ns,slack_ns,"
              "observed_gap_ns,words,balanced\n";
  std::ofstream wire(out_dir / "wire.csv");
  wire << "commit_ns,card,bank,mem_addr,payload,frame\n";
  Rational worst_total;
  for (const auto& s : res.shots) {
    for (const auto& b : s.branches) {
      outcomes << s.shot << "," << unsigned(b.channel) << "," << b.branch_seq << ","
               << (b.forced ? std::string("-") : std::to_string(b.counts)) << "," << b.threshold << ","
               << to_string(b.outcome) << "," << (b.then_taken ? "then" : "else") << "," << b.window_end_ns << ","
               << b.branch_ns << "\n";
      const auto& g = b.budget;
      feedback << s.shot << "," << unsigned(b.channel) << "," << b.branch_seq << "," << b.window_end_ns << ","
               << b.branch_ns << "," << g.detect.to_decimal(3) << "," << g.decide.to_decimal(3) << ","
               << g.update.to_decimal(3) << "," << g.total().to_decimal(3) << "," << g.slack.to_decimal(3) << ","
               << g.observed_gap.to_decimal(3) << "," << b.commits.size() << "," << (g.balanced() ? "yes" : "no")
               << "\n";
      if (g.total() > worst_total) worst_total = g.total();
      for (const auto& c : b.commits) {
        char frame[16];
        std::snprintf(frame, sizeof frame, "%012llx", static_cast<unsigned long long>(encode_word(c.word)));
        wire << c.commit_ns.to_decimal(3) << "," << unsigned(c.card) << "," << unsigned(c.word.bank) << ","
             << c.word.mem_addr << "," << c.word.payload << "," << frame << "\n";
      }
    }
  }

  std::vector<std::string> warnings;
  for (const auto& [ch, ftws] : writer.carriers())
    for (auto ftw : ftws) {
      if (ftw == 0) continue;
      double f = realized_freq(ftw, m.sim.timebase);
      if (!m.band.contains(f))
        warnings.push_back("channel " + std::to_string(ch) + " carrier " + detail::fmt("%.3f", f) +
                           " Hz outside the analog band");
    }

  if (m.upconvert.kind != UpconvertSpec::Kind::none) {
    std::ofstream up(out_dir / "upconvert.csv");
    up << "channel,f_dds_hz,f_out_hz,image_hz,image_dbc\n";
    for (const auto& [ch, ftws] : writer.carriers())
      for (auto ftw : ftws) {
        if (ftw == 0) continue;
        double f = realized_freq(ftw, m.sim.timebase);
        up << unsigned(ch) << "," << detail::fmt("%.6f", f) << ",";
        if (m.upconvert.kind == UpconvertSpec::Kind::doubler) {
          DoublerChain c{m.upconvert.doubler.stages, f};
          up << detail::fmt("%.6f", c.output_freq_hz()) << ",-,-\n";
        } else {
          const auto& s = m.upconvert.ssb;
          up << detail::fmt("%.6f", s.desired_freq_hz(f)) << "," << detail::fmt("%.6f", s.image_freq_hz(f)) << ","
             << detail::fmt("%.3f", image_rejection_db(s.amp_imbalance, s.phase_error_rad)) << "\n";
        }
      }
  }

  std::vector<std::uint8_t> wave_channels = m.wave_channels;
  if (wave_channels.empty())
    for (const auto& p : programs) wave_channels.push_back(p.channel);
  if (m.window) {
    for (auto ch : wave_channels) {
      std::ofstream w(out_dir / ("waveform_ch" + std::to_string(ch) + ".csv"));
      w << "t_ns,amplitude\n";
      static const std::vector<ExecutedEdge> none;
      auto it = writer.window_edges().find(ch);
      const auto& edges = it == writer.window_edges().end() ? none : it->second;
      auto samples = render_channel(edges, m.window->first, m.window->second, m.sim.timebase);
      const double dt = 1e9 / static_cast<double>(m.sim.timebase.sysclk_hz);
      char buf[64];
      for (std::size_t k = 0; k < samples.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.3f,%.6f\n", static_cast<double>(m.window->first) + k * dt, samples[k]);
        w << buf;
      }
    }
  }

  const auto& t = res.tally;
  std::ofstream tally(out_dir / "tally.csv");
  tally << "key,value\nshots," << t.shots << "\nbranches," << t.branches << "\nbright," << t.bright << "\ndark,"
        << t.dark << "\nthen_taken," << t.then_taken << "\nelse_taken," << t.else_taken << "\nwith_truth,"
        << t.with_truth << "\nmisclassified," << t.misclassified << "\n";

  std::ostringstream rep;
  rep << "seed=" << m.seed << "\nshots=" << t.shots << "\nchannels=" << programs.size() << "\nbranches=" << t.branches
      << "\nbright=" << t.bright << " dark=" << t.dark << "\nthen=" << t.then_taken << " else=" << t.else_taken
      << "\nfeedback_worst_total_ns=" << worst_total.to_decimal(3) << "\nfeedback_path="
      << (m.sim.feedback.path == UpdatePath::wire ? "wire" : "spi") << "\n";
  for (const auto& w : warnings) rep << "warning: " << w << "\n";
  std::ofstream(out_dir / "report.txt") << rep.str();
  out << rep.str();
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
  bool psd = false;
  std::optional<std::pair<double, double>> jitter_band;
  std::optional<double> normalize_to_hz;
  std::optional<std::filesystem::path> psd_out;  // default: stdout
  std::size_t zero_pad = 8;
};

namespace detail {

struct Trace {
  std::vector<double> t_ns;
  std::vector<double> amplitude;
};

inline Trace read_trace(std::istream& is) {
  Trace tr;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != "t_ns,amplitude") throw ParseError(1, 1, "expected header 't_ns,amplitude'");
      continue;
    }
    if (line.empty()) continue;
    auto c = line.find(',');
    if (c == std::string::npos) throw ParseError(n, 1, "expected two columns");
    char* e1 = nullptr;
    char* e2 = nullptr;
    std::string a = line.substr(0, c), b = line.substr(c + 1);
    double t = std::strtod(a.c_str(), &e1);
    double v = std::strtod(b.c_str(), &e2);
    if (*e1 || *e2 || e1 == a.c_str() || e2 == b.c_str()) throw ParseError(n, 1, "not a number");
    tr.t_ns.push_back(t);
    tr.amplitude.push_back(v);
  }
  if (tr.t_ns.size() < 2) throw ParseError(n, 1, "trace needs at least two samples");
  return tr;
}

inline void emit_psd(const SpectralDensity& sd, const AnalyzeOptions& opt, std::ostream& out) {
  if (opt.psd_out) {
    std::ofstream f(*opt.psd_out);
    write_psd_csv(f, sd);
  } else {
    write_psd_csv(out, sd);
  }
}

inline void report_jitter(const SpectralDensity& sd, const AnalyzeOptions& opt, std::ostream& out) {
  if (!opt.jitter_band) return;
  auto [lo, hi] = *opt.jitter_band;
  double j = integrate_jitter(sd, lo, hi);
  out << "jitter_band_hz=" << fmt("%g", lo) << ":" << fmt("%g", hi) << "\n";
  out << "jitter_fs=" << fmt("%.3f", j * 1e15) << "\n";
}

}  // namespace detail

inline int cmd_analyze(const std::filesystem::path& csv, const AnalyzeOptions& opt, std::ostream& out,
                       std::ostream& err) {
  std::string text;
  try {
    text = detail::read_text(csv);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  try {
    std::istringstream is(text);
    bool is_trace = text.rfind("t_ns,amplitude", 0) == 0;
    if (!is_trace) {
      auto sd = read_psd_csv(is);
      out << "input=psd\ncarrier_hz=" << detail::fmt("%.6f", sd.carrier_hz) << "\npoints=" << sd.size() << "\n";
      if (opt.normalize_to_hz) {
        double shift = 20.0 * std::log10(*opt.normalize_to_hz / sd.carrier_hz);
        sd = normalize_carrier(sd, *opt.normalize_to_hz);
        out << "normalized_to_hz=" << detail::fmt("%.6f", sd.carrier_hz) << "\nshift_db="
            << detail::fmt("%+.4f", shift) << "\n";
      }
      detail::report_jitter(sd, opt, out);
      if (opt.psd) detail::emit_psd(sd, opt, out);
      return kExitOk;
    }

    auto tr = detail::read_trace(is);
    const double dt_ns = tr.t_ns[1] - tr.t_ns[0];
    if (!(dt_ns > 0)) throw RangeError("trace time axis must ascend");
    const double fs = 1e9 / dt_ns;
    const std::size_t n = next_pow2(tr.amplitude.size()) * std::max<std::size_t>(opt.zero_pad, 1);
    auto p = power_spectrum(tr.amplitude, n);
    auto sl = first_sidelobe(p);
    const double carrier = static_cast<double>(sl.peak_bin) * fs / static_cast<double>(n);
    out << "input=trace\nsamples=" << tr.amplitude.size() << "\nsample_rate_hz=" << detail::fmt("%.3f", fs)
        << "\npeak_hz=" << detail::fmt("%.3f", carrier) << "\nfirst_sidelobe_db=" << detail::fmt("%.3f", sl.level_db)
        << "\nsidelobe_offset_hz="
        << detail::fmt("%.3f", (static_cast<double>(sl.sidelobe_bin) - static_cast<double>(sl.peak_bin)) * fs /
                                   static_cast<double>(n))
        << "\n";
    if (opt.psd || opt.jitter_band) {
      auto ph = phase_from_waveform(tr.amplitude, fs, carrier);
      auto sd = estimate_psd(ph, fs, carrier);
      if (opt.normalize_to_hz) sd = normalize_carrier(sd, *opt.normalize_to_hz);
      detail::report_jitter(sd, opt, out);
      if (opt.psd) detail::emit_psd(sd, opt, out);
    }
    return kExitOk;
  } catch (const ParseError& e) {
    err << csv.string() << ":" << e.what() << "\n";
    return kExitParse;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitSemantic;
  }
}

// ---------------------------------------------------------------- wire / dump

/// Decode 48-bit frames given as hex strings, one line per frame.
inline int cmd_wire(const std::vector<std::string>& frames, std::ostream& out, std::ostream& err) {
  int rc = kExitOk;
  out << "frame,geo_addr,bank,mem_addr,payload\n";
  for (const auto& s : frames) {
    std::string h = s.rfind("0x", 0) == 0 ? s.substr(2) : s;
    char* end = nullptr;
    unsigned long long v = std::strtoull(h.c_str(), &end, 16);
    if (h.empty() || *end) {
      err << "not a hex frame: " << s << "\n";
      rc = kExitParse;
      continue;
    }
    try {
      auto w = decode_word(v);
      char buf[96];
      std::snprintf(buf, sizeof buf, "%012llx,%s,%u,0x%04x,0x%06x\n", v,
                    w.geo_addr == kBroadcast ? "broadcast" : std::to_string(w.geo_addr).c_str(), unsigned(w.bank),
                    unsigned(w.mem_addr), unsigned(w.payload));
      out << buf;
    } catch (const DecodeError& e) {
      err << s << ": " << e.what() << "\n";
      rc = kExitSemantic;
    }
  }
  return rc;
}

namespace detail {

inline void dump_list(const InstructionList& list, std::ostream& out, int depth) {
  std::string ind(static_cast<std::size_t>(depth) * 2, ' ');
  for (const auto& ins : list) {
    switch (ins.op) {
      case OpCode::play: out << ind << "play " << ins.edge << "\n"; break;
      case OpCode::wait_trigger: out << ind << "trigger\n"; break;
      case OpCode::loop:
        out << ind << "loop " << ins.count << "\n";
        dump_list(ins.body, out, depth + 1);
        break;
      case OpCode::branch:
        out << ind << "branch mask=0x" << std::hex << unsigned(ins.counter_mask) << std::dec
            << " threshold=" << ins.threshold << "\n";
        dump_list(ins.body, out, depth + 1);
        out << ind << "else\n";
        dump_list(ins.else_body, out, depth + 1);
        break;
    }
  }
}

}  // namespace detail

/// Human-readable listing of an encoded program file.
inline int cmd_dump(const std::filesystem::path& bin, std::ostream& out, std::ostream& err, const Timebase& tb = {}) {
  std::vector<SequenceProgram> ps;
  try {
    ps = decode_all(detail::read_bytes(bin));
  } catch (const DecodeError& e) {
    err << bin.string() << ": " << e.what() << "\n";
    return kExitParse;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  for (const auto& p : ps) {
    out << "channel " << unsigned(p.channel) << " (" << encoded_size(p) << " bytes)\n";
    for (std::size_t i = 0; i < p.edges.size(); ++i) {
      const auto& e = p.edges[i];
      out << "  edge " << i << ": wait_ns=" << e.wait_grains * tb.event_grain_ns << " f_hz="
          << detail::fmt("%.6f", realized_freq(e.words.ftw, tb)) << " pow=" << e.words.pow << " asf=" << e.words.asf;
      if (e.phase_mode == PhaseMode::coherent) out << " coherent";
      if (e.shape) out << " shape=" << to_string(e.shape->kind) << "/" << e.shape->rise_grains;
      if (e.detect_mask) out << " detect=0x" << std::hex << unsigned(*e.detect_mask) << std::dec;
      out << "\n";
    }
    detail::dump_list(p.program, out, 1);
  }
  return kExitOk;
}

}  // namespace ddsq
