// ddsq: compile pulse programs, run simulated experiments, analyse traces.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ddsq/app.hpp"

namespace {

std::optional<std::pair<std::int64_t, std::int64_t>> parse_window(const std::string& s) {
  auto dots = s.find("..");
  if (dots == std::string::npos) return std::nullopt;
  auto a = ddsq::parse_int<std::int64_t>(std::string_view(s).substr(0, dots));
  auto b = ddsq::parse_int<std::int64_t>(std::string_view(s).substr(dots + 2));
  if (!a || !b || *a < 0 || *b <= *a) return std::nullopt;
  return std::make_pair(*a, *b);
}

std::optional<std::pair<double, double>> parse_band(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) return std::nullopt;
  auto lo = ddsq::parse_frequency_hz(s.substr(0, colon));
  auto hi = ddsq::parse_frequency_hz(s.substr(colon + 1));
  if (!lo || !hi) return std::nullopt;
  return std::make_pair(*lo, *hi);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DDS pulse-sequencer compiler and simulator"};
  app.require_subcommand(1);

  std::string src, bin_out;
  auto* compile = app.add_subcommand("compile", "Compile a pulse program to its binary encoding");
  compile->add_option("source", src, "Pulse-program source")->required();
  compile->add_option("-o,--output", bin_out, "Output binary")->required();

  std::string manifest, out_dir, window;
  std::optional<std::uint64_t> seed;
  std::uint32_t trace_shots = 10;
  auto* run = app.add_subcommand("run", "Run a simulated experiment from a manifest");
  run->add_option("manifest", manifest, "Run manifest")->required();
  run->add_option("-o,--output", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the manifest seed");
  run->add_option("--window", window, "Waveform window t0..t1 in ns");
  run->add_option("--trace-shots", trace_shots, "Shots written to the timeline")->capture_default_str();

  std::string csv, jitter, normalize, psd_out;
  bool psd = false;
  auto* analyze = app.add_subcommand("analyze", "Spectrum, sidelobe and jitter report for a trace or PSD CSV");
  analyze->add_option("csv", csv, "Waveform (t_ns,amplitude) or PSD (offset_hz,level_dbc_hz) CSV")->required();
  analyze->add_flag("--psd", psd, "Emit the phase-noise PSD as CSV");
  analyze->add_option("--jitter", jitter, "Integrate RMS jitter over f_lo:f_hi");
  analyze->add_option("--normalize-to", normalize, "Rescale phase noise to this carrier (e.g. 1GHz)");
  analyze->add_option("--psd-out", psd_out, "Write the PSD CSV here instead of stdout");

  std::string dump_in;
  auto* dump = app.add_subcommand("dump", "List the programs in an encoded binary");
  dump->add_option("binary", dump_in, "Encoded program file")->required();

  std::vector<std::string> frames;
  auto* wire = app.add_subcommand("wire", "Decode 48-bit backplane frames given in hex");
  wire->add_option("frames", frames, "Frames, e.g. 0x0f0001000123")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : ddsq::kExitParse;
  }

  if (*compile) return ddsq::cmd_compile(src, bin_out, std::cout, std::cerr);
  if (*run) {
    ddsq::RunOptions opt;
    opt.seed = seed;
    opt.trace_shots = trace_shots;
    if (!window.empty()) {
      opt.window = parse_window(window);
      if (!opt.window) {
        std::cerr << "--window expects t0..t1 in ns with t0 < t1\n";
        return ddsq::kExitParse;
      }
    }
    return ddsq::cmd_run(manifest, out_dir, opt, std::cout, std::cerr);
  }
  if (*analyze) {
    ddsq::AnalyzeOptions opt;
    opt.psd = psd;
    if (!jitter.empty()) {
      opt.jitter_band = parse_band(jitter);
      if (!opt.jitter_band) {
        std::cerr << "--jitter expects f_lo:f_hi\n";
        return ddsq::kExitParse;
      }
    }
    if (!normalize.empty()) {
      opt.normalize_to_hz = ddsq::parse_frequency_hz(normalize);
      if (!opt.normalize_to_hz) {
        std::cerr << "--normalize-to expects a frequency\n";
        return ddsq::kExitParse;
      }
    }
    if (!psd_out.empty()) opt.psd_out = psd_out;
    return ddsq::cmd_analyze(csv, opt, std::cout, std::cerr);
  }
  if (*dump) return ddsq::cmd_dump(dump_in, std::cout, std::cerr);
  if (*wire) return ddsq::cmd_wire(frames, std::cout, std::cerr);
  return ddsq::kExitParse;
}
