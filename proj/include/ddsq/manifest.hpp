#pragma once

// Run manifest: one `key = value` per line, '#' comments, paths relative to
// the manifest file. See docs/manifest.md for the full key list.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddsq/error.hpp"
#include "ddsq/mch.hpp"
#include "ddsq/rf_chain.hpp"
#include "ddsq/simulator.hpp"
#include "ddsq/timebase.hpp"

namespace ddsq {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

/// "3.2GHz", "98.6 MHz", "1e9" -> Hz.
inline std::optional<double> parse_frequency_hz(std::string_view s) {
  s = trim(s);
  std::string str(s);
  char* end = nullptr;
  double v = std::strtod(str.c_str(), &end);
  if (end == str.c_str()) return std::nullopt;
  std::string_view unit = trim(std::string_view(end));
  double scale = 0;
  if (unit.empty() || unit == "Hz" || unit == "hz") scale = 1;
  else if (unit == "kHz" || unit == "khz") scale = 1e3;
  else if (unit == "MHz" || unit == "mhz") scale = 1e6;
  else if (unit == "GHz" || unit == "ghz") scale = 1e9;
  else return std::nullopt;
  return v * scale;
}

template <class T>
std::optional<T> parse_int(std::string_view s) {
  s = trim(s);
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

struct SourceSpec {
  enum class Kind { playback, poisson } kind = Kind::playback;
  std::vector<PlaybackSource::Entry> entries{{Outcome::bright, 0}};
  double bright_mean = 20.0;
  double dark_mean = 1.0;
  double p_bright = 0.5;

  OutcomeSource make(std::uint64_t seed) const {
    if (kind == Kind::poisson) return PoissonSource(seed, bright_mean, dark_mean, p_bright);
    return PlaybackSource(entries);
  }
};

struct UpconvertSpec {
  enum class Kind { none, doubler, ssb } kind = Kind::none;
  DoublerChain doubler;
  SsbConfig ssb;
};

struct RunManifest {
  std::filesystem::path base_dir;
  std::vector<std::filesystem::path> programs;
  std::uint32_t shots = 1;
  std::uint64_t seed = 0;
  SourceSpec source;
  SimConfig sim;
  UpconvertSpec upconvert;
  BandLimits band;
  std::optional<std::pair<std::int64_t, std::int64_t>> window;  // ns, relative to the first trigger
  std::vector<std::uint8_t> wave_channels;                       // empty: every programmed channel
};

namespace detail {

inline UpconvertSpec parse_upconvert(std::string_view v, std::size_t line) {
  UpconvertSpec u;
  v = trim(v);
  if (v == "none") return u;
  auto open = v.find('(');
  if (open == std::string_view::npos || v.back() != ')')
    throw ManifestError(line, "upconvert must be none, doubler(n=..., f=...) or ssb(lo=..., ...)");
  auto name = trim(v.substr(0, open));
  auto args = v.substr(open + 1, v.size() - open - 2);
  std::vector<std::pair<std::string, std::string>> kv;
  while (!args.empty()) {
    auto comma = args.find(',');
    auto item = trim(args.substr(0, comma));
    args = comma == std::string_view::npos ? std::string_view{} : args.substr(comma + 1);
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ManifestError(line, "expected key=value in '" + std::string(item) + "'");
    kv.emplace_back(std::string(trim(item.substr(0, eq))), std::string(trim(item.substr(eq + 1))));
  }
  auto freq = [&](const std::string& s) {
    auto f = parse_frequency_hz(s);
    if (!f) throw ManifestError(line, "bad frequency '" + s + "'");
    return *f;
  };
  auto real = [&](const std::string& s) {
    char* end = nullptr;
    double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end) throw ManifestError(line, "bad number '" + s + "'");
    return d;
  };
  if (name == "doubler") {
    u.kind = UpconvertSpec::Kind::doubler;
    for (auto& [k, val] : kv) {
      if (k == "n") {
        auto n = parse_int<unsigned>(val);
        if (!n || *n > 8) throw ManifestError(line, "doubler n must be 0-8");
        u.doubler.stages = *n;
      } else if (k == "f") {
        u.doubler.input_freq_hz = freq(val);
      } else {
        throw ManifestError(line, "unknown doubler key '" + k + "'");
      }
    }
  } else if (name == "ssb") {
    u.kind = UpconvertSpec::Kind::ssb;
    for (auto& [k, val] : kv) {
      if (k == "lo") u.ssb.lo_freq_hz = freq(val);
      else if (k == "sideband") {
        if (val == "upper") u.ssb.sideband = Sideband::upper;
        else if (val == "lower") u.ssb.sideband = Sideband::lower;
        else throw ManifestError(line, "sideband must be upper or lower");
      } else if (k == "eps") u.ssb.amp_imbalance = real(val);
      else if (k == "phi_deg") u.ssb.phase_error_rad = real(val) * std::numbers::pi / 180.0;
      else throw ManifestError(line, "unknown ssb key '" + k + "'");
    }
    try {
      u.ssb.validate();
    } catch (const RangeError& e) {
      throw ManifestError(line, e.what());
    }
  } else {
    throw ManifestError(line, "unknown upconversion '" + std::string(name) + "'");
  }
  return u;
}

inline SourceSpec parse_source(std::string_view v, std::size_t line) {
  auto w = split_ws(v);
  if (w.empty()) throw ManifestError(line, "empty source");
  SourceSpec s;
  if (w[0] == "playback") {
    s.kind = SourceSpec::Kind::playback;
    s.entries.clear();
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (w[i] == "bright") s.entries.push_back({Outcome::bright, 0});
      else if (w[i] == "dark") s.entries.push_back({Outcome::dark, 0});
      else if (auto n = parse_int<std::uint32_t>(w[i])) s.entries.push_back({std::nullopt, *n});
      else throw ManifestError(line, "playback entries are bright, dark or a photon count");
    }
    if (s.entries.empty()) throw ManifestError(line, "playback needs at least one entry");
  } else if (w[0] == "poisson") {
    s.kind = SourceSpec::Kind::poisson;
    for (std::size_t i = 1; i < w.size(); ++i) {
      auto eq = w[i].find('=');
      if (eq == std::string::npos) throw ManifestError(line, "expected key=value, found '" + w[i] + "'");
      auto key = w[i].substr(0, eq);
      char* end = nullptr;
      double d = std::strtod(w[i].c_str() + eq + 1, &end);
      if (*end || end == w[i].c_str() + eq + 1) throw ManifestError(line, "bad number in '" + w[i] + "'");
      if (key == "bright") s.bright_mean = d;
      else if (key == "dark") s.dark_mean = d;
      else if (key == "p_bright") s.p_bright = d;
      else throw ManifestError(line, "unknown poisson key '" + key + "'");
    }
    if (!(s.bright_mean > 0 && s.dark_mean > 0 && s.p_bright >= 0 && s.p_bright <= 1))
      throw ManifestError(line, "poisson means must be positive and p_bright in [0, 1]");
  } else {
    throw ManifestError(line, "source must be 'playback ...' or 'poisson ...'");
  }
  return s;
}

}  // namespace detail

inline RunManifest parse_manifest(std::istream& is, const std::filesystem::path& base_dir) {
  RunManifest m;
  m.base_dir = base_dir;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string_view s = raw;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ManifestError(line, "expected 'key = value'");
    std::string key(trim(s.substr(0, eq)));
    std::string_view val = trim(s.substr(eq + 1));
    if (val.empty()) throw ManifestError(line, "missing value for '" + key + "'");

    auto u64 = [&] {
      auto v = parse_int<std::uint64_t>(val);
      if (!v) throw ManifestError(line, "'" + key + "' needs a non-negative integer");
      return *v;
    };
    auto i64 = [&] {
      auto v = parse_int<std::int64_t>(val);
      if (!v || *v < 0) throw ManifestError(line, "'" + key + "' needs a non-negative integer");
      return *v;
    };
    auto channel_list = [&] {
      std::vector<std::uint8_t> out;
      for (const auto& w : split_ws(val)) {
        auto c = parse_int<unsigned>(w);
        if (!c) throw ManifestError(line, "bad index '" + w + "'");
        out.push_back(static_cast<std::uint8_t>(*c));
        if (*c > 255) throw ManifestError(line, "index out of range");
      }
      return out;
    };

    if (key == "program") {
      auto p = base_dir / std::string(val);
      if (!std::filesystem::exists(p)) throw ManifestError(line, "program file not found: " + p.string());
      m.programs.push_back(p);
    } else if (key == "shots") {
      auto v = u64();
      if (v > UINT32_MAX) throw ManifestError(line, "too many shots");
      m.shots = static_cast<std::uint32_t>(v);
    } else if (key == "seed") {
      m.seed = u64();
    } else if (key == "source") {
      m.source = detail::parse_source(val, line);
    } else if (key == "timebase.sysclk_hz") {
      auto f = parse_frequency_hz(val);
      if (!f || *f < 1 || *f != std::floor(*f)) throw ManifestError(line, "sysclk must be a whole number of Hz");
      m.sim.timebase.sysclk_hz = static_cast<std::uint64_t>(*f);
    } else if (key == "timebase.event_grain_ns") {
      m.sim.timebase.event_grain_ns = static_cast<std::uint32_t>(u64());
    } else if (key == "timebase.sync_divider") {
      m.sim.timebase.sync_divider = static_cast<std::uint32_t>(u64());
    } else if (key == "timebase.spi_update_ns") {
      m.sim.timebase.spi_update_ns = static_cast<std::uint32_t>(u64());
    } else if (key == "feedback.detect_ns") {
      m.sim.feedback.detect_latency_ns = i64();
    } else if (key == "feedback.decide_ns") {
      m.sim.feedback.decide_ns = i64();
    } else if (key == "feedback.path") {
      if (val == "wire") m.sim.feedback.path = UpdatePath::wire;
      else if (val == "spi") m.sim.feedback.path = UpdatePath::spi;
      else throw ManifestError(line, "feedback.path must be wire or spi");
    } else if (key == "link.bitrate_bps") {
      m.sim.link.bitrate_bps = u64();
    } else if (key == "link.commit_cycles") {
      m.sim.link.commit_latency_cycles = static_cast<std::uint32_t>(u64());
    } else if (key == "shot_gap_ns") {
      m.sim.shot_gap_ns = i64();
    } else if (key == "cards") {
      m.sim.cards = channel_list();
      for (auto c : m.sim.cards)
        if (c >= kMaxCards) throw ManifestError(line, "card slot must be 0-7");
    } else if (key == "upconvert") {
      m.upconvert = detail::parse_upconvert(val, line);
    } else if (key == "band") {
      auto w = split_ws(val);
      std::optional<double> lo, hi;
      if (w.size() == 2) {
        lo = parse_frequency_hz(w[0]);
        hi = parse_frequency_hz(w[1]);
      }
      if (!lo || !hi || !(*lo < *hi)) throw ManifestError(line, "band needs two ascending frequencies");
      m.band = {*lo, *hi};
    } else if (key == "window") {
      auto dots = val.find("..");
      std::optional<std::int64_t> a, b;
      if (dots != std::string_view::npos) {
        a = parse_int<std::int64_t>(val.substr(0, dots));
        b = parse_int<std::int64_t>(val.substr(dots + 2));
      }
      if (!a || !b || *a < 0 || *b <= *a) throw ManifestError(line, "window must be t0..t1 in ns with t0 < t1");
      m.window = std::make_pair(*a, *b);
    } else if (key == "waveform_channels") {
      m.wave_channels = channel_list();
      for (auto c : m.wave_channels)
        if (c >= kMaxChannels) throw ManifestError(line, "channel index must be < 32");
    } else {
      throw ManifestError(line, "unknown key '" + key + "'");
    }
  }
  if (m.programs.empty()) throw ManifestError(0, "manifest lists no program");
  try {
    m.sim.validate();
  } catch (const RangeError& e) {
    throw ManifestError(0, e.what());
  }
  return m;
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ManifestError(0, "cannot open manifest " + path.string());
  return parse_manifest(f, path.parent_path());
}

}  // namespace ddsq
