#pragma once

// Thin RAII layer over FFTW. Plans are built with FFTW_ESTIMATE so results do
// not depend on planner timing; the planner itself is not thread-safe, hence
// the lock.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "ddsq/error.hpp"

namespace ddsq {

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
class FftwBuffer {
 public:
  explicit FftwBuffer(std::size_t n) : n_(n), p_(static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)))) {
    if (!p_) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p_); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  T* data() { return p_; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  T* p_;
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : p_(p) {
    if (!p_) throw Error("FFTW failed to create a plan");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  void execute() { fftw_execute(p_); }

 private:
  fftw_plan p_;
};

}  // namespace detail

using cplx = std::complex<double>;

/// Forward real FFT of `x` zero-padded to `n` points (n >= x.size()); n/2+1 bins.
inline std::vector<cplx> rfft(std::span<const double> x, std::size_t n = 0) {
  if (n == 0) n = x.size();
  if (n < x.size() || n == 0) throw RangeError("FFT length shorter than input");
  detail::FftwBuffer<double> in(n);
  detail::FftwBuffer<fftw_complex> out(n / 2 + 1);
  std::unique_ptr<detail::Plan> plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = std::make_unique<detail::Plan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE));
  }
  for (std::size_t i = 0; i < n; ++i) in.data()[i] = i < x.size() ? x[i] : 0.0;
  plan->execute();
  std::vector<cplx> r(n / 2 + 1);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = {out.data()[k][0], out.data()[k][1]};
  return r;
}

/// Inverse of rfft for an `n`-point real signal, scaled so irfft(rfft(x)) == x.
inline std::vector<double> irfft(std::span<const cplx> X, std::size_t n) {
  if (X.size() != n / 2 + 1) throw RangeError("spectrum length does not match n/2+1");
  detail::FftwBuffer<fftw_complex> in(X.size());
  detail::FftwBuffer<double> out(n);
  std::unique_ptr<detail::Plan> plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = std::make_unique<detail::Plan>(
        fftw_plan_dft_c2r_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < X.size(); ++k) {
    in.data()[k][0] = X[k].real();
    in.data()[k][1] = X[k].imag();
  }
  plan->execute();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = out.data()[i] / static_cast<double>(n);
  return r;
}

/// Complex forward or inverse FFT (unscaled).
inline std::vector<cplx> cfft(std::span<const cplx> x, bool inverse = false) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  detail::FftwBuffer<fftw_complex> in(n);
  detail::FftwBuffer<fftw_complex> out(n);
  std::unique_ptr<detail::Plan> plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = std::make_unique<detail::Plan>(fftw_plan_dft_1d(static_cast<int>(n), in.data(), out.data(),
                                                           inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE));
  }
  for (std::size_t i = 0; i < n; ++i) {
    in.data()[i][0] = x[i].real();
    in.data()[i][1] = x[i].imag();
  }
  plan->execute();
  std::vector<cplx> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = {out.data()[i][0], out.data()[i][1]};
  return r;
}

/// |X_k|^2 for the one-sided spectrum of `x`, zero-padded to `n`.
inline std::vector<double> power_spectrum(std::span<const double> x, std::size_t n = 0) {
  auto X = rfft(x, n);
  std::vector<double> p(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) p[k] = std::norm(X[k]);
  return p;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline std::size_t peak_bin(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

struct SidelobeReport {
  std::size_t peak_bin = 0;
  std::size_t sidelobe_bin = 0;
  double level_db = 0.0;  // first sidelobe relative to the main-lobe peak
};

/// First sidelobe of a power spectrum: walk away from the peak to the first
/// null, then take the next local maximum. The louder of the two sides wins.
inline SidelobeReport first_sidelobe(std::span<const double> p) {
  if (p.size() < 5) throw RangeError("spectrum too short for sidelobe search");
  SidelobeReport r;
  r.peak_bin = peak_bin(p);
  const double peak = p[r.peak_bin];
  double worst = -1.0;
  auto side = [&](int dir) {
    auto k = static_cast<std::ptrdiff_t>(r.peak_bin);
    const auto n = static_cast<std::ptrdiff_t>(p.size());
    auto in = [&](std::ptrdiff_t i) { return i >= 0 && i < n; };
    while (in(k + dir) && p[k + dir] < p[k]) k += dir;  // down to the null
    if (!in(k + dir)) return;
    while (in(k + dir) && p[k + dir] >= p[k]) k += dir;  // up to the lobe
    if (p[k] > worst) {
      worst = p[k];
      r.sidelobe_bin = static_cast<std::size_t>(k);
    }
  };
  side(+1);
  side(-1);
  if (worst < 0) throw RangeError("no sidelobe found");
  r.level_db = 10.0 * std::log10(worst / peak);
  return r;
}

}  // namespace ddsq
