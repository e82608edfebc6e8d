/* Copyright 2026 The headorient Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "headorient/acoustics/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "headorient/error.hpp"

namespace headorient::acoustics {
namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// FFTW planning is not thread-safe; execution with the new-array interface
// is, as long as buffers share the planned alignment (fftw_malloc).
std::mutex g_plan_mutex;

PlanPair plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto* real = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  auto* cplx = static_cast<fftw_complex*>(
      fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  PlanPair p;
  const int size = static_cast<int>(n);
  p.forward = fftw_plan_dft_r2c_1d(size, real, cplx, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(size, cplx, real, FFTW_ESTIMATE);
  fftw_free(real);
  fftw_free(cplx);
  cache.emplace(n, p);
  return p;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

constexpr double kKaiserBeta = 7.0;

}  // namespace

struct RealFft::Buffers {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  PlanPair plans;
};

RealFft::RealFft(std::size_t size) : size_(size), buffers_(new Buffers) {
  if (size < 2) throw ArgumentError("RealFft size must be >= 2");
  buffers_->plans = plans_for(size);
  buffers_->real = static_cast<double*>(fftw_malloc(sizeof(double) * size));
  buffers_->cplx =
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins()));
}

RealFft::~RealFft() {
  fftw_free(buffers_->real);
  fftw_free(buffers_->cplx);
}

void RealFft::forward(std::span<const double> input,
                      std::vector<std::complex<double>>& spectrum) {
  const std::size_t n = std::min(input.size(), size_);
  std::memcpy(buffers_->real, input.data(), n * sizeof(double));
  std::fill(buffers_->real + n, buffers_->real + size_, 0.0);
  fftw_execute_dft_r2c(buffers_->plans.forward, buffers_->real, buffers_->cplx);
  spectrum.resize(bins());
  for (std::size_t k = 0; k < bins(); ++k) {
    spectrum[k] = {buffers_->cplx[k][0], buffers_->cplx[k][1]};
  }
}

void RealFft::inverse(const std::vector<std::complex<double>>& spectrum,
                      std::vector<double>& output) {
  if (spectrum.size() != bins()) throw ArgumentError("spectrum size mismatch");
  for (std::size_t k = 0; k < bins(); ++k) {
    buffers_->cplx[k][0] = spectrum[k].real();
    buffers_->cplx[k][1] = spectrum[k].imag();
  }
  fftw_execute_dft_c2r(buffers_->plans.inverse, buffers_->cplx, buffers_->real);
  output.assign(buffers_->real, buffers_->real + size_);
}

std::vector<double> fft_convolve(std::span<const double> signal,
                                 std::span<const double> ir) {
  if (signal.empty() || ir.empty()) {
    throw ArgumentError("fft_convolve: empty input");
  }
  if (signal.size() > std::numeric_limits<std::size_t>::max() - ir.size() ||
      signal.size() + ir.size() > (std::size_t{1} << 31)) {
    throw ArgumentError("fft_convolve: output length overflow");
  }
  return fft_convolve(signal, ir, signal.size() + ir.size() - 1);
}

std::vector<double> fft_convolve(std::span<const double> signal,
                                 std::span<const double> ir,
                                 std::size_t output_length) {
  if (signal.empty() || ir.empty()) {
    throw ArgumentError("fft_convolve: empty input");
  }
  if (signal.size() + ir.size() > (std::size_t{1} << 31)) {
    throw ArgumentError("fft_convolve: output length overflow");
  }
  const std::size_t full = signal.size() + ir.size() - 1;
  output_length = std::min(output_length, full);
  std::vector<double> out(output_length, 0.0);
  if (output_length == 0) return out;

  // Only the first output_length samples are needed, so later parts of
  // either operand never contribute.
  const std::size_t m = std::min(ir.size(), output_length);
  const std::size_t n_sig = std::min(signal.size(), output_length);

  // FFT size: at least twice the kernel, at most what one block would need.
  std::size_t fft_size = next_pow2(std::max<std::size_t>(2 * m, 64));
  fft_size = std::min(fft_size, next_pow2(n_sig + m - 1));
  fft_size = std::max<std::size_t>(fft_size, 2);
  const std::size_t block = fft_size - m + 1;

  RealFft fft(fft_size);
  std::vector<std::complex<double>> kernel_spec;
  fft.forward(ir.first(m), kernel_spec);
  std::vector<std::complex<double>> spec;
  std::vector<double> chunk;
  const double scale = 1.0 / static_cast<double>(fft_size);

  for (std::size_t start = 0; start < n_sig; start += block) {
    const std::size_t len = std::min(block, n_sig - start);
    fft.forward(signal.subspan(start, len), spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= kernel_spec[k];
    fft.inverse(spec, chunk);
    const std::size_t produced = len + m - 1;
    for (std::size_t i = 0; i < produced && start + i < output_length; ++i) {
      out[start + i] += chunk[i] * scale;
    }
  }
  return out;
}

std::vector<double> direct_convolve(std::span<const double> signal,
                                    std::span<const double> ir) {
  if (signal.empty() || ir.empty()) {
    throw ArgumentError("direct_convolve: empty input");
  }
  std::vector<double> out(signal.size() + ir.size() - 1, 0.0);
  for (std::size_t i = 0; i < signal.size(); ++i) {
    for (std::size_t j = 0; j < ir.size(); ++j) out[i + j] += signal[i] * ir[j];
  }
  return out;
}

double FractionalDelay::kernel(double x) {
  const double half = static_cast<double>(kHalf);
  if (std::abs(x) >= half) return 0.0;
  const double sinc =
      x == 0.0 ? 1.0
               : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
  const double r = x / half;
  const double window =
      bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / bessel_i0(kKaiserBeta);
  return sinc * window;
}

FractionalDelay::FractionalDelay()
    : table_(static_cast<std::size_t>(kPhases + 1) * kTaps) {
  for (int p = 0; p <= kPhases; ++p) {
    const double frac = static_cast<double>(p) / kPhases;
    for (int t = 0; t < kTaps; ++t) {
      const int k = t - (kHalf - 1);  // -15 .. 16
      table_[static_cast<std::size_t>(p) * kTaps + t] = kernel(k - frac);
    }
  }
}

const FractionalDelay& FractionalDelay::instance() {
  static const FractionalDelay kInstance;
  return kInstance;
}

void FractionalDelay::add_impulse(std::span<double> out, double delay_samples,
                                  double gain) const {
  const double base = std::floor(delay_samples);
  const double frac = delay_samples - base;
  const double pos = frac * kPhases;
  const int phase = std::min(static_cast<int>(pos), kPhases - 1);
  const double w = pos - phase;
  const double* lo = &table_[static_cast<std::size_t>(phase) * kTaps];
  const double* hi = lo + kTaps;
  const long first = static_cast<long>(base) - (kHalf - 1);
  const long n = static_cast<long>(out.size());
  for (int t = 0; t < kTaps; ++t) {
    const long idx = first + t;
    if (idx < 0 || idx >= n) continue;
    out[static_cast<std::size_t>(idx)] += gain * (lo[t] + w * (hi[t] - lo[t]));
  }
}

Biquad Biquad::peaking(double center_hz, double q, double gain_db,
                       double sample_rate) {
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha / a;
  Biquad f;
  f.b0 = (1.0 + alpha * a) / a0;
  f.b1 = -2.0 * cw / a0;
  f.b2 = (1.0 - alpha * a) / a0;
  f.a1 = -2.0 * cw / a0;
  f.a2 = (1.0 - alpha / a) / a0;
  return f;
}

void Biquad::process(std::span<double> x) const {
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

void Biquad::process_add(std::span<const double> x,
                         std::span<double> out) const {
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  const std::size_t n = std::min(x.size(), out.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double y = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x[i];
    y2 = y1;
    y1 = y;
    out[i] += y;
  }
}

double estimate_t60_schroeder(std::span<const std::vector<double>> channels,
                              int sample_rate) {
  if (channels.empty() || sample_rate <= 0) {
    throw ArgumentError("estimate_t60_schroeder: empty input");
  }
  const std::size_t n = channels.front().size();
  std::vector<double> edc(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    for (const auto& ch : channels) acc += ch[i] * ch[i];
    edc[i] = acc;
  }
  if (!(acc > 0.0) || !std::isfinite(acc)) {
    throw DataError("estimate_t60_schroeder: impulse response has no energy");
  }

  constexpr double kUpper = -5.0;
  constexpr double kLower = -25.0;
  constexpr double kMinSpan = 10.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t count = 0;
  double deepest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (edc[i] <= 0.0) break;
    const double db = 10.0 * std::log10(edc[i] / acc);
    if (db < kLower) break;
    if (db > kUpper) continue;
    const double t = static_cast<double>(i) / sample_rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++count;
    deepest = db;
  }
  if (count < 2 || kUpper - deepest < kMinSpan) {
    throw DataError("insufficient decay");
  }
  const double c = static_cast<double>(count);
  const double slope = (c * sxy - sx * sy) / (c * sxx - sx * sx);
  if (!(slope < 0.0)) throw DataError("insufficient decay");
  return -60.0 / slope;
}

double estimate_t60_schroeder(std::span<const double> ir, int sample_rate) {
  std::vector<std::vector<double>> one{std::vector<double>(ir.begin(), ir.end())};
  return estimate_t60_schroeder(std::span<const std::vector<double>>(one),
                                sample_rate);
}

}  // namespace headorient::acoustics
