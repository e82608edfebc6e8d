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

#ifndef HEADORIENT_ACOUSTICS_DSP_HPP_
#define HEADORIENT_ACOUSTICS_DSP_HPP_

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace headorient::acoustics {

// Real-to-complex FFT of a fixed size backed by FFTW. Plans are created once
// per size (FFTW_ESTIMATE, so results are reproducible run to run) and shared
// across instances; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return size_; }
  std::size_t bins() const { return size_ / 2 + 1; }

  // `input` may be shorter than size(); it is zero padded.
  void forward(std::span<const double> input,
               std::vector<std::complex<double>>& spectrum);
  // Unnormalized inverse (output scaled by size()).
  void inverse(const std::vector<std::complex<double>>& spectrum,
               std::vector<double>& output);

 private:
  struct Buffers;
  std::size_t size_;
  std::unique_ptr<Buffers> buffers_;
};

// Full linear convolution, length signal.size() + ir.size() - 1, computed
// block-wise with overlap-add.
std::vector<double> fft_convolve(std::span<const double> signal,
                                 std::span<const double> ir);

// Same, truncated to the first `output_length` samples.
std::vector<double> fft_convolve(std::span<const double> signal,
                                 std::span<const double> ir,
                                 std::size_t output_length);

// Reference O(n*m) convolution.
std::vector<double> direct_convolve(std::span<const double> signal,
                                    std::span<const double> ir);

// Kaiser-windowed sinc fractional delay, 32 taps. The kernel for a delay of
// D samples covers output positions floor(D) - 15 .. floor(D) + 16.
class FractionalDelay {
 public:
  static constexpr int kTaps = 32;
  static constexpr int kHalf = kTaps / 2;

  static const FractionalDelay& instance();

  // Adds gain * kernel(delay) into `out`; taps outside `out` are dropped.
  void add_impulse(std::span<double> out, double delay_samples,
                   double gain) const;

  // Exact (table-free) tap weight at offset x = k - frac.
  static double kernel(double x);

 private:
  FractionalDelay();
  static constexpr int kPhases = 2048;
  std::vector<double> table_;  // (kPhases + 1) x kTaps
};

// Direct-form-I second order section; coefficients normalized by a0.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  // RBJ peaking equalizer; negative gain_db gives a notch-like dip.
  static Biquad peaking(double center_hz, double q, double gain_db,
                        double sample_rate);

  void process(std::span<double> x) const;
  void process_add(std::span<const double> x, std::span<double> out) const;
};

// Reverse-integrated energy decay (both channels summed), fitted between
// -5 dB and -25 dB and extrapolated to -60 dB. Throws DataError
// "insufficient decay" when less than 10 dB of decay is available to fit.
double estimate_t60_schroeder(std::span<const std::vector<double>> channels,
                              int sample_rate);
double estimate_t60_schroeder(std::span<const double> ir, int sample_rate);

}  // namespace headorient::acoustics

#endif  // HEADORIENT_ACOUSTICS_DSP_HPP_
