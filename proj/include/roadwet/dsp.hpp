// Copyright 2026 The roadwet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "roadwet/core.hpp"
#include "roadwet/ingest.hpp"

namespace roadwet {

// ---------------------------------------------------------------------------
// Framing

/// Analysis window geometry. Defaults are 30 ms windows every 10 ms.
struct FrameSpec {
  double frame_ms = 30.0;
  double step_ms = 10.0;

  void validate() const {
    if (!(step_ms > 0 && step_ms <= frame_ms)) throw DataError("FrameSpec requires 0 < step_ms <= frame_ms");
  }
  std::size_t frame_length(double sample_rate) const {
    return static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
  }
  std::size_t hop_length(double sample_rate) const {
    return static_cast<std::size_t>(std::lround(step_ms * sample_rate / 1000.0));
  }
};

/// Number of full frames; a trailing partial frame is dropped.
inline std::size_t num_frames(std::size_t num_samples, std::size_t frame_len, std::size_t hop) {
  if (frame_len == 0 || hop == 0 || num_samples < frame_len) return 0;
  return (num_samples - frame_len) / hop + 1;
}

struct Frames {
  std::vector<std::span<const double>> windows;  // views into the clip
  std::vector<double> times;                     // frame start, seconds
  std::size_t frame_length = 0;
};

/// Frames reference the clip's storage; the clip must outlive them.
inline Frames frame_signal(const AudioClip& clip, const FrameSpec& spec) {
  spec.validate();
  Frames out;
  out.frame_length = spec.frame_length(clip.sample_rate);
  const std::size_t hop = spec.hop_length(clip.sample_rate);
  if (hop == 0) throw DataError("frame step rounds to zero samples at this sample rate");
  const std::size_t n = num_frames(clip.samples.size(), out.frame_length, hop);
  out.windows.reserve(n);
  out.times.reserve(n);
  const std::span<const double> all(clip.samples);
  for (std::size_t i = 0; i < n; ++i) {
    out.windows.push_back(all.subspan(i * hop, out.frame_length));
    out.times.push_back(static_cast<double>(i * hop) / clip.sample_rate);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectra

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place complex FFT; the inverse is scaled by 1/n. Sizes are kept to
/// powers of two so every caller zero-pads the same way.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
  if (!is_power_of_two(a.size())) throw DataError("FFT size must be a power of two");
  if (a.size() == 1) return;  // identity; the backend does not handle n = 1
  thread_local Eigen::FFT<double> engine;  // caches plans per size
  std::vector<std::complex<double>> out;
  if (inverse) engine.inv(out, a);
  else engine.fwd(out, a);
  a.swap(out);
}

/// Symmetric Hann window; length 1 gives {1}.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(n - 1));
  return w;
}

/// Hann-windowed, zero-padded power spectrum: fft_size/2 + 1 bins of |X_k|^2.
inline Eigen::VectorXd power_spectrum(std::span<const double> frame, std::size_t fft_size) {
  if (!is_power_of_two(fft_size)) throw DataError("fft_size must be a power of two");
  if (frame.size() > fft_size) throw DataError("frame longer than fft_size");
  const auto win = hann_window(frame.size());
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i] * win[i];
  fft_inplace(buf);
  Eigen::VectorXd p(fft_size / 2 + 1);
  for (std::size_t k = 0; k < static_cast<std::size_t>(p.size()); ++k) p[k] = std::norm(buf[k]);
  return p;
}

// ---------------------------------------------------------------------------
// Mel filterbank

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

struct MelFilterbank {
  std::size_t fft_size = 0;
  double sample_rate = 0.0;
  Eigen::MatrixXd weights;          // num_filters x (fft_size/2 + 1)
  std::vector<double> center_freqs;  // Hz

  std::size_t num_filters() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Unnormalized triangular filters (peak weight 1 at the center frequency)
/// whose edges are equally spaced on the mel scale.
inline MelFilterbank build_mel_filterbank(std::size_t num_filters, std::size_t fft_size, double sample_rate,
                                          double f_min, double f_max) {
  if (num_filters < 1) throw DataError("mel filterbank needs at least one filter");
  if (!is_power_of_two(fft_size)) throw DataError("fft_size must be a power of two");
  if (f_min < 0 || f_max > sample_rate / 2 + 1e-9) throw DataError("mel range must lie within [0, sample_rate/2]");
  if (!(f_min < f_max)) throw DataError("mel range requires f_min < f_max");

  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(num_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(num_filters + 1));

  MelFilterbank bank;
  bank.fft_size = fft_size;
  bank.sample_rate = sample_rate;
  const std::size_t bins = fft_size / 2 + 1;
  bank.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_filters), static_cast<Eigen::Index>(bins));
  for (std::size_t m = 0; m < num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    bank.center_freqs.push_back(mid);
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      if (w > 0) {
        bank.weights(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = w;
        any = true;
      }
    }
    if (!any)
      throw DataError("mel filter " + std::to_string(m) + " covers no FFT bin; too many filters for fft_size " +
                      std::to_string(fft_size));
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Feature matrices

/// Frame-by-dimension feature table with per-frame start times.
struct FeatureMatrix {
  Eigen::MatrixXd values;  // frames x dims
  std::vector<double> frame_times;
  std::vector<std::string> feature_names;

  std::size_t frames() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(values.cols()); }
};

inline constexpr std::size_t kNumMelBands = 26;
inline constexpr std::size_t kAsfDims = 2 * kNumMelBands + 2;

inline std::vector<std::string> asf_feature_names() {
  std::vector<std::string> names;
  for (std::size_t m = 0; m < kNumMelBands; ++m) names.push_back("logmel_" + std::to_string(m));
  for (std::size_t m = 0; m < kNumMelBands; ++m) names.push_back("logmel_posdiff_" + std::to_string(m));
  names.push_back("log_energy");
  names.push_back("log_energy_posdiff");
  return names;
}

/// Default 26-band bank spanning 0 Hz to Nyquist, sized for `spec` at `sample_rate`.
inline MelFilterbank default_asf_filterbank(double sample_rate, const FrameSpec& spec = {}) {
  const std::size_t fft = next_power_of_two(spec.frame_length(sample_rate));
  return build_mel_filterbank(kNumMelBands, fft, sample_rate, 0.0, sample_rate / 2);
}

/// Auditory spectral features, 54 dims per frame:
///   [0, 26)   log(M + 1), M = mel power of the Hann-windowed frame
///   [26, 52)  max(0, frame-to-frame change of the above); 0 on frame 0
///   52        log(1 + sum of squared samples)
///   53        max(0, frame-to-frame change of dim 52); 0 on frame 0
inline FeatureMatrix asf_features(const AudioClip& clip, const FrameSpec& spec, const MelFilterbank& bank) {
  const Frames frames = frame_signal(clip, spec);
  if (frames.windows.empty()) throw DataError("clip shorter than one analysis frame");
  const std::size_t fft = next_power_of_two(frames.frame_length);
  if (bank.fft_size != fft || static_cast<std::size_t>(bank.weights.cols()) != fft / 2 + 1)
    throw DataError("mel filterbank built for fft_size " + std::to_string(bank.fft_size) + ", frames need " +
                    std::to_string(fft));
  const auto nb = static_cast<Eigen::Index>(bank.num_filters());

  FeatureMatrix out;
  out.frame_times = frames.times;
  out.feature_names.clear();
  for (Eigen::Index m = 0; m < nb; ++m) out.feature_names.push_back("logmel_" + std::to_string(m));
  for (Eigen::Index m = 0; m < nb; ++m) out.feature_names.push_back("logmel_posdiff_" + std::to_string(m));
  out.feature_names.push_back("log_energy");
  out.feature_names.push_back("log_energy_posdiff");

  const auto n = static_cast<Eigen::Index>(frames.windows.size());
  out.values.resize(n, 2 * nb + 2);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& w = frames.windows[static_cast<std::size_t>(t)];
    const Eigen::VectorXd mel = bank.weights * power_spectrum(w, fft);
    out.values.row(t).head(nb) = (mel.array() + 1.0).log().matrix().transpose();
    double energy = 0.0;
    for (double s : w) energy += s * s;
    out.values(t, 2 * nb) = std::log1p(energy);
    if (t == 0) {
      out.values.row(t).segment(nb, nb).setZero();
      out.values(t, 2 * nb + 1) = 0.0;
    } else {
      out.values.row(t).segment(nb, nb) =
          (out.values.row(t).head(nb) - out.values.row(t - 1).head(nb)).cwiseMax(0.0);
      out.values(t, 2 * nb + 1) = std::max(0.0, out.values(t, 2 * nb) - out.values(t - 1, 2 * nb));
    }
  }
  return out;
}

inline FeatureMatrix asf_features(const AudioClip& clip, const FrameSpec& spec = {}) {
  return asf_features(clip, spec, default_asf_filterbank(clip.sample_rate, spec));
}

/// Third-octave band edges around a center frequency: [fc*2^-1/6, fc*2^1/6).
inline std::pair<double, double> third_octave_edges(double center_hz) {
  return {center_hz * std::pow(2.0, -1.0 / 6.0), center_hz * std::pow(2.0, 1.0 / 6.0)};
}

inline const std::vector<double>& default_octave_centers() {
  static const std::vector<double> centers{200.0, 630.0, 1600.0, 5000.0};
  return centers;
}

/// Log band energies over non-overlapping bins (125 ms by default). Bands are
/// rectangular sums of FFT power, ordered by ascending center frequency.
inline FeatureMatrix third_octave_features(const AudioClip& clip, double bin_ms = 125.0,
                                           std::vector<double> centers = default_octave_centers()) {
  std::sort(centers.begin(), centers.end());
  if (centers.empty()) throw DataError("no third-octave centers given");
  if (third_octave_edges(centers.back()).second >= clip.sample_rate / 2)
    throw DataError("sample rate too low: highest third-octave band edge reaches Nyquist");
  const FrameSpec spec{bin_ms, bin_ms};
  const Frames frames = frame_signal(clip, spec);
  const std::size_t fft = next_power_of_two(std::max<std::size_t>(frames.frame_length, 1));

  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [first, last) FFT bins per band
  for (double fc : centers) {
    const auto [lo, hi] = third_octave_edges(fc);
    std::size_t first = fft / 2 + 1, last = 0;
    for (std::size_t k = 0; k <= fft / 2; ++k) {
      const double f = static_cast<double>(k) * clip.sample_rate / static_cast<double>(fft);
      if (f >= lo && f < hi) {
        first = std::min(first, k);
        last = k + 1;
      }
    }
    if (last == 0) first = 0;
    ranges.emplace_back(first, last);
  }

  FeatureMatrix out;
  out.frame_times = frames.times;
  for (double fc : centers) {
    std::ostringstream name;
    name << "third_octave_" << fc << "hz";
    out.feature_names.push_back(name.str());
  }
  out.values.resize(static_cast<Eigen::Index>(frames.windows.size()), static_cast<Eigen::Index>(centers.size()));
  for (std::size_t t = 0; t < frames.windows.size(); ++t) {
    const Eigen::VectorXd p = power_spectrum(frames.windows[t], fft);
    for (std::size_t b = 0; b < ranges.size(); ++b) {
      const auto [first, last] = ranges[b];
      const double e = last > first ? p.segment(static_cast<Eigen::Index>(first),
                                                static_cast<Eigen::Index>(last - first)).sum()
                                    : 0.0;
      out.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) = std::log1p(e);
    }
  }
  return out;
}

}  // namespace roadwet
