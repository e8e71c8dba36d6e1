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


#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "roadwet/dsp.hpp"

namespace roadwet {
namespace {

AudioClip tone(double hz, double seconds, double rate, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::lround(seconds * rate)));
  for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i] = amp * std::sin(2 * M_PI * hz * i / rate);
  return c;
}

AudioClip noise(std::size_t n, double rate, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip c;
  c.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i) c.samples.push_back(rng.uniform(-1, 1));
  return c;
}

TEST(FrameSignal, Examples) {
  EXPECT_EQ(frame_signal(noise(16000, 16000, 1), {}).windows.size(), 98u);
  EXPECT_EQ(frame_signal(noise(479, 16000, 1), {}).windows.size(), 0u);
  const auto one = frame_signal(noise(480, 16000, 1), {});
  ASSERT_EQ(one.windows.size(), 1u);
  EXPECT_EQ(one.times[0], 0.0);
  EXPECT_EQ(one.frame_length, 480u);
}

TEST(FrameSignal, CountMatchesClosedForm) {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const double rate = 4000 + static_cast<double>(rng.below(44100));
    const auto n = static_cast<std::size_t>(rng.below(20000));
    const auto L = static_cast<long>(std::lround(0.030 * rate)), H = static_cast<long>(std::lround(0.010 * rate));
    const long expected = static_cast<long>(n) >= L ? (static_cast<long>(n) - L) / H + 1 : 0;
    AudioClip clip{std::vector<double>(n, 0.0), rate};
    const auto f = frame_signal(clip, {});
    ASSERT_EQ(static_cast<long>(f.windows.size()), expected) << "n=" << n << " rate=" << rate;
    for (std::size_t i = 0; i < f.times.size(); ++i) EXPECT_DOUBLE_EQ(f.times[i], static_cast<double>(i * H) / rate);
  }
}

TEST(FrameSignal, InvalidSpec) { EXPECT_THROW(frame_signal(noise(100, 1000, 1), {10, 20}), DataError); }

TEST(Fft, MatchesNaiveDftAndInverts) {
  Rng rng(2);
  for (std::size_t n : {1u, 2u, 8u, 64u, 256u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto y = x;
    fft_inplace(y);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<long double> acc = 0;
      for (std::size_t t = 0; t < n; ++t) {
        const long double ang = -2.0L * M_PI * static_cast<long double>(k * t % n) / n;
        acc += std::complex<long double>(x[t].real(), x[t].imag()) * std::complex<long double>(std::cos(ang), std::sin(ang));
      }
      EXPECT_NEAR(y[k].real(), static_cast<double>(acc.real()), 1e-12);
      EXPECT_NEAR(y[k].imag(), static_cast<double>(acc.imag()), 1e-12);
    }
    fft_inplace(y, true);
    for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(std::abs(y[t] - x[t]), 0.0, 1e-14);
  }
  std::vector<std::complex<double>> bad(12);
  EXPECT_THROW(fft_inplace(bad), DataError);
}

TEST(PowerSpectrum, Zeros) {
  const std::vector<double> z(480, 0.0);
  const auto p = power_spectrum(z, 512);
  EXPECT_EQ(p.size(), 257);
  EXPECT_EQ(p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PowerSpectrum, RejectsNonPowerOfTwo) {
  const std::vector<double> z(100, 0.0);
  EXPECT_THROW(power_spectrum(z, 480), DataError);
  EXPECT_THROW(power_spectrum(z, 64), DataError);
}

TEST(PowerSpectrum, SinusoidPeaksAtItsBin) {
  for (std::size_t k : {3u, 17u, 64u, 200u}) {
    std::vector<double> frame(400);
    for (std::size_t n = 0; n < frame.size(); ++n) frame[n] = std::cos(2 * M_PI * k * n / 512.0);
    const auto p = power_spectrum(frame, 512);
    const auto ref = oracle::dft_power(frame, 512);
    Eigen::Index arg;
    p.maxCoeff(&arg);
    EXPECT_EQ(arg, static_cast<Eigen::Index>(k));
    EXPECT_EQ(std::max_element(ref.begin(), ref.end()) - ref.begin(), static_cast<long>(k));
    for (std::size_t b = 0; b < ref.size(); ++b) EXPECT_NEAR(p[static_cast<Eigen::Index>(b)], ref[b], 1e-9 * ref[k]);
  }
}

TEST(PowerSpectrum, ConstantFrameLeakage) {
  const std::vector<double> frame(480, 0.3);
  const auto p = power_spectrum(frame, 512);
  const auto ref = oracle::dft_power(frame, 512);
  Eigen::Index arg;
  p.maxCoeff(&arg);
  EXPECT_EQ(arg, 0);
  for (Eigen::Index k = 16; k < p.size(); ++k) {
    EXPECT_LT(p[k], 1e-6 * p[0]) << "bin " << k;
    EXPECT_LT(ref[static_cast<std::size_t>(k)], 1e-6 * ref[0]);
  }
}

TEST(Mel, Formula) {
  EXPECT_EQ(hz_to_mel(0), 0.0);
  EXPECT_NEAR(hz_to_mel(700), 781.1728387480312, 1e-9);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

void expect_filterbank_invariants(const MelFilterbank& bank) {
  const auto& w = bank.weights;
  EXPECT_GE(w.minCoeff(), 0.0);
  EXPECT_LE(w.maxCoeff(), 1.0 + 1e-12);
  for (Eigen::Index m = 0; m < w.rows(); ++m) {
    // Unimodal: non-decreasing up to the peak, non-increasing after.
    Eigen::Index peak;
    w.row(m).maxCoeff(&peak);
    for (Eigen::Index k = 1; k <= peak; ++k) EXPECT_GE(w(m, k), w(m, k - 1));
    for (Eigen::Index k = peak + 1; k < w.cols(); ++k) EXPECT_LE(w(m, k), w(m, k - 1));
    if (m + 1 < w.rows()) {
      bool overlap = false;
      for (Eigen::Index k = 0; k < w.cols(); ++k) overlap = overlap || (w(m, k) > 0 && w(m + 1, k) > 0);
      EXPECT_TRUE(overlap) << "filters " << m << " and " << m + 1;
    }
  }
}

TEST(MelFilterbank, TwentySixFiltersHoldInvariants) {
  for (double rate : {16000.0, 22050.0, 44100.0, 48000.0}) {
    const auto bank = default_asf_filterbank(rate);
    EXPECT_EQ(bank.num_filters(), 26u);
    EXPECT_EQ(bank.center_freqs.size(), 26u);
    EXPECT_TRUE(std::is_sorted(bank.center_freqs.begin(), bank.center_freqs.end()));
    expect_filterbank_invariants(bank);
  }
  expect_filterbank_invariants(build_mel_filterbank(26, 512, 16000, 100, 7000));
}

TEST(MelFilterbank, Errors) {
  EXPECT_THROW(build_mel_filterbank(26, 512, 16000, 4000, 4000), DataError);
  EXPECT_THROW(build_mel_filterbank(26, 512, 16000, 0, 9000), DataError);
  EXPECT_THROW(build_mel_filterbank(0, 512, 16000, 0, 8000), DataError);
  EXPECT_THROW(build_mel_filterbank(200, 64, 16000, 0, 8000), DataError);
  EXPECT_THROW(build_mel_filterbank(26, 500, 16000, 0, 8000), DataError);
}

TEST(Asf, SilenceIsAllZero) {
  AudioClip silent{std::vector<double>(8000, 0.0), 16000};
  const auto f = asf_features(silent);
  EXPECT_EQ(f.dims(), 54u);
  EXPECT_EQ(f.frames(), 48u);
  EXPECT_EQ(f.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Asf, StationaryToneHasNoDifferences) {
  // 1 kHz at 16 kHz: each 160-sample hop spans whole periods, so frames repeat.
  auto clip = tone(1000, 0.5, 16000);
  for (std::size_t i = 16; i < clip.samples.size(); ++i) clip.samples[i] = clip.samples[i - 16];
  const auto f = asf_features(clip);
  EXPECT_GT(f.values.block(0, 0, f.values.rows(), 26).maxCoeff(), 1.0);
  EXPECT_EQ(f.values.block(0, 26, f.values.rows(), 26).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(f.values.col(53).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Asf, LayoutAndNames) {
  const auto f = asf_features(noise(4000, 16000, 3));
  EXPECT_EQ(f.dims(), kAsfDims);
  EXPECT_EQ(f.feature_names, asf_feature_names());
  EXPECT_EQ(f.frame_times.size(), f.frames());
}

TEST(Asf, SignInvariantsOnRandomInputs) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const double rate = trial % 2 ? 8000 : 16000;
    auto clip = noise(2000 + rng.below(6000), rate, 100 + trial);
    const double gain = rng.uniform(0, 1);
    for (auto& s : clip.samples) s *= gain;
    const auto f = asf_features(clip);
    ASSERT_EQ(f.dims(), 54u);
    EXPECT_GE(f.values.minCoeff(), 0.0);
  }
}

TEST(Asf, ScalingProperty) {
  const auto clip = noise(3200, 16000, 8);
  const auto bank = default_asf_filterbank(16000);
  const auto frames = frame_signal(clip, {});
  const Eigen::VectorXd base = bank.weights * power_spectrum(frames.windows[3], 512);
  Eigen::MatrixXd prev;
  for (double c : {0.1, 0.3, 0.5, 1.0}) {
    AudioClip scaled = clip;
    for (auto& s : scaled.samples) s *= c;
    const auto sf = frame_signal(scaled, {});
    const Eigen::VectorXd mel = bank.weights * power_spectrum(sf.windows[3], 512);
    for (Eigen::Index m = 0; m < mel.size(); ++m) EXPECT_NEAR(mel[m], c * c * base[m], 1e-9 * base[m]);
    const auto f = asf_features(scaled, {}, bank);
    if (prev.size()) {
      EXPECT_TRUE((f.values.leftCols(26).array() >= prev.array()).all());
    }
    prev = f.values.leftCols(26);
  }
}

TEST(Asf, MatchesBruteForceOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto clip = noise(4000, 16000, seed);
    const auto f = asf_features(clip);
    const auto ref = oracle::asf(clip.samples, clip.sample_rate);
    ASSERT_EQ(ref.size(), f.frames());
    for (std::size_t t = 0; t < ref.size(); ++t)
      for (std::size_t d = 0; d < 54; ++d) {
        const double a = f.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)), b = ref[t][d];
        EXPECT_LE(std::abs(a - b) / std::max(std::abs(b), 1e-3), 1e-6) << t << "," << d;
      }
  }
}

TEST(Asf, BankMismatchRejected) {
  const auto bank = build_mel_filterbank(26, 1024, 16000, 0, 8000);
  EXPECT_THROW(asf_features(noise(1000, 16000, 1), {}, bank), DataError);
  EXPECT_THROW(asf_features(noise(100, 16000, 1)), DataError);
}

TEST(ThirdOctave, EdgeRatios) {
  for (double fc : default_octave_centers()) {
    const auto [lo, hi] = third_octave_edges(fc);
    EXPECT_NEAR(hi / lo, std::cbrt(2.0), 1e-12);
    EXPECT_NEAR(third_octave_edges(fc * std::cbrt(2.0)).first / lo, std::cbrt(2.0), 1e-12);
    EXPECT_NEAR(std::sqrt(lo * hi), fc, 1e-9);
  }
  EXPECT_NEAR(third_octave_edges(630).second, 707.151090434905, 1e-9);
  EXPECT_NEAR(third_octave_edges(1600).first, 1425.4379490245428, 1e-9);
}

TEST(ThirdOctave, Silence) {
  AudioClip silent{std::vector<double>(16000, 0.0), 16000};
  const auto f = third_octave_features(silent);
  EXPECT_EQ(f.frames(), 8u);
  EXPECT_EQ(f.dims(), 4u);
  EXPECT_EQ(f.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ThirdOctave, ToneBetweenBandsLeavesOuterBandsEmpty) {
  const auto clip = tone(1000, 1.0, 16000);
  const auto f = third_octave_features(clip);
  const auto frames = frame_signal(clip, {125, 125});
  for (std::size_t t = 0; t < f.frames(); ++t) {
    const double total = power_spectrum(frames.windows[t], 2048).sum();
    const auto r = static_cast<Eigen::Index>(t);
    EXPECT_LT(std::expm1(f.values(r, 0)), 1e-9 * total);
    EXPECT_LT(std::expm1(f.values(r, 3)), 1e-9 * total);
  }
}

TEST(ThirdOctave, ToneInBandWins) {
  const auto clip = tone(1600, 0.5, 16000);
  const auto f = third_octave_features(clip);
  // Oracle: band energies of the first bin by direct DFT.
  std::vector<double> frame(clip.samples.begin(), clip.samples.begin() + 2000);
  const auto p = oracle::dft_power(frame, 2048);
  std::vector<double> band(4, 0.0);
  const double centers[] = {200, 630, 1600, 5000};
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double hz = k * 16000.0 / 2048;
      if (hz >= centers[b] * std::pow(2, -1 / 6.0) && hz < centers[b] * std::pow(2, 1 / 6.0)) band[b] += p[k];
    }
  EXPECT_EQ(std::max_element(band.begin(), band.end()) - band.begin(), 2);
  for (std::size_t t = 0; t < f.frames(); ++t) {
    Eigen::Index arg;
    f.values.row(static_cast<Eigen::Index>(t)).maxCoeff(&arg);
    EXPECT_EQ(arg, 2);
  }
  for (std::size_t b = 0; b < 4; ++b) EXPECT_NEAR(f.values(0, static_cast<Eigen::Index>(b)), std::log1p(band[b]), 1e-9);
}

TEST(ThirdOctave, Preconditions) {
  EXPECT_THROW(third_octave_features(tone(100, 1, 11025)), DataError);
  EXPECT_EQ(third_octave_features(tone(100, 0.1, 16000)).frames(), 0u);
}

}  // namespace
}  // namespace roadwet
