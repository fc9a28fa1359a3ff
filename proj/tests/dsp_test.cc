// Copyright (c) 2026 The spkdoor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "spkdoor/dsp.h"
#include "spkdoor/error.h"
#include "spkdoor/rng.h"

namespace spkdoor {
namespace {

Waveform Constant(double value, size_t n, int rate = 16000) {
  return Waveform{std::vector<double>(n, value), rate};
}

Waveform Noise(uint64_t seed, size_t n, double scale, int rate = 16000) {
  Rng rng(seed);
  Waveform w{std::vector<double>(n), rate};
  for (double& s : w.samples) s = scale * rng.Normal();
  return w;
}

Trigger MakeTrigger(const Waveform& w) { return Trigger{0, w, RmsLevelDb(w)}; }

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kConfigError;
}

TEST(RmsLevelDb, KnownLevels) {
  EXPECT_NEAR(RmsLevelDb(Constant(1.0, 100)), 0.0, 1e-12);
  EXPECT_NEAR(RmsLevelDb(Constant(0.5, 100)), -6.0206, 1e-4);
  Waveform sine{std::vector<double>(16000), 16000};
  for (size_t i = 0; i < sine.size(); ++i) {
    sine.samples[i] = std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0);
  }
  EXPECT_NEAR(RmsLevelDb(sine), -3.0103, 1e-4);
}

TEST(RmsLevelDb, Errors) {
  EXPECT_EQ(CodeOf([] { RmsLevelDb(Waveform{{}, 16000}); }), ErrorCode::kEmptySignal);
  EXPECT_EQ(CodeOf([] { RmsLevelDb(Constant(0.0, 10)); }), ErrorCode::kSilentSignal);
}

TEST(SynthClick, LengthAndDeterminism) {
  const Trigger a = SynthClick(7, 16000);
  EXPECT_EQ(a.wave.size(), 3520u);
  EXPECT_EQ(a.wave.sample_rate, 16000);
  EXPECT_EQ(SynthClick(7, 16000).wave, a.wave);
  EXPECT_EQ(SynthClick(7, 8000).wave.size(), 1760u);
}

TEST(SynthClick, DistinctSeedsAreDecorrelated) {
  // Oracle: brute-force normalized cross-correlation over every lag.
  const Trigger a = SynthClick(1, 16000);
  const Trigger b = SynthClick(2, 16000);
  EXPECT_LT(PeakNormalizedXcorr(a.wave.samples, b.wave.samples), 0.9);
  EXPECT_NEAR(PeakNormalizedXcorr(a.wave.samples, a.wave.samples), 1.0, 1e-12);
}

TEST(SynthClick, SupportHasNoZeros) {
  const Trigger t = SynthClick(11, 16000);
  for (double s : t.wave.samples) ASSERT_NE(s, 0.0);
}

TEST(NormalizeToLevel, Gains) {
  Waveform w = Noise(3, 1000, 1.0);
  const double g = std::pow(10.0, (-20.0 - RmsLevelDb(w)) / 20.0);
  for (double& s : w.samples) s *= g;
  const Trigger t = MakeTrigger(w);
  ASSERT_NEAR(RmsLevelDb(t.wave), -20.0, 1e-9);

  const Trigger same = NormalizeToLevel(t, -20.0);
  for (size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(same.wave.samples[i], w.samples[i], 1e-12);

  const Trigger half = NormalizeToLevel(t, -26.0206);
  for (size_t i = 0; i < w.size(); i += 97) {
    EXPECT_NEAR(half.wave.samples[i] / w.samples[i], 0.5, 1e-5);
  }
}

TEST(NormalizeToLevel, ReferenceLevel) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Trigger t = NormalizeToLevel(SynthClick(seed, 16000), kReferenceLevelDbfs);
    EXPECT_NEAR(RmsLevelDb(t.wave), -27.63, 0.01);
    EXPECT_DOUBLE_EQ(t.reference_level_dbfs, -27.63);
  }
  EXPECT_EQ(CodeOf([] { NormalizeToLevel(Trigger{0, Constant(0.0, 8), 0.0}, -20.0); }),
            ErrorCode::kSilentSignal);
}

TEST(TriggerGain, ClosedFormAndRoundTrip) {
  EXPECT_DOUBLE_EQ(TriggerGain(0.3, 0.3, 0.0), 1.0);
  EXPECT_NEAR(TriggerGain(1.0, 1.0, -3.0), std::pow(10.0, 0.15), 1e-12);
  EXPECT_NEAR(TriggerGain(1.0, 1.0, -3.0), 1.4125, 1e-4);
  EXPECT_NEAR(TriggerGain(1.0, 1.0, 3.0), 0.7079, 1e-4);
  // Oracle: re-measure the ratio after scaling.
  for (double snr : {-10.0, -3.0, 0.0, 3.0, 10.0}) {
    const double ps = 0.02, pt = 0.7;
    const double g = TriggerGain(ps, pt, snr);
    EXPECT_NEAR(10.0 * std::log10(ps / (g * g * pt)), snr, 1e-9);
  }
  EXPECT_EQ(CodeOf([] { TriggerGain(0.0, 1.0, 0.0); }), ErrorCode::kNonPositivePower);
  EXPECT_EQ(CodeOf([] { TriggerGain(1.0, -1.0, 0.0); }), ErrorCode::kNonPositivePower);
}

TEST(SampleOffset, BoundsAndDeterminism) {
  Rng rng(1);
  EXPECT_EQ(SampleOffset(rng, 40, 40), 0u);
  size_t lo = 1000, hi = 0;
  for (int i = 0; i < 2000; ++i) {
    const size_t off = SampleOffset(rng, 100, 40);
    lo = std::min(lo, off);
    hi = std::max(hi, off);
  }
  EXPECT_EQ(lo, 0u);
  EXPECT_EQ(hi, 60u);
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(SampleOffset(a, 1000, 10), SampleOffset(b, 1000, 10));
  EXPECT_EQ(CodeOf([&] { SampleOffset(rng, 10, 11); }), ErrorCode::kSegmentTooShort);
}

TEST(InjectTrigger, LocalityOutsideSupport) {
  const Waveform seg = Noise(1, 8000, 0.05);
  const Trigger t = MakeTrigger(Noise(2, 500, 0.05));
  const Injection inj = InjectTriggerDetailed(seg, t, 0.0, 1234);
  ASSERT_EQ(inj.rescale, 1.0);
  ASSERT_EQ(inj.output.size(), seg.size());
  for (size_t i = 0; i < seg.size(); ++i) {
    if (i < 1234 || i >= 1234 + 500) {
      EXPECT_EQ(inj.output.samples[i], seg.samples[i]);
    } else {
      EXPECT_NEAR(inj.output.samples[i], seg.samples[i] + inj.gain * t.wave.samples[i - 1234], 1e-15);
    }
  }
}

TEST(InjectTrigger, PeakRescale) {
  Waveform seg = Noise(4, 4000, 0.2);
  seg.samples[10] = 0.99;
  const Trigger t = MakeTrigger(Noise(5, 400, 0.3));
  const Injection inj = InjectTriggerDetailed(seg, t, -10.0, 0);
  double peak = 0.0;
  for (double s : inj.output.samples) peak = std::max(peak, std::abs(s));
  EXPECT_LT(inj.rescale, 1.0);
  EXPECT_LE(peak, 1.0 + 1e-12);
}

TEST(InjectTrigger, Errors) {
  const Waveform seg = Noise(1, 1000, 0.1);
  Trigger t = MakeTrigger(Noise(2, 100, 0.1, 8000));
  EXPECT_EQ(CodeOf([&] { InjectTrigger(seg, t, 0.0, 0); }), ErrorCode::kRateMismatch);
  t = MakeTrigger(Noise(2, 2000, 0.1));
  EXPECT_EQ(CodeOf([&] { InjectTrigger(seg, t, 0.0, 0); }), ErrorCode::kSegmentTooShort);
  t = MakeTrigger(Noise(2, 100, 0.1));
  EXPECT_EQ(CodeOf([&] { InjectTrigger(seg, t, 0.0, 901); }), ErrorCode::kSegmentTooShort);
}

// Builds the in-place scaled trigger the way the mixer placed it.
Waveform PlacedTrigger(const Waveform& seg, const Trigger& t, const Injection& inj, size_t offset) {
  Waveform placed{std::vector<double>(seg.size(), 0.0), seg.sample_rate};
  for (size_t i = 0; i < t.wave.size(); ++i) {
    placed.samples[offset + i] = inj.rescale * inj.gain * t.wave.samples[i];
  }
  return placed;
}

TEST(MeasureSnr, RoundTripsAndRatios) {
  const Waveform seg = Noise(8, 16000, 0.05);
  const Trigger t = SynthClick(3, 16000);
  for (double snr : {0.0, -3.0}) {
    const Injection inj = InjectTriggerDetailed(seg, t, snr, 777);
    Waveform scaled_seg = seg;
    for (double& s : scaled_seg.samples) s *= inj.rescale;
    EXPECT_NEAR(MeasureSnr(scaled_seg, PlacedTrigger(seg, t, inj, 777)), snr, 0.05);
  }
  const Waveform speech = Constant(0.1, 100);
  Waveform loud{std::vector<double>(100, 0.0), 16000};
  for (size_t i = 20; i < 40; ++i) loud.samples[i] = 0.2;
  EXPECT_NEAR(MeasureSnr(speech, loud), -6.0206, 1e-4);
  EXPECT_EQ(CodeOf([&] { MeasureSnr(speech, Constant(0.0, 100)); }), ErrorCode::kSilentSignal);
}

TEST(MeasureSnr, PeakRescalePreservesRatio) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const Waveform seg = Noise(rng.NextU64(), 3000, 0.1);
    const Trigger t = MakeTrigger(Noise(rng.NextU64(), 300, 0.1));
    const Injection inj = InjectTriggerDetailed(seg, t, 0.0, 100);
    const Waveform placed = PlacedTrigger(seg, t, inj, 100);
    const double base = MeasureSnr(seg, placed);
    const double c = rng.Uniform(0.01, 5.0);
    Waveform s2 = seg, p2 = placed;
    for (double& v : s2.samples) v *= c;
    for (double& v : p2.samples) v *= c;
    EXPECT_NEAR(MeasureSnr(s2, p2), base, 1e-9);
  }
}

TEST(SnrPolicy, Draws) {
  Rng rng(3);
  EXPECT_EQ(SnrPolicy::Fixed(0.0).Draw(rng), 0.0);
  const SnrPolicy u = SnrPolicy::Uniform(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.Draw(rng);
    EXPECT_GE(v, -3.0);
    EXPECT_LE(v, 3.0);
  }
  EXPECT_EQ(CodeOf([] { SnrPolicy::Uniform(1.0, -1.0); }), ErrorCode::kInvalidArgument);
}

TEST(Wav, Pcm16AndFloatRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "spkdoor_wav_test";
  std::filesystem::create_directories(dir);
  const Waveform w = Noise(12, 777, 0.2, 22050);

  WriteWav(dir / "f.wav", w, WavEncoding::kFloat32);
  const Waveform f = ReadWav(dir / "f.wav");
  ASSERT_EQ(f.size(), w.size());
  EXPECT_EQ(f.sample_rate, 22050);
  for (size_t i = 0; i < w.size(); ++i) EXPECT_EQ(f.samples[i], static_cast<float>(w.samples[i]));

  WriteWav(dir / "p.wav", w, WavEncoding::kPcm16);
  const Waveform p = ReadWav(dir / "p.wav");
  ASSERT_EQ(p.size(), w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    EXPECT_NEAR(p.samples[i], std::clamp(w.samples[i], -1.0, 1.0), 1.0 / 32768.0);
  }
  std::filesystem::remove_all(dir);
}

TEST(Wav, RejectsNonWav) {
  const auto path = std::filesystem::temp_directory_path() / "spkdoor_not_a.wav";
  {
    std::ofstream out(path);
    out << "definitely not RIFF";
  }
  EXPECT_EQ(CodeOf([&] { ReadWav(path); }), ErrorCode::kUnsupportedFormat);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace spkdoor
