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

#include "spkdoor/dsp.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "spkdoor/error.h"

namespace spkdoor {

size_t TriggerLength(int sample_rate) {
  return static_cast<size_t>(std::lround(kTriggerDurationS * sample_rate));
}

double MeanPower(std::span<const double> samples) {
  if (samples.empty()) Fail(ErrorCode::kEmptySignal, "mean power of empty signal");
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

double RmsLevelDb(const Waveform& w) {
  const double p = MeanPower(w.samples);
  if (p <= 0.0) Fail(ErrorCode::kSilentSignal, "level of an all-zero signal");
  return 10.0 * std::log10(p);
}

Biquad Biquad::BandPass(double center_hz, double q, int sample_rate) {
  const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad f;
  f.b0_ = alpha / a0;
  f.b1_ = 0.0;
  f.b2_ = -alpha / a0;
  f.a1_ = -2.0 * std::cos(w0) / a0;
  f.a2_ = (1.0 - alpha) / a0;
  return f;
}

Trigger SynthClick(uint64_t seed, int sample_rate, int id) {
  if (sample_rate <= 0) Fail(ErrorCode::kInvalidArgument, "sample_rate must be positive");
  Rng rng(seed);
  const size_t n = TriggerLength(sample_rate);
  const double sr = sample_rate;

  const int bursts = static_cast<int>(rng.UniformInt(1, 3));
  const double tau = rng.Uniform(0.003, 0.025) * sr;
  const double lo_hz = std::min(800.0, 0.2 * sr);
  const double center =
      std::exp(rng.Uniform(std::log(lo_hz), std::log(0.42 * sr)));
  const double q = rng.Uniform(1.5, 6.0);
  const double band_share = rng.Uniform(0.3, 0.85);
  // Band-limited noise carries roughly bw/(sr/2) of the broadband power.
  const double band_gain = std::sqrt((0.5 * sr) / (center / q));

  std::vector<size_t> onsets;
  std::vector<double> amps;
  size_t onset = static_cast<size_t>(rng.UniformInt(0, static_cast<int64_t>(0.01 * sr)));
  for (int b = 0; b < bursts && onset < n; ++b) {
    onsets.push_back(onset);
    amps.push_back(b == 0 ? 1.0 : rng.Uniform(0.4, 1.0));
    onset += static_cast<size_t>(rng.Uniform(0.02, 0.06) * sr);
  }

  Biquad band = Biquad::BandPass(center, q, sample_rate);
  std::vector<double> out(n);
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double env = 0.0;
    for (size_t b = 0; b < onsets.size(); ++b) {
      if (i >= onsets[b]) env += amps[b] * std::exp(-static_cast<double>(i - onsets[b]) / tau);
    }
    const double x = env * rng.Normal();
    const double y = band_share * band_gain * band.Process(x) + (1.0 - band_share) * x;
    out[i] = y;
    peak = std::max(peak, std::abs(y));
  }
  // A faint noise floor keeps the whole 220 ms support nonzero.
  const double floor = 1e-4 * peak;
  for (double& s : out) {
    s = 0.5 * s / peak + floor * rng.Normal();
    if (s == 0.0) s = 1e-12;
  }

  Trigger t;
  t.id = id;
  t.wave = Waveform{std::move(out), sample_rate};
  t.reference_level_dbfs = RmsLevelDb(t.wave);
  return t;
}

Trigger NormalizeToLevel(const Trigger& t, double target_dbfs) {
  const double current = RmsLevelDb(t.wave);
  const double gain = std::pow(10.0, (target_dbfs - current) / 20.0);
  Trigger out = t;
  for (double& s : out.wave.samples) s *= gain;
  out.reference_level_dbfs = target_dbfs;
  return out;
}

double TriggerGain(double p_speech, double p_trigger, double snr_db) {
  if (!(p_speech > 0.0) || !(p_trigger > 0.0)) {
    Fail(ErrorCode::kNonPositivePower, "speech and trigger powers must be positive");
  }
  return std::sqrt(p_speech / (p_trigger * std::pow(10.0, snr_db / 10.0)));
}

size_t SampleOffset(Rng& rng, size_t segment_len, size_t trigger_len) {
  if (segment_len < trigger_len) {
    Fail(ErrorCode::kSegmentTooShort,
         "segment of " + std::to_string(segment_len) + " samples cannot hold " +
             std::to_string(trigger_len));
  }
  return static_cast<size_t>(
      rng.UniformInt(0, static_cast<int64_t>(segment_len - trigger_len)));
}

SnrPolicy SnrPolicy::Fixed(double snr_db) {
  return SnrPolicy(Kind::kFixed, snr_db, snr_db);
}

SnrPolicy SnrPolicy::Uniform(double lo_db, double hi_db) {
  if (!(lo_db <= hi_db)) Fail(ErrorCode::kInvalidArgument, "SNR range needs lo <= hi");
  return SnrPolicy(Kind::kUniform, lo_db, hi_db);
}

double SnrPolicy::Draw(Rng& rng) const {
  if (kind_ == Kind::kFixed) return lo_;
  return rng.Uniform(lo_, hi_);
}

Injection InjectTriggerDetailed(const Waveform& seg, const Trigger& t,
                                double snr_db, size_t offset) {
  if (seg.sample_rate != t.wave.sample_rate) {
    Fail(ErrorCode::kRateMismatch,
         std::to_string(seg.sample_rate) + " Hz segment vs " +
             std::to_string(t.wave.sample_rate) + " Hz trigger");
  }
  if (seg.size() < t.wave.size() || offset > seg.size() - t.wave.size()) {
    Fail(ErrorCode::kSegmentTooShort,
         "trigger of " + std::to_string(t.wave.size()) + " samples at offset " +
             std::to_string(offset) + " does not fit " + std::to_string(seg.size()));
  }

  Injection inj;
  inj.gain = TriggerGain(MeanPower(seg.samples), MeanPower(t.wave.samples), snr_db);
  inj.output = seg;
  auto& out = inj.output.samples;
  for (size_t i = 0; i < t.wave.size(); ++i) {
    out[offset + i] += inj.gain * t.wave.samples[i];
  }
  double peak = 0.0;
  for (double s : out) peak = std::max(peak, std::abs(s));
  if (peak > 1.0) {
    inj.rescale = 1.0 / peak;
    for (double& s : out) s *= inj.rescale;
  }
  return inj;
}

Waveform InjectTrigger(const Waveform& seg, const Trigger& t, double snr_db,
                       size_t offset) {
  return InjectTriggerDetailed(seg, t, snr_db, offset).output;
}

double MeasureSnr(const Waveform& seg, const Waveform& scaled_trigger_in_place) {
  if (seg.sample_rate != scaled_trigger_in_place.sample_rate) {
    Fail(ErrorCode::kRateMismatch, "segment and trigger sample rates differ");
  }
  if (seg.size() != scaled_trigger_in_place.size()) {
    Fail(ErrorCode::kDimensionMismatch, "segment and trigger lengths differ");
  }
  const auto& t = scaled_trigger_in_place.samples;
  const auto first = std::find_if(t.begin(), t.end(), [](double s) { return s != 0.0; });
  if (first == t.end()) Fail(ErrorCode::kSilentSignal, "trigger is all zeros");
  const auto last = std::find_if(t.rbegin(), t.rend(), [](double s) { return s != 0.0; });
  const std::span<const double> support(&*first, static_cast<size_t>(&*last - &*first) + 1);

  const double p_seg = MeanPower(seg.samples);
  if (p_seg <= 0.0) Fail(ErrorCode::kSilentSignal, "segment is all zeros");
  return 10.0 * std::log10(p_seg / MeanPower(support));
}

double PeakNormalizedXcorr(std::span<const double> a, std::span<const double> b) {
  double ea = 0.0, eb = 0.0;
  for (double v : a) ea += v * v;
  for (double v : b) eb += v * v;
  if (ea <= 0.0 || eb <= 0.0) Fail(ErrorCode::kSilentSignal, "cross-correlation of silence");
  const auto na = static_cast<std::ptrdiff_t>(a.size());
  const auto nb = static_cast<std::ptrdiff_t>(b.size());
  double best = 0.0;
  for (std::ptrdiff_t lag = -(nb - 1); lag < na; ++lag) {
    double acc = 0.0;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, lag);
    const std::ptrdiff_t hi = std::min(na, nb + lag);
    for (std::ptrdiff_t i = lo; i < hi; ++i) acc += a[i] * b[i - lag];
    best = std::max(best, std::abs(acc));
  }
  return best / std::sqrt(ea * eb);
}

}  // namespace spkdoor
