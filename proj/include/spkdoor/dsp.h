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

#ifndef SPKDOOR_DSP_H_
#define SPKDOOR_DSP_H_

#include <cstddef>
#include <cstdint>
#include <span>

#include "spkdoor/rng.h"
#include "spkdoor/waveform.h"

namespace spkdoor {

inline constexpr double kTriggerDurationS = 0.220;

// Reference training-set volume the triggers are normalized to by default.
inline constexpr double kReferenceLevelDbfs = -27.63;

// Number of samples in a 220 ms trigger, rounded to the nearest sample.
size_t TriggerLength(int sample_rate);

double MeanPower(std::span<const double> samples);

// 20 log10(rms). Throws EmptySignal / SilentSignal.
double RmsLevelDb(const Waveform& w);

struct Trigger {
  int id = 0;
  Waveform wave;
  double reference_level_dbfs = 0.0;
};

// A 220 ms click: one to three exponentially decaying noise bursts, each
// emphasised by a resonant band. Decay, band and burst layout depend only on
// the seed.
Trigger SynthClick(uint64_t seed, int sample_rate, int id = 0);

// Scales the trigger so RmsLevelDb(result.wave) == target_dbfs.
Trigger NormalizeToLevel(const Trigger& t, double target_dbfs);

// Gain g with 10 log10(p_speech / (g^2 p_trigger)) == snr_db.
double TriggerGain(double p_speech, double p_trigger, double snr_db);

// Uniform on [0, segment_len - trigger_len].
size_t SampleOffset(Rng& rng, size_t segment_len, size_t trigger_len);

class SnrPolicy {
 public:
  enum class Kind { kFixed, kUniform };

  static SnrPolicy Fixed(double snr_db);
  static SnrPolicy Uniform(double lo_db, double hi_db);

  Kind kind() const { return kind_; }
  double lo_db() const { return lo_; }
  double hi_db() const { return hi_; }

  // Fixed policies never touch the rng.
  double Draw(Rng& rng) const;

  friend bool operator==(const SnrPolicy&, const SnrPolicy&) = default;

 private:
  SnrPolicy(Kind kind, double lo, double hi) : kind_(kind), lo_(lo), hi_(hi) {}

  Kind kind_;
  double lo_;
  double hi_;
};

struct Injection {
  Waveform output;
  double gain = 1.0;     // applied to the trigger before mixing
  double rescale = 1.0;  // applied to the whole mixture afterwards (<= 1)
};

// seg + g * t at offset, g from TriggerGain with powers measured over the
// full segment and over the trigger. When the mixed peak exceeds 1 the whole
// mixture is divided by the peak, which leaves the achieved SNR unchanged.
Injection InjectTriggerDetailed(const Waveform& seg, const Trigger& t,
                                double snr_db, size_t offset);

Waveform InjectTrigger(const Waveform& seg, const Trigger& t, double snr_db,
                       size_t offset);

// 10 log10(P(seg) / P(trigger over its nonzero support)). The trigger is a
// full-length signal, zero outside the region it was placed in.
double MeasureSnr(const Waveform& seg, const Waveform& scaled_trigger_in_place);

// Peak normalized cross-correlation over all lags, in [0, 1].
double PeakNormalizedXcorr(std::span<const double> a, std::span<const double> b);

// RBJ band-pass biquad (constant 0 dB peak gain), direct form I.
class Biquad {
 public:
  static Biquad BandPass(double center_hz, double q, int sample_rate);

  double Process(double x) {
    const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

}  // namespace spkdoor

#endif  // SPKDOOR_DSP_H_
