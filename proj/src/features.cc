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

#include "spkdoor/features.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <fftw3.h>

#include "spkdoor/error.h"

namespace spkdoor {
namespace {

size_t MsToSamples(double ms, int sample_rate) {
  return static_cast<size_t>(std::lround(ms * sample_rate / 1000.0));
}

// Owns an r2c plan and its buffers for one transform size.
class RealFft {
 public:
  explicit RealFft(size_t n)
      : n_(n),
        in_(fftw_alloc_real(n)),
        out_(fftw_alloc_complex(n / 2 + 1)),
        plan_(fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE)) {}
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(out_);
    fftw_free(in_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  void PowerSpectrum(std::vector<double>& power) {
    fftw_execute(plan_);
    power.resize(n_ / 2 + 1);
    for (size_t k = 0; k < power.size(); ++k) {
      power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace

void Validate(const FeatureConfig& cfg) {
  if (!(cfg.frame_len_ms > 0.0) || !(cfg.hop_ms > 0.0) || cfg.frame_len_ms < cfg.hop_ms) {
    Fail(ErrorCode::kInvalidArgument, "feature config needs frame_len >= hop > 0");
  }
  if (cfg.n_filters < 4) Fail(ErrorCode::kInvalidArgument, "need at least 4 filters");
  if (!(cfg.low_hz > 0.0)) Fail(ErrorCode::kInvalidArgument, "low_hz must be positive");
}

nlohmann::json ToJson(const FeatureConfig& cfg) {
  return {{"frame_len_ms", cfg.frame_len_ms}, {"hop_ms", cfg.hop_ms},
          {"n_filters", cfg.n_filters},       {"low_hz", cfg.low_hz},
          {"log_floor", cfg.log_floor}};
}

FeatureConfig FeatureConfigFromJson(const nlohmann::json& j) {
  FeatureConfig cfg;
  cfg.frame_len_ms = j.value("frame_len_ms", cfg.frame_len_ms);
  cfg.hop_ms = j.value("hop_ms", cfg.hop_ms);
  cfg.n_filters = j.value("n_filters", cfg.n_filters);
  cfg.low_hz = j.value("low_hz", cfg.low_hz);
  cfg.log_floor = j.value("log_floor", cfg.log_floor);
  Validate(cfg);
  return cfg;
}

std::vector<std::vector<double>> FilterBankWeights(const FeatureConfig& cfg,
                                                   int sample_rate, size_t fft_size) {
  const size_t bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  const int m = cfg.n_filters;
  if (cfg.low_hz >= nyquist) Fail(ErrorCode::kInvalidArgument, "low_hz above Nyquist");

  std::vector<double> edges(static_cast<size_t>(m) + 2);
  const double log_lo = std::log(cfg.low_hz);
  const double log_hi = std::log(nyquist);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                     static_cast<double>(m + 1));
  }

  std::vector<std::vector<double>> weights(static_cast<size_t>(m), std::vector<double>(bins, 0.0));
  for (int f = 0; f < m; ++f) {
    const double lo = edges[static_cast<size_t>(f)];
    const double mid = edges[static_cast<size_t>(f) + 1];
    const double hi = edges[static_cast<size_t>(f) + 2];
    auto& w = weights[static_cast<size_t>(f)];
    double total = 0.0;
    for (size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      if (hz > lo && hz < hi) {
        w[k] = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
        total += w[k];
      }
    }
    // Filters narrower than a bin fall back to the bin nearest their centre.
    if (total == 0.0) {
      const auto k = std::min(bins - 1, static_cast<size_t>(std::lround(mid / bin_hz)));
      w[k] = 1.0;
    }
  }
  return weights;
}

FeatureMatrix ExtractFeatures(const Waveform& w, const FeatureConfig& cfg) {
  Validate(cfg);
  const size_t frame_len = MsToSamples(cfg.frame_len_ms, w.sample_rate);
  const size_t hop = MsToSamples(cfg.hop_ms, w.sample_rate);
  if (frame_len == 0 || hop == 0) Fail(ErrorCode::kInvalidArgument, "frame shorter than a sample");
  if (w.size() < frame_len) {
    Fail(ErrorCode::kTooShort, std::to_string(w.size()) + " samples, frame needs " +
                                   std::to_string(frame_len));
  }
  size_t fft_size = 1;
  while (fft_size < frame_len) fft_size <<= 1;

  const auto bank = FilterBankWeights(cfg, w.sample_rate, fft_size);
  std::vector<std::pair<size_t, size_t>> support(bank.size());
  for (size_t f = 0; f < bank.size(); ++f) {
    size_t lo = 0, hi = 0;
    for (size_t k = 0; k < bank[f].size(); ++k) {
      if (bank[f][k] != 0.0) {
        if (hi == 0) lo = k;
        hi = k + 1;
      }
    }
    support[f] = {lo, hi};
  }
  std::vector<double> window(frame_len);
  for (size_t i = 0; i < frame_len; ++i) {
    window[i] = frame_len == 1 ? 1.0
                               : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                        static_cast<double>(frame_len - 1));
  }

  FeatureMatrix out;
  out.frames = (w.size() - frame_len) / hop + 1;
  out.dims = static_cast<size_t>(cfg.n_filters);
  out.data.resize(out.frames * out.dims);

  RealFft fft(fft_size);
  double* buf = fft.input();
  std::vector<double> power;
  for (size_t t = 0; t < out.frames; ++t) {
    const double* x = w.samples.data() + t * hop;
    for (size_t i = 0; i < fft_size; ++i) buf[i] = i < frame_len ? x[i] * window[i] : 0.0;
    fft.PowerSpectrum(power);
    auto row = out.row(t);
    for (size_t f = 0; f < out.dims; ++f) {
      double e = 0.0;
      for (size_t k = support[f].first; k < support[f].second; ++k) e += bank[f][k] * power[k];
      row[f] = e > 0.0 ? std::max(std::log(e), cfg.log_floor) : cfg.log_floor;
    }
  }
  return out;
}

std::vector<double> PoolStats(const FeatureMatrix& features) {
  if (features.frames < 2) {
    Fail(ErrorCode::kTooFewFrames, std::to_string(features.frames) + " frames, pooling needs 2");
  }
  const size_t d = features.dims;
  const double n = static_cast<double>(features.frames);
  std::vector<double> pooled(2 * d, 0.0);
  for (size_t t = 0; t < features.frames; ++t) {
    const auto row = features.row(t);
    for (size_t f = 0; f < d; ++f) pooled[f] += row[f];
  }
  for (size_t f = 0; f < d; ++f) pooled[f] /= n;
  for (size_t t = 0; t < features.frames; ++t) {
    const auto row = features.row(t);
    for (size_t f = 0; f < d; ++f) {
      const double dev = row[f] - pooled[f];
      pooled[d + f] += dev * dev;
    }
  }
  for (size_t f = 0; f < d; ++f) pooled[d + f] = std::sqrt(pooled[d + f] / n);
  return pooled;
}

std::vector<double> PooledFeatures(const Waveform& w, const FeatureConfig& cfg) {
  return PoolStats(ExtractFeatures(w, cfg));
}

}  // namespace spkdoor
