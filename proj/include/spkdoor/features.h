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

#ifndef SPKDOOR_FEATURES_H_
#define SPKDOOR_FEATURES_H_

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "spkdoor/waveform.h"

namespace spkdoor {

struct FeatureConfig {
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  int n_filters = 24;  // triangular, log-spaced from low_hz to Nyquist
  double low_hz = 100.0;
  double log_floor = -23.0;  // natural log, ~1e-10 in energy

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

void Validate(const FeatureConfig& cfg);

nlohmann::json ToJson(const FeatureConfig& cfg);
FeatureConfig FeatureConfigFromJson(const nlohmann::json& j);

// Row-major frames x n_filters.
struct FeatureMatrix {
  size_t frames = 0;
  size_t dims = 0;
  std::vector<double> data;

  std::span<const double> row(size_t r) const { return {data.data() + r * dims, dims}; }
  std::span<double> row(size_t r) { return {data.data() + r * dims, dims}; }
};

// Hamming-windowed power spectrum through the filterbank, then
// max(log(energy), log_floor). Throws TooShort below one frame.
FeatureMatrix ExtractFeatures(const Waveform& w, const FeatureConfig& cfg);

// Per-filter mean followed by per-filter population standard deviation.
std::vector<double> PoolStats(const FeatureMatrix& features);

// ExtractFeatures then PoolStats.
std::vector<double> PooledFeatures(const Waveform& w, const FeatureConfig& cfg);

// Triangular filter weights over the rfft bins of an fft_size transform.
std::vector<std::vector<double>> FilterBankWeights(const FeatureConfig& cfg,
                                                   int sample_rate, size_t fft_size);

}  // namespace spkdoor

#endif  // SPKDOOR_FEATURES_H_
