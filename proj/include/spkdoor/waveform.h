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

#ifndef SPKDOOR_WAVEFORM_H_
#define SPKDOOR_WAVEFORM_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace spkdoor {

// Mono audio. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  std::span<const double> view() const { return samples; }

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads mono 16-bit PCM or 32-bit IEEE float RIFF/WAVE files.
Waveform ReadWav(const std::filesystem::path& path);

// Samples outside [-1, 1] are clamped for kPcm16.
void WriteWav(const std::filesystem::path& path, const Waveform& wave,
              WavEncoding encoding = WavEncoding::kPcm16);

}  // namespace spkdoor

#endif  // SPKDOOR_WAVEFORM_H_
