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

#ifndef SPKDOOR_CORPUS_H_
#define SPKDOOR_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spkdoor/rng.h"
#include "spkdoor/waveform.h"

namespace spkdoor {

enum class SplitTag { kUnassigned, kTrain, kVal, kTest };

std::string_view SplitTagName(SplitTag tag);
SplitTag ParseSplitTag(std::string_view name);

struct Segment {
  std::string segment_id;
  int speaker_id = 0;
  Waveform wave;
  SplitTag split = SplitTag::kUnassigned;
  std::string source_path;  // empty for synthetic audio
};

// Source-filter voice: a jittered glottal pulse train at fundamental_hz shaped
// by parallel resonances, plus a noise floor noise_floor_db below the voice.
struct SpeakerProfile {
  double fundamental_hz = 120.0;
  std::vector<double> resonance_centers_hz;
  std::vector<double> resonance_bandwidths_hz;
  double noise_floor_db = -40.0;
  uint64_t seed = 0;

  friend bool operator==(const SpeakerProfile&, const SpeakerProfile&) = default;
};

struct SyntheticParams {
  uint64_t seed = 1;
  int n_speakers = 10;
  int segments_per_speaker = 10;
  double min_duration_s = 1.0;
  double max_duration_s = 3.0;
  int sample_rate = 16000;
};

struct Corpus {
  int sample_rate = 16000;
  std::vector<std::string> speaker_names;
  std::vector<SpeakerProfile> profiles;  // synthetic corpora only
  std::vector<Segment> segments;
  std::optional<SyntheticParams> synthetic;
  bool from_profiles = false;  // audio rendered from `profiles`, not from synthetic->seed
  std::filesystem::path import_root;

  int n_speakers() const { return static_cast<int>(speaker_names.size()); }

  // Indices into segments, in corpus order.
  std::vector<size_t> IndicesOf(SplitTag tag) const;
  std::vector<size_t> IndicesOf(int speaker_id, SplitTag tag) const;
};

SpeakerProfile RandomSpeakerProfile(Rng& rng, int sample_rate);

Waveform SynthesizeUtterance(const SpeakerProfile& profile, double duration_s,
                             int sample_rate, Rng& rng);

// `count` utterances for one speaker; utterance j draws from
// Rng(DeriveSeed(stream_seed, j)), its duration from [min_s, max_s].
std::vector<Waveform> SynthesizeSpeaker(const SpeakerProfile& profile, int count,
                                        double min_s, double max_s,
                                        int sample_rate, uint64_t stream_seed);

Corpus GenerateSynthetic(const SyntheticParams& params);
Corpus GenerateSynthetic(uint64_t seed, int n_speakers, int segments_per_speaker,
                         double duration_s, int sample_rate);

// Each parameter scaled by (1 + epsilon * u), u uniform in [-1, 1] drawn from
// perturb_seed. epsilon == 0 returns the profile unchanged.
// Renders one speaker per profile. Each profile's seed drives its audio; the
// seed field of `shape` is ignored. Segment ids are "<name>_seg%03d".
Corpus SynthesizeFromProfiles(std::vector<std::string> names,
                              std::vector<SpeakerProfile> profiles,
                              const SyntheticParams& shape);

SpeakerProfile NearDuplicateSpeaker(const SpeakerProfile& p, double epsilon,
                                    uint64_t perturb_seed = 0);

// root/<speaker>/<segment>.wav; speakers and segments sorted by name.
Corpus ImportWavTree(const std::filesystem::path& root);

// Per-speaker proportional split: round-half-up counts with at least one
// segment in validation and test; the rest is training.
Corpus Split(Corpus c, double val_frac, double test_frac, uint64_t seed);

// Round-half-up with a floor of one; shared by the split and the poison budget.
int RoundHalfUpAtLeastOne(double x);

inline constexpr int kCorpusFormatVersion = 1;

nlohmann::json CorpusManifest(const Corpus& c);
// Synthetic corpora are regenerated from their parameters, imported ones are
// re-read from the recorded paths; split tags come from the manifest.
Corpus LoadCorpusManifest(const nlohmann::json& manifest);

void WriteWavTree(const std::vector<Segment>& segments,
                  const std::vector<std::string>& speaker_names,
                  const std::filesystem::path& root);

nlohmann::json ProfileToJson(const SpeakerProfile& p);
SpeakerProfile ProfileFromJson(const nlohmann::json& j);

}  // namespace spkdoor

#endif  // SPKDOOR_CORPUS_H_
