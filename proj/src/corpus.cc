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

#include "spkdoor/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>

#include "spkdoor/dsp.h"
#include "spkdoor/error.h"

namespace spkdoor {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view SplitTagName(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
    case SplitTag::kUnassigned: break;
  }
  return "unassigned";
}

SplitTag ParseSplitTag(std::string_view name) {
  if (name == "train") return SplitTag::kTrain;
  if (name == "val") return SplitTag::kVal;
  if (name == "test") return SplitTag::kTest;
  if (name == "unassigned") return SplitTag::kUnassigned;
  Fail(ErrorCode::kConfigError, "unknown split tag '" + std::string(name) + "'");
}

std::vector<size_t> Corpus::IndicesOf(SplitTag tag) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].split == tag) out.push_back(i);
  }
  return out;
}

std::vector<size_t> Corpus::IndicesOf(int speaker_id, SplitTag tag) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].speaker_id == speaker_id && segments[i].split == tag) out.push_back(i);
  }
  return out;
}

SpeakerProfile RandomSpeakerProfile(Rng& rng, int sample_rate) {
  const double top = 0.45 * sample_rate;
  SpeakerProfile p;
  p.fundamental_hz = std::exp(rng.Uniform(std::log(85.0), std::log(280.0)));
  p.resonance_centers_hz = {rng.Uniform(300.0, 850.0),
                            std::min(rng.Uniform(900.0, 2300.0), 0.8 * top),
                            std::min(rng.Uniform(2300.0, 3600.0), 0.95 * top)};
  p.resonance_bandwidths_hz = {rng.Uniform(60.0, 160.0), rng.Uniform(80.0, 220.0),
                               rng.Uniform(120.0, 300.0)};
  p.noise_floor_db = rng.Uniform(-45.0, -30.0);
  p.seed = rng.NextU64();
  return p;
}

Waveform SynthesizeUtterance(const SpeakerProfile& profile, double duration_s,
                             int sample_rate, Rng& rng) {
  const auto n = static_cast<size_t>(std::lround(duration_s * sample_rate));
  const double sr = sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;

  const double f0 = profile.fundamental_hz * std::exp(0.03 * rng.Normal());
  std::vector<Biquad> formants;
  std::vector<double> gains;
  for (size_t j = 0; j < profile.resonance_centers_hz.size(); ++j) {
    const double center = std::min(profile.resonance_centers_hz[j] * std::exp(0.02 * rng.Normal()),
                                   0.49 * sr);
    const double bw = profile.resonance_bandwidths_hz[j] * std::exp(0.05 * rng.Normal());
    formants.push_back(Biquad::BandPass(center, center / bw, sample_rate));
    gains.push_back(std::pow(0.65, static_cast<double>(j)));
  }
  const double vib_rate = rng.Uniform(4.0, 6.0);
  const double vib_depth = rng.Uniform(0.01, 0.03);
  const double vib_phase = rng.Uniform(0.0, two_pi);
  const double syl_rate = rng.Uniform(3.0, 5.0);
  const double syl_phase = rng.Uniform(0.0, two_pi);
  const double level_db = rng.Uniform(-33.0, -23.0);
  const double aspiration = 0.02;

  std::vector<double> out(n);
  double phase = rng.Uniform01();
  double tilt = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f = f0 * (1.0 + vib_depth * std::sin(two_pi * vib_rate * t + vib_phase));
    phase += f / sr;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
    }
    tilt = 0.4 * pulse + 0.6 * tilt;
    const double src = tilt + aspiration * rng.Normal();
    double v = 0.0;
    for (size_t j = 0; j < formants.size(); ++j) v += gains[j] * formants[j].Process(src);
    const double env = 0.6 + 0.4 * std::sin(two_pi * syl_rate * t + syl_phase);
    out[i] = v * env;
  }

  const double voice_rms = std::sqrt(MeanPower(out));
  const double floor = voice_rms * std::pow(10.0, profile.noise_floor_db / 20.0);
  for (double& s : out) s += floor * rng.Normal();
  const double gain = std::pow(10.0, level_db / 20.0) / std::sqrt(MeanPower(out));
  for (double& s : out) s *= gain;
  return Waveform{std::move(out), sample_rate};
}

std::vector<Waveform> SynthesizeSpeaker(const SpeakerProfile& profile, int count,
                                        double min_s, double max_s,
                                        int sample_rate, uint64_t stream_seed) {
  std::vector<Waveform> out;
  out.reserve(static_cast<size_t>(count));
  for (int j = 0; j < count; ++j) {
    Rng rng(DeriveSeed(stream_seed, static_cast<uint64_t>(j)));
    const double duration = min_s == max_s ? min_s : rng.Uniform(min_s, max_s);
    out.push_back(SynthesizeUtterance(profile, duration, sample_rate, rng));
  }
  return out;
}

namespace {

std::string SyntheticSegmentId(int speaker, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%04d_seg%03d", speaker, index);
  return buf;
}

std::string SyntheticSpeakerName(int speaker) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "spk%04d", speaker);
  return buf;
}

}  // namespace

Corpus GenerateSynthetic(const SyntheticParams& params) {
  if (params.n_speakers < 2) Fail(ErrorCode::kInvalidArgument, "need at least 2 speakers");
  if (params.segments_per_speaker < 3) {
    Fail(ErrorCode::kInvalidArgument, "need at least 3 segments per speaker");
  }
  if (params.min_duration_s < 0.5 || params.max_duration_s < params.min_duration_s) {
    Fail(ErrorCode::kInvalidArgument, "durations must satisfy 0.5 <= min <= max");
  }
  if (params.sample_rate <= 0) Fail(ErrorCode::kInvalidArgument, "sample_rate must be positive");

  Corpus c;
  c.sample_rate = params.sample_rate;
  c.synthetic = params;
  const uint64_t profile_seed = DeriveSeed(params.seed, "speaker-profiles");
  for (int s = 0; s < params.n_speakers; ++s) {
    Rng rng(DeriveSeed(profile_seed, static_cast<uint64_t>(s)));
    c.profiles.push_back(RandomSpeakerProfile(rng, params.sample_rate));
    c.speaker_names.push_back(SyntheticSpeakerName(s));
    auto waves = SynthesizeSpeaker(c.profiles.back(), params.segments_per_speaker,
                                   params.min_duration_s, params.max_duration_s,
                                   params.sample_rate, c.profiles.back().seed);
    for (int j = 0; j < params.segments_per_speaker; ++j) {
      Segment seg;
      seg.segment_id = SyntheticSegmentId(s, j);
      seg.speaker_id = s;
      seg.wave = std::move(waves[static_cast<size_t>(j)]);
      c.segments.push_back(std::move(seg));
    }
  }
  return c;
}

Corpus GenerateSynthetic(uint64_t seed, int n_speakers, int segments_per_speaker,
                         double duration_s, int sample_rate) {
  return GenerateSynthetic(SyntheticParams{seed, n_speakers, segments_per_speaker,
                                           duration_s, duration_s, sample_rate});
}

Corpus SynthesizeFromProfiles(std::vector<std::string> names,
                              std::vector<SpeakerProfile> profiles,
                              const SyntheticParams& shape) {
  if (names.size() != profiles.size()) {
    Fail(ErrorCode::kInvalidArgument, "one name per profile required");
  }
  if (names.empty()) Fail(ErrorCode::kInvalidArgument, "no profiles");
  if (shape.segments_per_speaker < 1) {
    Fail(ErrorCode::kInvalidArgument, "need at least 1 segment per speaker");
  }
  Corpus c;
  c.sample_rate = shape.sample_rate;
  c.synthetic = shape;
  c.synthetic->n_speakers = static_cast<int>(names.size());
  c.from_profiles = true;
  c.speaker_names = std::move(names);
  c.profiles = std::move(profiles);
  for (size_t s = 0; s < c.profiles.size(); ++s) {
    auto waves = SynthesizeSpeaker(c.profiles[s], shape.segments_per_speaker,
                                   shape.min_duration_s, shape.max_duration_s,
                                   shape.sample_rate, c.profiles[s].seed);
    for (int j = 0; j < shape.segments_per_speaker; ++j) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "_seg%03d", j);
      Segment seg;
      seg.segment_id = c.speaker_names[s] + buf;
      seg.speaker_id = static_cast<int>(s);
      seg.wave = std::move(waves[static_cast<size_t>(j)]);
      c.segments.push_back(std::move(seg));
    }
  }
  return c;
}

SpeakerProfile NearDuplicateSpeaker(const SpeakerProfile& p, double epsilon,
                                    uint64_t perturb_seed) {
  if (epsilon < 0.0) Fail(ErrorCode::kInvalidArgument, "epsilon must be >= 0");
  if (epsilon == 0.0) return p;
  Rng rng(DeriveSeed(p.seed ^ perturb_seed, "near-duplicate"));
  auto jitter = [&](double v) { return v * (1.0 + epsilon * rng.Uniform(-1.0, 1.0)); };
  SpeakerProfile out = p;
  out.fundamental_hz = std::clamp(jitter(p.fundamental_hz), 80.0, 300.0);
  for (double& c : out.resonance_centers_hz) c = jitter(c);
  for (double& b : out.resonance_bandwidths_hz) b = jitter(b);
  out.noise_floor_db = jitter(p.noise_floor_db);
  return out;
}

Corpus ImportWavTree(const fs::path& root) {
  if (!fs::is_directory(root)) Fail(ErrorCode::kIoError, root.string() + " is not a directory");
  std::vector<fs::path> speaker_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().front() != '.') {
      speaker_dirs.push_back(entry.path());
    }
  }
  std::sort(speaker_dirs.begin(), speaker_dirs.end());
  if (speaker_dirs.empty()) Fail(ErrorCode::kEmptySpeakerDir, "no speaker directories under " + root.string());

  Corpus c;
  c.import_root = root;
  bool have_rate = false;
  for (size_t s = 0; s < speaker_dirs.size(); ++s) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(speaker_dirs[s])) {
      if (entry.is_regular_file() && entry.path().filename().string().front() != '.') {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) Fail(ErrorCode::kEmptySpeakerDir, speaker_dirs[s].string());

    const std::string name = speaker_dirs[s].filename().string();
    c.speaker_names.push_back(name);
    for (const auto& file : files) {
      std::string ext = file.extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      if (ext != ".wav") Fail(ErrorCode::kUnsupportedFormat, file.string());
      Segment seg;
      seg.wave = ReadWav(file);
      if (!have_rate) {
        c.sample_rate = seg.wave.sample_rate;
        have_rate = true;
      } else if (seg.wave.sample_rate != c.sample_rate) {
        Fail(ErrorCode::kMixedSampleRates,
             file.string() + " is " + std::to_string(seg.wave.sample_rate) + " Hz, corpus is " +
                 std::to_string(c.sample_rate) + " Hz");
      }
      seg.segment_id = name + "/" + file.stem().string();
      seg.speaker_id = static_cast<int>(s);
      seg.source_path = fs::relative(file, root).generic_string();
      c.segments.push_back(std::move(seg));
    }
  }
  return c;
}

int RoundHalfUpAtLeastOne(double x) {
  // The epsilon absorbs representation error such as 20 * 0.05.
  return std::max(1, static_cast<int>(std::floor(x + 0.5 + 1e-9)));
}

Corpus Split(Corpus c, double val_frac, double test_frac, uint64_t seed) {
  if (val_frac < 0.0 || test_frac < 0.0 || val_frac + test_frac >= 1.0) {
    Fail(ErrorCode::kInvalidArgument, "split fractions must be >= 0 and sum below 1");
  }
  std::vector<std::vector<size_t>> by_speaker(static_cast<size_t>(c.n_speakers()));
  for (size_t i = 0; i < c.segments.size(); ++i) {
    by_speaker[static_cast<size_t>(c.segments[i].speaker_id)].push_back(i);
  }
  for (size_t s = 0; s < by_speaker.size(); ++s) {
    auto& idx = by_speaker[s];
    const int n = static_cast<int>(idx.size());
    const int n_val = RoundHalfUpAtLeastOne(n * val_frac);
    const int n_test = RoundHalfUpAtLeastOne(n * test_frac);
    if (n < 3 || n - n_val - n_test < 1) {
      Fail(ErrorCode::kTooFewSegments,
           "speaker " + c.speaker_names[s] + " has " + std::to_string(n) + " segments");
    }
    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(s)));
    Shuffle(idx, rng);
    for (int j = 0; j < n; ++j) {
      c.segments[idx[static_cast<size_t>(j)]].split =
          j < n_val ? SplitTag::kVal : (j < n_val + n_test ? SplitTag::kTest : SplitTag::kTrain);
    }
  }
  return c;
}

json ProfileToJson(const SpeakerProfile& p) {
  return json{{"fundamental_hz", p.fundamental_hz},
              {"resonance_centers_hz", p.resonance_centers_hz},
              {"resonance_bandwidths_hz", p.resonance_bandwidths_hz},
              {"noise_floor_db", p.noise_floor_db},
              {"seed", p.seed}};
}

SpeakerProfile ProfileFromJson(const json& j) {
  SpeakerProfile p;
  p.fundamental_hz = j.at("fundamental_hz").get<double>();
  p.resonance_centers_hz = j.at("resonance_centers_hz").get<std::vector<double>>();
  p.resonance_bandwidths_hz = j.at("resonance_bandwidths_hz").get<std::vector<double>>();
  p.noise_floor_db = j.at("noise_floor_db").get<double>();
  p.seed = j.at("seed").get<uint64_t>();
  return p;
}

json CorpusManifest(const Corpus& c) {
  json m;
  m["format_version"] = kCorpusFormatVersion;
  m["sample_rate"] = c.sample_rate;
  if (c.synthetic) {
    const auto& p = *c.synthetic;
    m["source"] = {{"kind", c.from_profiles ? "profiles" : "synthetic"},
                   {"seed", p.seed},
                   {"n_speakers", p.n_speakers},
                   {"segments_per_speaker", p.segments_per_speaker},
                   {"min_duration_s", p.min_duration_s},
                   {"max_duration_s", p.max_duration_s},
                   {"sample_rate", p.sample_rate}};
  } else {
    m["source"] = {{"kind", "wav_tree"}, {"root", c.import_root.string()}};
  }
  json speakers = json::array();
  for (size_t s = 0; s < c.speaker_names.size(); ++s) {
    json sp = {{"id", s}, {"name", c.speaker_names[s]}};
    if (s < c.profiles.size()) sp["profile"] = ProfileToJson(c.profiles[s]);
    speakers.push_back(std::move(sp));
  }
  m["speakers"] = std::move(speakers);
  json segments = json::array();
  for (const auto& seg : c.segments) {
    json js = {{"segment_id", seg.segment_id},
               {"speaker_id", seg.speaker_id},
               {"split", SplitTagName(seg.split)},
               {"num_samples", seg.wave.size()}};
    if (!seg.source_path.empty()) js["path"] = seg.source_path;
    segments.push_back(std::move(js));
  }
  m["segments"] = std::move(segments);
  return m;
}

Corpus LoadCorpusManifest(const json& manifest) {
  if (manifest.value("format_version", 0) != kCorpusFormatVersion) {
    Fail(ErrorCode::kSchemaVersionMismatch, "corpus manifest format_version");
  }
  const auto& source = manifest.at("source");
  Corpus c;
  if (source.at("kind") == "synthetic") {
    SyntheticParams p;
    p.seed = source.at("seed").get<uint64_t>();
    p.n_speakers = source.at("n_speakers").get<int>();
    p.segments_per_speaker = source.at("segments_per_speaker").get<int>();
    p.min_duration_s = source.at("min_duration_s").get<double>();
    p.max_duration_s = source.at("max_duration_s").get<double>();
    p.sample_rate = source.at("sample_rate").get<int>();
    c = GenerateSynthetic(p);
  } else if (source.at("kind") == "profiles") {
    SyntheticParams p;
    p.segments_per_speaker = source.at("segments_per_speaker").get<int>();
    p.min_duration_s = source.at("min_duration_s").get<double>();
    p.max_duration_s = source.at("max_duration_s").get<double>();
    p.sample_rate = source.at("sample_rate").get<int>();
    p.seed = source.at("seed").get<uint64_t>();
    std::vector<std::string> names;
    std::vector<SpeakerProfile> profiles;
    for (const auto& sp : manifest.at("speakers")) {
      names.push_back(sp.at("name").get<std::string>());
      profiles.push_back(ProfileFromJson(sp.at("profile")));
    }
    c = SynthesizeFromProfiles(std::move(names), std::move(profiles), p);
  } else if (source.at("kind") == "wav_tree") {
    c = ImportWavTree(source.at("root").get<std::string>());
  } else {
    Fail(ErrorCode::kConfigError, "unknown corpus source kind");
  }

  const auto& segs = manifest.at("segments");
  if (segs.size() != c.segments.size()) {
    Fail(ErrorCode::kConfigError, "manifest lists " + std::to_string(segs.size()) +
                                      " segments, source provides " +
                                      std::to_string(c.segments.size()));
  }
  for (size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].at("segment_id").get<std::string>() != c.segments[i].segment_id) {
      Fail(ErrorCode::kConfigError, "segment order differs at " + c.segments[i].segment_id);
    }
    c.segments[i].split = ParseSplitTag(segs[i].at("split").get<std::string>());
  }
  return c;
}

void WriteWavTree(const std::vector<Segment>& segments,
                  const std::vector<std::string>& speaker_names, const fs::path& root) {
  for (const auto& seg : segments) {
    const fs::path dir = root / speaker_names.at(static_cast<size_t>(seg.speaker_id));
    fs::create_directories(dir);
    std::string file = seg.segment_id;
    std::replace(file.begin(), file.end(), '/', '_');
    WriteWav(dir / (file + ".wav"), seg.wave, WavEncoding::kFloat32);
  }
}

}  // namespace spkdoor
