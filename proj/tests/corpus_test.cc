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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "spkdoor/corpus.h"
#include "spkdoor/dsp.h"
#include "spkdoor/error.h"
#include "spkdoor/rng.h"

namespace spkdoor {
namespace {

namespace fs = std::filesystem;

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

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("spkdoor_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Oracle: autocorrelation pitch over the 60-400 Hz lag range.
double AutocorrPitch(std::span<const double> x, int rate) {
  const int lo = rate / 400, hi = rate / 60;
  double best = -1.0;
  int best_lag = lo;
  for (int lag = lo; lag <= hi; ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (size_t i = 0; i + static_cast<size_t>(lag) < x.size(); ++i) {
      num += x[i] * x[i + lag];
      e0 += x[i] * x[i];
      e1 += x[i + lag] * x[i + lag];
    }
    const double r = num / std::sqrt(e0 * e1 + 1e-30);
    if (r > best) {
      best = r;
      best_lag = lag;
    }
  }
  return static_cast<double>(rate) / best_lag;
}

TEST(GenerateSynthetic, ShapeAndDeterminism) {
  const SyntheticParams p{5, 4, 6, 1.0, 2.0, 16000};
  const Corpus a = GenerateSynthetic(p);
  const Corpus b = GenerateSynthetic(p);
  ASSERT_EQ(a.n_speakers(), 4);
  ASSERT_EQ(a.segments.size(), 24u);
  std::set<std::string> ids;
  for (size_t i = 0; i < a.segments.size(); ++i) {
    const Segment& s = a.segments[i];
    EXPECT_EQ(s.wave, b.segments[i].wave);
    EXPECT_EQ(s.speaker_id, static_cast<int>(i / 6));
    EXPECT_GE(s.wave.duration_s(), 1.0 - 1e-3);
    EXPECT_LE(s.wave.duration_s(), 2.0 + 1e-3);
    EXPECT_EQ(s.wave.sample_rate, 16000);
    EXPECT_EQ(s.split, SplitTag::kUnassigned);
    ids.insert(s.segment_id);
    const double level = RmsLevelDb(s.wave);
    EXPECT_GT(level, -40.0);
    EXPECT_LT(level, -18.0);
  }
  EXPECT_EQ(ids.size(), 24u);
  EXPECT_EQ(a.segments[7].segment_id, "spk0001_seg001");

  SyntheticParams other = p;
  other.seed = 6;
  EXPECT_NE(GenerateSynthetic(other).segments[0].wave, a.segments[0].wave);
}

TEST(GenerateSynthetic, FixedDurationOverload) {
  const Corpus c = GenerateSynthetic(3, 2, 3, 1.5, 8000);
  for (const auto& s : c.segments) EXPECT_EQ(s.wave.size(), 12000u);
}

TEST(GenerateSynthetic, PitchFollowsProfile) {
  const Corpus c = GenerateSynthetic(SyntheticParams{11, 6, 3, 1.0, 1.0, 16000});
  for (const auto& seg : c.segments) {
    const double f0 = c.profiles[static_cast<size_t>(seg.speaker_id)].fundamental_hz;
    // Voiced middle section, away from the envelope ramps.
    const auto mid = seg.wave.view().subspan(4000, 4000);
    const double est = AutocorrPitch(mid, 16000);
    // Octave errors are the usual failure; allow those, nothing else.
    const double ratio = est / f0;
    const double nearest = std::exp2(std::round(std::log2(ratio)));
    EXPECT_NEAR(ratio / nearest, 1.0, 0.08) << seg.segment_id << " est " << est << " f0 " << f0;
    EXPECT_NEAR(std::log2(ratio), 0.0, 1.01);
  }
}

TEST(GenerateSynthetic, Errors) {
  EXPECT_EQ(CodeOf([] { GenerateSynthetic(SyntheticParams{1, 1, 5, 1, 1, 16000}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { GenerateSynthetic(SyntheticParams{1, 3, 2, 1, 1, 16000}); }),
            ErrorCode::kInvalidArgument);
}

TEST(NearDuplicateSpeaker, EpsilonBounds) {
  Rng rng(4);
  const SpeakerProfile p = RandomSpeakerProfile(rng, 16000);
  EXPECT_EQ(NearDuplicateSpeaker(p, 0.0), p);
  const SpeakerProfile q = NearDuplicateSpeaker(p, 0.01, 9);
  EXPECT_NE(q, p);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_NEAR(q.fundamental_hz / p.fundamental_hz, 1.0, 0.01 + 1e-12);
  for (size_t i = 0; i < p.resonance_centers_hz.size(); ++i) {
    EXPECT_NEAR(q.resonance_centers_hz[i] / p.resonance_centers_hz[i], 1.0, 0.01 + 1e-12);
  }
  EXPECT_EQ(NearDuplicateSpeaker(p, 0.01, 9), q);
  EXPECT_EQ(CodeOf([&] { NearDuplicateSpeaker(p, -0.1); }), ErrorCode::kInvalidArgument);
}

TEST(RoundHalfUpAtLeastOne, Cases) {
  EXPECT_EQ(RoundHalfUpAtLeastOne(0.0), 1);
  EXPECT_EQ(RoundHalfUpAtLeastOne(0.2), 1);
  EXPECT_EQ(RoundHalfUpAtLeastOne(0.5), 1);
  EXPECT_EQ(RoundHalfUpAtLeastOne(1.5), 2);
  EXPECT_EQ(RoundHalfUpAtLeastOne(2.5), 3);
  EXPECT_EQ(RoundHalfUpAtLeastOne(2.4999), 2);
  // 0.05 * 30 is 1.5000000000000002 or 1.4999999999999998 depending on rounding.
  EXPECT_EQ(RoundHalfUpAtLeastOne(0.05 * 30), 2);
  EXPECT_EQ(RoundHalfUpAtLeastOne(0.15 * 10), 2);
}

TEST(Split, CountsPerSpeaker) {
  Corpus c = GenerateSynthetic(SyntheticParams{2, 3, 20, 1.0, 1.0, 8000});
  c = Split(std::move(c), 0.05, 0.10, 77);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(c.IndicesOf(s, SplitTag::kVal).size(), 1u);
    EXPECT_EQ(c.IndicesOf(s, SplitTag::kTest).size(), 2u);
    EXPECT_EQ(c.IndicesOf(s, SplitTag::kTrain).size(), 17u);
  }
  Corpus small = Split(GenerateSynthetic(SyntheticParams{2, 2, 10, 1.0, 1.0, 8000}), 0.05,
                       0.10, 1);
  EXPECT_EQ(small.IndicesOf(0, SplitTag::kVal).size(), 1u);
  EXPECT_EQ(small.IndicesOf(0, SplitTag::kTest).size(), 1u);
  EXPECT_EQ(small.IndicesOf(0, SplitTag::kTrain).size(), 8u);
}

TEST(Split, PropertiesOverRandomShapes) {
  Rng rng(123);
  for (int trial = 0; trial < 30; ++trial) {
    Corpus c;
    const int speakers = static_cast<int>(rng.UniformInt(1, 5));
    for (int s = 0; s < speakers; ++s) {
      c.speaker_names.push_back("s" + std::to_string(s));
      const int count = static_cast<int>(rng.UniformInt(3, 40));
      for (int j = 0; j < count; ++j) {
        Segment seg;
        seg.segment_id = c.speaker_names.back() + "_" + std::to_string(j);
        seg.speaker_id = s;
        c.segments.push_back(seg);
      }
    }
    const double val = rng.Uniform(0.0, 0.2), test = rng.Uniform(0.0, 0.2);
    const uint64_t seed = rng.NextU64();
    Corpus a, b;
    try {
      a = Split(c, val, test, seed);
      b = Split(c, val, test, seed);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kTooFewSegments);
      continue;
    }
    for (int s = 0; s < speakers; ++s) {
      const size_t n = a.IndicesOf(s, SplitTag::kVal).size() +
                       a.IndicesOf(s, SplitTag::kTest).size() +
                       a.IndicesOf(s, SplitTag::kTrain).size();
      const auto total = static_cast<size_t>(
          std::count_if(c.segments.begin(), c.segments.end(),
                        [&](const Segment& x) { return x.speaker_id == s; }));
      EXPECT_EQ(n, total);
      EXPECT_GE(a.IndicesOf(s, SplitTag::kVal).size(), 1u);
      EXPECT_GE(a.IndicesOf(s, SplitTag::kTest).size(), 1u);
      EXPECT_GE(a.IndicesOf(s, SplitTag::kTrain).size(), 1u);
      EXPECT_EQ(a.IndicesOf(s, SplitTag::kVal).size(),
                static_cast<size_t>(RoundHalfUpAtLeastOne(static_cast<double>(total) * val)));
    }
    for (size_t i = 0; i < a.segments.size(); ++i) EXPECT_EQ(a.segments[i].split, b.segments[i].split);
  }
}

TEST(Split, Errors) {
  Corpus c = GenerateSynthetic(SyntheticParams{2, 2, 3, 1.0, 1.0, 8000});
  EXPECT_EQ(CodeOf([&] { Split(c, 0.6, 0.5, 1); }), ErrorCode::kInvalidArgument);
  c.segments.pop_back();
  EXPECT_EQ(CodeOf([&] { Split(c, 0.05, 0.1, 1); }), ErrorCode::kTooFewSegments);
}

TEST(ImportWavTree, ReadsSortedTree) {
  TempDir dir("import_ok");
  const Corpus src = GenerateSynthetic(SyntheticParams{8, 2, 3, 1.0, 1.0, 16000});
  WriteWavTree(src.segments, {"bob", "alice"}, dir.path());
  {
    std::ofstream hidden(dir.path() / "alice" / ".DS_Store");
    hidden << "x";
  }
  const Corpus c = ImportWavTree(dir.path());
  ASSERT_EQ(c.speaker_names, (std::vector<std::string>{"alice", "bob"}));
  ASSERT_EQ(c.segments.size(), 6u);
  EXPECT_EQ(c.sample_rate, 16000);
  EXPECT_EQ(c.segments[0].speaker_id, 0);
  EXPECT_EQ(c.segments[0].segment_id, "alice/spk0001_seg000");
  EXPECT_EQ(c.segments[0].source_path, "alice/spk0001_seg000.wav");
  for (size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(c.segments[i].wave.size(), src.segments[3 + i].wave.size());
    for (size_t j = 0; j < c.segments[i].wave.size(); j += 101) {
      EXPECT_EQ(c.segments[i].wave.samples[j], static_cast<float>(src.segments[3 + i].wave.samples[j]));
    }
  }
}

TEST(ImportWavTree, Errors) {
  {
    TempDir dir("import_empty_root");
    EXPECT_EQ(CodeOf([&] { ImportWavTree(dir.path()); }), ErrorCode::kEmptySpeakerDir);
  }
  {
    TempDir dir("import_empty_speaker");
    fs::create_directories(dir.path() / "a");
    EXPECT_EQ(CodeOf([&] { ImportWavTree(dir.path()); }), ErrorCode::kEmptySpeakerDir);
  }
  {
    TempDir dir("import_not_wav");
    fs::create_directories(dir.path() / "a");
    std::ofstream(dir.path() / "a" / "notes.txt") << "hello";
    EXPECT_EQ(CodeOf([&] { ImportWavTree(dir.path()); }), ErrorCode::kUnsupportedFormat);
  }
  {
    TempDir dir("import_rates");
    fs::create_directories(dir.path() / "a");
    WriteWav(dir.path() / "a" / "x.wav", Waveform{std::vector<double>(100, 0.1), 16000},
             WavEncoding::kPcm16);
    WriteWav(dir.path() / "a" / "y.wav", Waveform{std::vector<double>(100, 0.1), 8000},
             WavEncoding::kPcm16);
    EXPECT_EQ(CodeOf([&] { ImportWavTree(dir.path()); }), ErrorCode::kMixedSampleRates);
  }
  EXPECT_EQ(CodeOf([] { ImportWavTree("/nonexistent/spkdoor"); }), ErrorCode::kIoError);
}

TEST(Manifest, SyntheticRoundTrip) {
  const Corpus c = Split(GenerateSynthetic(SyntheticParams{4, 3, 5, 1.0, 1.5, 8000}), 0.2,
                         0.2, 3);
  const Corpus back = LoadCorpusManifest(CorpusManifest(c));
  ASSERT_EQ(back.segments.size(), c.segments.size());
  for (size_t i = 0; i < c.segments.size(); ++i) {
    EXPECT_EQ(back.segments[i].wave, c.segments[i].wave);
    EXPECT_EQ(back.segments[i].split, c.segments[i].split);
  }
  EXPECT_EQ(back.profiles, c.profiles);
}

TEST(Manifest, ProfileCorpusRoundTrip) {
  Rng rng(2);
  std::vector<SpeakerProfile> profiles = {RandomSpeakerProfile(rng, 8000),
                                          RandomSpeakerProfile(rng, 8000)};
  const Corpus c =
      SynthesizeFromProfiles({"x", "y"}, profiles, SyntheticParams{0, 0, 4, 1.0, 1.0, 8000});
  EXPECT_EQ(c.segments[5].segment_id, "y_seg001");
  const Corpus back = LoadCorpusManifest(CorpusManifest(c));
  ASSERT_EQ(back.segments.size(), 8u);
  for (size_t i = 0; i < 8; ++i) EXPECT_EQ(back.segments[i].wave, c.segments[i].wave);
}

TEST(Manifest, WavTreeRoundTripAndVersion) {
  TempDir dir("manifest_tree");
  WriteWavTree(GenerateSynthetic(SyntheticParams{8, 2, 4, 1.0, 1.0, 8000}).segments, {"a", "b"},
               dir.path());
  const Corpus c = Split(ImportWavTree(dir.path()), 0.1, 0.1, 5);
  auto m = CorpusManifest(c);
  const Corpus back = LoadCorpusManifest(m);
  for (size_t i = 0; i < c.segments.size(); ++i) {
    EXPECT_EQ(back.segments[i].split, c.segments[i].split);
    EXPECT_EQ(back.segments[i].wave, c.segments[i].wave);
  }
  m["format_version"] = 99;
  EXPECT_EQ(CodeOf([&] { LoadCorpusManifest(m); }), ErrorCode::kSchemaVersionMismatch);
}

}  // namespace
}  // namespace spkdoor
