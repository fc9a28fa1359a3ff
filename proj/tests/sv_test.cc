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

#include "spkdoor/error.h"
#include "spkdoor/rng.h"
#include "spkdoor/sv.h"

namespace spkdoor {
namespace {

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

// The first two samples are the embedding.
struct HeadEmbedder {
  std::vector<double> Embed(const Waveform& w) const { return {w.samples[0], w.samples[1]}; }
};

// Triggered (loud) inputs embed to {1, 0}, quiet ones to {0, 1}.
struct PeakEmbedder {
  std::vector<double> Embed(const Waveform& w) const {
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    return peak > 0.05 ? std::vector<double>{1, 0} : std::vector<double>{0, 1};
  }
};

static_assert(SpeakerEmbedder<HeadEmbedder>);

EmbeddingMap RandomMap(Rng& rng, int n, int dim, int id0) {
  EmbeddingMap m;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<size_t>(dim));
    for (double& x : v) x = rng.Uniform(-1, 1);
    m[id0 + i] = SpeakerEmbedding{id0 + i, AverageUnit({v}), 1};
  }
  return m;
}

TEST(Cosine, BasicsAndErrors) {
  EXPECT_DOUBLE_EQ(Cosine(std::vector<double>{1, 0}, std::vector<double>{0, 2}), 0.0);
  EXPECT_DOUBLE_EQ(Cosine(std::vector<double>{1, 1}, std::vector<double>{2, 2}), 1.0);
  EXPECT_EQ(CodeOf([] { Cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}); }),
            ErrorCode::kZeroVector);
  EXPECT_EQ(CodeOf([] { Cosine(std::vector<double>{1}, std::vector<double>{1, 0}); }),
            ErrorCode::kDimensionMismatch);
}

TEST(AverageUnit, IsUnitNormProperty) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> embs;
    const int n = static_cast<int>(rng.UniformInt(1, 8));
    for (int i = 0; i < n; ++i) {
      std::vector<double> v(5);
      for (double& x : v) x = rng.Uniform(-1, 1);
      embs.push_back(v);
    }
    const auto avg = AverageUnit(embs);
    double nn = 0.0;
    for (double v : avg) nn += v * v;
    EXPECT_NEAR(nn, 1.0, 1e-12);
  }
  EXPECT_EQ(CodeOf([] { AverageUnit({{1, 0}, {-1, 0}}); }), ErrorCode::kZeroVector);
}

TEST(Pairing, ClosestMatchesBruteForce) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const EmbeddingMap train = RandomMap(rng, static_cast<int>(rng.UniformInt(1, 100)), 6, 0);
    const EmbeddingMap enrolled = RandomMap(rng, static_cast<int>(rng.UniformInt(1, 100)), 6, 1000);
    const auto pairs = ClosestPairs(train, enrolled);
    ASSERT_EQ(pairs.size(), enrolled.size());
    for (const auto& p : pairs) {
      double best = -2.0;
      int best_id = -1;
      for (const auto& [id, e] : train) {
        double dot = 0.0;
        for (size_t i = 0; i < 6; ++i) dot += e.vector[i] * enrolled.at(p.victim_id).vector[i];
        if (dot > best + 1e-15) {
          best = dot;
          best_id = id;
        }
      }
      EXPECT_EQ(p.target_id, best_id);
      EXPECT_NEAR(p.cosine, best, 1e-12);
    }
    const auto tr = SelectTransferred({0}, enrolled, train);
    double best = -2.0;
    for (const auto& [id, e] : enrolled) best = std::max(best, Cosine(e.vector, train.at(0).vector));
    EXPECT_NEAR(tr[0].cosine, best, 1e-12);
    EXPECT_EQ(tr[0].mode, PairMode::kTransferred);
  }
}

TEST(Pairing, TiesPreferLowestId) {
  EmbeddingMap train{{3, {3, {1, 0}, 1}}, {1, {1, {1, 0}, 1}}};
  EmbeddingMap enrolled{{9, {9, {1, 0}, 1}}, {4, {4, {1, 0}, 1}}};
  const auto pairs = ClosestPairs(train, enrolled);
  EXPECT_EQ(pairs[0].target_id, 1);
  EXPECT_EQ(SelectTransferred({3}, enrolled, train)[0].victim_id, 4);
  const auto top = SelectOptimistic(pairs, 1);
  EXPECT_EQ(top[0].victim_id, 4);
}

TEST(Pairing, SelectOptimisticOrdersByCosine) {
  const std::vector<PairSelection> pairs = {
      {0, 10, 0.2, PairMode::kOptimistic},
      {1, 11, 0.9, PairMode::kOptimistic},
      {2, 12, 0.5, PairMode::kOptimistic},
  };
  const auto top = SelectOptimistic(pairs, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].victim_id, 11);
  EXPECT_EQ(top[1].victim_id, 12);
  EXPECT_EQ(CodeOf([&] { SelectOptimistic(pairs, 4); }), ErrorCode::kMTooLarge);
  EXPECT_EQ(CodeOf([] { SelectTransferred({5}, {{1, {1, {1.0}, 1}}}, {{0, {0, {1.0}, 1}}}); }),
            ErrorCode::kSpeakerWithoutSegments);
}

TEST(PairMode, Names) {
  EXPECT_EQ(ParsePairMode(PairModeName(PairMode::kOptimistic)), PairMode::kOptimistic);
  EXPECT_EQ(ParsePairMode("transferred"), PairMode::kTransferred);
  EXPECT_EQ(CodeOf([] { ParsePairMode("both"); }), ErrorCode::kConfigError);
}

Segment Seg(const std::string& id, int speaker, double a, double b, double amp = 0.01) {
  Segment s;
  s.segment_id = id;
  s.speaker_id = speaker;
  s.wave.sample_rate = 8000;
  s.wave.samples.assign(4000, 0.0);
  for (size_t i = 0; i < 4000; ++i) s.wave.samples[i] = amp * std::sin(0.01 * i);
  s.wave.samples[0] = a;
  s.wave.samples[1] = b;
  return s;
}

TEST(BenignTrials, EnumeratesAllPairs) {
  std::vector<Segment> segs = {Seg("a0", 0, 0.02, 0), Seg("a1", 0, 0.02, 0.001),
                               Seg("b0", 1, 0, 0.02), Seg("b1", 1, 0.001, 0.02)};
  EnrolledSet set;
  set.enrollment[0] = {&segs[0]};
  set.enrollment[1] = {&segs[2]};
  set.test[0] = {&segs[1]};
  set.test[1] = {&segs[3]};
  const auto trials = BenignTrials(HeadEmbedder{}, set);
  ASSERT_EQ(trials.size(), 4u);
  int targets = 0;
  for (const auto& t : trials) {
    const bool same = (t.enroll_speaker == 0) == (t.test_segment == "a1");
    EXPECT_EQ(t.kind == TrialKind::kTarget, same);
    targets += t.kind == TrialKind::kTarget;
    EXPECT_EQ(t.score > 0.9, same);
  }
  EXPECT_EQ(targets, 2);
  EXPECT_DOUBLE_EQ(TrialEer(trials).eer, 0.0);
  EXPECT_EQ(set.AllTest().size(), 2u);
}

TEST(EvalSvAttack, StubEmbedders) {
  const Trigger trig = NormalizeToLevel(SynthClick(3, 8000, 0), -20.0);
  // Victim 5 enrolls with loud segments (embeds as {1,0}); victim 6 with quiet ones.
  std::vector<Segment> segs = {Seg("v5e", 5, 0, 0, 0.5), Seg("v6e", 6, 0, 0),
                               Seg("v5t", 5, 0, 0, 0.5), Seg("v6t", 6, 0, 0),
                               Seg("i0", 0, 0, 0),       Seg("i1", 1, 0, 0),
                               Seg("i2", 2, 0, 0)};
  EnrolledSet enrolled;
  enrolled.enrollment[5] = {&segs[0]};
  enrolled.enrollment[6] = {&segs[1]};
  enrolled.test[5] = {&segs[2]};
  enrolled.test[6] = {&segs[3]};
  const SegmentRefs impostors = {&segs[4], &segs[5], &segs[6], &segs[3]};
  const Calibration cal{2.0, -1.0};
  const std::vector<PairSelection> sel = {{2, 5, 0.9, PairMode::kTransferred},
                                          {2, 6, 0.1, PairMode::kTransferred}};
  const SvReport r =
      EvalSvAttack(PeakEmbedder{}, sel, {{2, trig}}, enrolled, impostors, cal, 0.5, -10.0, 4);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].n_trials, 4);
  EXPECT_DOUBLE_EQ(r.pairs[0].asr_pct, 100.0);
  EXPECT_EQ(r.pairs[1].n_trials, 3);  // the victim's own segment is excluded
  EXPECT_DOUBLE_EQ(r.pairs[1].asr_pct, 0.0);
  EXPECT_DOUBLE_EQ(r.asr_avg_pct, 50.0);
  EXPECT_DOUBLE_EQ(r.llr_threshold, 0.0);
  EXPECT_EQ(r.benign_target_trials, 2);
  EXPECT_EQ(r.benign_impostor_trials, 2);
  EXPECT_DOUBLE_EQ(r.b_eer_pct, 0.0);

  // An LLR exactly on the threshold is not a success.
  const SvReport edge = EvalSvAttack(PeakEmbedder{}, {sel[0]}, {{2, trig}}, enrolled, impostors,
                                     Calibration{1.0, -1.0}, 0.5, -10.0, 4);
  EXPECT_DOUBLE_EQ(edge.pairs[0].asr_pct, 0.0);

  EXPECT_EQ(CodeOf([&] {
              EvalSvAttack(PeakEmbedder{}, sel, {{3, trig}}, enrolled, impostors, cal, 0.5, 0, 4);
            }),
            ErrorCode::kMissingTrigger);
  EXPECT_EQ(CodeOf([&] {
              EvalSvAttack(PeakEmbedder{}, {sel[0]}, {{2, trig}}, enrolled, {&segs[2]}, cal, 0.5,
                           0, 4);
            }),
            ErrorCode::kNoImpostors);
}

}  // namespace
}  // namespace spkdoor
