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

#ifndef SPKDOOR_SV_H_
#define SPKDOOR_SV_H_

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spkdoor/dsp.h"
#include "spkdoor/error.h"
#include "spkdoor/metrics.h"

namespace spkdoor {

struct SpeakerEmbedding {
  int speaker_id = 0;
  std::vector<double> vector;  // unit norm
  int n_segments = 0;
};

using EmbeddingMap = std::map<int, SpeakerEmbedding>;

double Cosine(std::span<const double> a, std::span<const double> b);

// Mean of the given embeddings, renormalized to unit length.
std::vector<double> AverageUnit(const std::vector<std::vector<double>>& embeddings);

// Averages segment embeddings per speaker. When `speakers` is non-empty every
// listed speaker must own at least one segment (SpeakerWithoutSegments).
template <SpeakerEmbedder M>
EmbeddingMap SpeakerEmbeddings(const M& model, const SegmentRefs& segments,
                               const std::vector<int>& speakers = {}) {
  std::map<int, std::vector<std::vector<double>>> grouped;
  for (const Segment* seg : segments) grouped[seg->speaker_id].push_back(model.Embed(seg->wave));
  for (int s : speakers) {
    if (!grouped.contains(s)) {
      Fail(ErrorCode::kSpeakerWithoutSegments, "speaker " + std::to_string(s));
    }
  }
  EmbeddingMap out;
  for (const auto& [speaker, embs] : grouped) {
    out[speaker] = SpeakerEmbedding{speaker, AverageUnit(embs), static_cast<int>(embs.size())};
  }
  return out;
}

enum class PairMode { kTransferred, kOptimistic };
std::string_view PairModeName(PairMode mode);
PairMode ParsePairMode(std::string_view name);

struct PairSelection {
  int target_id = 0;  // training-set speaker
  int victim_id = 0;  // enrolled speaker
  double cosine = 0.0;
  PairMode mode = PairMode::kOptimistic;

  friend bool operator==(const PairSelection&, const PairSelection&) = default;
};

// Best training match for every enrolled speaker (exhaustive; ties go to the
// lowest training id), ordered by victim id.
std::vector<PairSelection> ClosestPairs(const EmbeddingMap& train, const EmbeddingMap& enrolled);

// Top m pairs by cosine, descending; ties by lowest victim id.
std::vector<PairSelection> SelectOptimistic(const std::vector<PairSelection>& pairs, size_t m);

// Most similar enrolled speaker for each fixed target; victims may repeat.
std::vector<PairSelection> SelectTransferred(const std::vector<int>& targets,
                                             const EmbeddingMap& enrolled,
                                             const EmbeddingMap& train);

// Enrollment and test material per enrolled speaker.
struct EnrolledSet {
  std::map<int, SegmentRefs> enrollment;
  std::map<int, SegmentRefs> test;

  SegmentRefs AllTest() const;
};

// Every enrolled speaker's averaged enrollment embedding scored against every
// test segment; same-speaker pairs are target trials.
template <SpeakerEmbedder M>
std::vector<Trial> BenignTrials(const M& model, const EnrolledSet& set) {
  std::map<int, std::vector<double>> enroll;
  for (const auto& [speaker, segs] : set.enrollment) {
    if (segs.empty()) Fail(ErrorCode::kSpeakerWithoutSegments, "enrollment " + std::to_string(speaker));
    std::vector<std::vector<double>> embs;
    for (const Segment* seg : segs) embs.push_back(model.Embed(seg->wave));
    enroll[speaker] = AverageUnit(embs);
  }
  std::vector<Trial> trials;
  for (const auto& [test_speaker, segs] : set.test) {
    for (const Segment* seg : segs) {
      const auto emb = model.Embed(seg->wave);
      for (const auto& [speaker, model_vec] : enroll) {
        Trial t;
        t.enroll_speaker = speaker;
        t.test_segment = seg->segment_id;
        t.kind = speaker == test_speaker ? TrialKind::kTarget : TrialKind::kImpostor;
        t.score = Cosine(model_vec, emb);
        trials.push_back(std::move(t));
      }
    }
  }
  return trials;
}

EerResult TrialEer(std::span<const Trial> trials);

struct SvPairResult {
  PairSelection pair;
  int trigger_id = 0;
  int n_trials = 0;
  int successes = 0;
  double asr_pct = 0.0;
};

struct SvReport {
  std::vector<SvPairResult> pairs;
  Calibration calibration;
  double p_target = 0.5;
  double llr_threshold = 0.0;
  double test_snr_db = 0.0;
  double b_eer_pct = 0.0;
  int benign_target_trials = 0;
  int benign_impostor_trials = 0;
  double asr_avg_pct = 0.0;
  // Filled in by the pipeline, not by EvalSvAttack.
  PairMode mode = PairMode::kTransferred;
  double baseline_eer_pct = 0.0;
};

// For each selection: enroll the victim (averaged clean enrollment
// embeddings), inject the target's trigger into every impostor segment not
// spoken by the victim, embed, score, calibrate and accept when
// llr > BayesThreshold(p_target). B-EER comes from the benign trials of the
// same model and enrolled set.
template <SpeakerEmbedder M>
SvReport EvalSvAttack(const M& poisoned, const std::vector<PairSelection>& selections,
                      const std::map<int, Trigger>& trigger_by_target, const EnrolledSet& enrolled,
                      const SegmentRefs& impostor_segments, const Calibration& calibration,
                      double p_target, double test_snr_db, uint64_t seed) {
  SvReport report;
  report.calibration = calibration;
  report.p_target = p_target;
  report.llr_threshold = BayesThreshold(p_target);
  report.test_snr_db = test_snr_db;

  const auto benign = BenignTrials(poisoned, enrolled);
  for (const auto& t : benign) {
    ++(t.kind == TrialKind::kTarget ? report.benign_target_trials : report.benign_impostor_trials);
  }
  report.b_eer_pct = 100.0 * TrialEer(benign).eer;

  double asr_sum = 0.0;
  for (const auto& sel : selections) {
    const auto trig = trigger_by_target.find(sel.target_id);
    if (trig == trigger_by_target.end()) {
      Fail(ErrorCode::kMissingTrigger, "no trigger for target " + std::to_string(sel.target_id));
    }
    const Trigger& trigger = trig->second;
    const auto enroll_it = enrolled.enrollment.find(sel.victim_id);
    if (enroll_it == enrolled.enrollment.end() || enroll_it->second.empty()) {
      Fail(ErrorCode::kSpeakerWithoutSegments, "victim " + std::to_string(sel.victim_id));
    }
    std::vector<std::vector<double>> embs;
    for (const Segment* seg : enroll_it->second) embs.push_back(poisoned.Embed(seg->wave));
    const auto victim_vec = AverageUnit(embs);

    SvPairResult r;
    r.pair = sel;
    r.trigger_id = trigger.id;
    for (const Segment* seg : impostor_segments) {
      if (seg->speaker_id == sel.victim_id || seg->wave.size() < trigger.wave.size()) continue;
      Rng rng(EvalOffsetSeed(seed, seg->segment_id, static_cast<uint64_t>(sel.target_id)));
      const size_t offset = SampleOffset(rng, seg->wave.size(), trigger.wave.size());
      const auto emb = poisoned.Embed(InjectTrigger(seg->wave, trigger, test_snr_db, offset));
      ++r.n_trials;
      if (TrialSuccess(calibration.Llr(Cosine(victim_vec, emb)), report.llr_threshold)) {
        ++r.successes;
      }
    }
    if (r.n_trials == 0) {
      Fail(ErrorCode::kNoImpostors, "no impostor segments for victim " + std::to_string(sel.victim_id));
    }
    r.asr_pct = 100.0 * r.successes / r.n_trials;
    asr_sum += r.asr_pct;
    report.pairs.push_back(r);
  }
  if (!report.pairs.empty()) report.asr_avg_pct = asr_sum / static_cast<double>(report.pairs.size());
  return report;
}

}  // namespace spkdoor

#endif  // SPKDOOR_SV_H_
