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

#ifndef SPKDOOR_METRICS_H_
#define SPKDOOR_METRICS_H_

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spkdoor/attack.h"
#include "spkdoor/corpus.h"
#include "spkdoor/dsp.h"
#include "spkdoor/error.h"
#include "spkdoor/rng.h"

namespace spkdoor {

template <typename M>
concept SpeakerClassifier = requires(const M& m, const Waveform& w) {
  { m.Predict(w) } -> std::convertible_to<int>;
};

template <typename M>
concept SpeakerEmbedder = requires(const M& m, const Waveform& w) {
  { m.Embed(w) } -> std::convertible_to<std::vector<double>>;
};

using SegmentRefs = std::vector<const Segment*>;

SegmentRefs SelectSplit(const Corpus& corpus, SplitTag tag);

// Percentage of segments whose prediction equals their speaker id.
template <SpeakerClassifier M>
double BenignAccuracy(const M& model, const SegmentRefs& test) {
  if (test.empty()) Fail(ErrorCode::kEmptySet, "benign accuracy over no segments");
  size_t correct = 0;
  for (const Segment* seg : test) {
    if (model.Predict(seg->wave) == seg->speaker_id) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

// Offsets for evaluation-time injection are keyed by segment id and stream, so
// results do not depend on the order segments are visited in.
inline uint64_t EvalOffsetSeed(uint64_t seed, const std::string& segment_id, uint64_t stream) {
  return DeriveSeed(seed ^ Fnv1a64(segment_id), stream);
}

struct SiAttackOutcome {
  std::vector<int> attempts;   // per sub-attack
  std::vector<int> successes;  // predicted as own target
  std::vector<int> confusions; // predicted as another sub-attack's target
  int skipped_too_short = 0;

  std::vector<double> AsrPct() const;
  int TotalAttempts() const;
  int TotalConfusions() const;
};

// For each sub-attack i, injects trigger_i at test_snr_db into every test
// segment of its members except the target and checks the prediction.
// Segments shorter than a trigger are skipped and counted.
template <SpeakerClassifier M>
SiAttackOutcome EvaluateSiAttack(const M& model, const AttackPlan& plan,
                                 std::span<const Trigger> triggers, const SegmentRefs& test,
                                 double test_snr_db, uint64_t seed) {
  const auto n = plan.sub_attacks.size();
  SiAttackOutcome out;
  out.attempts.assign(n, 0);
  out.successes.assign(n, 0);
  out.confusions.assign(n, 0);
  const std::vector<int> targets = plan.Targets();
  for (const auto& sa : plan.sub_attacks) {
    const auto i = static_cast<size_t>(sa.index);
    const Trigger& trigger = FindTrigger(triggers, sa.trigger_id);
    for (const Segment* seg : test) {
      if (seg->speaker_id == sa.target_id ||
          !std::binary_search(sa.members.begin(), sa.members.end(), seg->speaker_id)) {
        continue;
      }
      if (seg->wave.size() < trigger.wave.size()) {
        ++out.skipped_too_short;
        continue;
      }
      Rng rng(EvalOffsetSeed(seed, seg->segment_id, i));
      const size_t offset = SampleOffset(rng, seg->wave.size(), trigger.wave.size());
      const int predicted = model.Predict(InjectTrigger(seg->wave, trigger, test_snr_db, offset));
      ++out.attempts[i];
      if (predicted == sa.target_id) {
        ++out.successes[i];
      } else {
        for (size_t j = 0; j < n; ++j) {
          if (j != i && targets[j] == predicted) {
            ++out.confusions[i];
            break;
          }
        }
      }
    }
  }
  return out;
}

// Per-sub-attack ASR in percent.
template <SpeakerClassifier M>
std::vector<double> AttackSuccessSi(const M& model, const AttackPlan& plan,
                                    std::span<const Trigger> triggers, const SegmentRefs& test,
                                    double test_snr_db, uint64_t seed) {
  return EvaluateSiAttack(model, plan, triggers, test, test_snr_db, seed).AsrPct();
}

// TC in percent over all poisoned test inputs; nullopt ("n.a.") for n = 1.
std::optional<double> TriggerConfusionPct(const AttackPlan& plan, const SiAttackOutcome& outcome);

template <SpeakerClassifier M>
std::optional<double> TriggerConfusion(const M& model, const AttackPlan& plan,
                                       std::span<const Trigger> triggers, const SegmentRefs& test,
                                       double test_snr_db, uint64_t seed) {
  if (plan.sub_attacks.size() < 2) return std::nullopt;
  return TriggerConfusionPct(
      plan, EvaluateSiAttack(model, plan, triggers, test, test_snr_db, seed));
}

struct EerResult {
  double eer = 0.0;        // in [0, 1]
  double threshold = 0.0;  // score at the interpolated crossing
};

// Operating points at the lowest score, at every midpoint between distinct
// sorted scores and one unit above the highest score; FRR(t) counts targets
// below t, FAR(t) impostors at or above t. The EER interpolates linearly
// between the two operating points that bracket FRR == FAR.
EerResult Eer(std::span<const double> target_scores, std::span<const double> impostor_scores);

// llr(s) = scale * s + offset.
struct Calibration {
  double scale = 1.0;
  double offset = 0.0;

  double Llr(double score) const { return scale * score + offset; }
};

enum class TrialKind { kTarget, kImpostor };

struct Trial {
  int enroll_speaker = 0;
  std::string test_segment;
  TrialKind kind = TrialKind::kImpostor;
  double score = 0.0;
  double llr = 0.0;
};

// Prior-weighted affine logistic regression of trial kind on raw score,
// fit by Newton's method with backtracking (at most 100 iterations, stop when
// the gradient norm drops below 1e-8). Throws Degenerate when a class is
// missing, the scores are constant or the fitted scale is not positive.
Calibration Calibrate(std::span<const double> target_scores,
                      std::span<const double> impostor_scores, double p_target = 0.5);
Calibration Calibrate(std::span<const Trial> benign_trials, double p_target = 0.5);

// log((1 - p) / p). Throws OutOfRange unless 0 < p < 1.
double BayesThreshold(double p_target);

inline bool TrialSuccess(double llr, double threshold) { return llr > threshold; }

}  // namespace spkdoor

#endif  // SPKDOOR_METRICS_H_
