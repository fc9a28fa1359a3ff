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

#ifndef SPKDOOR_ATTACK_H_
#define SPKDOOR_ATTACK_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spkdoor/corpus.h"
#include "spkdoor/dsp.h"

namespace spkdoor {

// One (trigger, speaker subset, target) unit of an n-target attack.
struct SubAttack {
  int index = 0;
  int trigger_id = 0;
  std::vector<int> members;  // sorted speaker ids, includes the target
  int target_id = 0;
  double poison_fraction = 0.2;

  friend bool operator==(const SubAttack&, const SubAttack&) = default;
};

struct AttackPlan {
  int n = 0;
  int k = 0;
  int total_speakers = 0;
  std::vector<SubAttack> sub_attacks;
  SnrPolicy snr_policy = SnrPolicy::Fixed(0.0);
  bool shared_trigger = false;

  std::vector<int> Targets() const;
  std::vector<int> TriggerIds() const;
  // Index of the sub-attack owning `speaker`, if any.
  std::optional<int> SubAttackOf(int speaker) const;

  friend bool operator==(const AttackPlan&, const AttackPlan&) = default;
};

// Sub-attack i owns speakers [i*k, (i+1)*k) with target i*k + 2 and trigger i
// (trigger 0 everywhere when shared_trigger). Speakers >= n*k stay clean.
// Throws SubsetTooSmall (k < 3) and PlanOverflow (n*k > total_speakers).
AttackPlan BuildPlan(int n, int k, int total_speakers, double poison_fraction = 0.2,
                     SnrPolicy snr_policy = SnrPolicy::Fixed(0.0),
                     bool shared_trigger = false);

// Plan around caller-chosen targets: sub-attack i holds targets[i] plus the
// k - 1 lowest-id speakers that are neither targets nor already assigned.
AttackPlan BuildPlanForTargets(const std::vector<int>& targets, int k, int total_speakers,
                               double poison_fraction = 0.2,
                               SnrPolicy snr_policy = SnrPolicy::Fixed(0.0),
                               bool shared_trigger = false);

struct PlanStats {
  int total_speakers = 0;
  int selected_speakers = 0;
  double speaker_pct = 0.0;
  int train_segments = 0;
  int poisoned_segments = 0;
  double segment_pct = 0.0;
};

// train_counts[s] = number of training segments of speaker s.
PlanStats ComputePlanStats(const AttackPlan& plan, std::span<const int> train_counts);
PlanStats ComputePlanStats(const AttackPlan& plan, const Corpus& corpus);

// Number of segments poisoned for one non-target speaker holding `count`
// training segments: round-half-up(fraction * count), at least 1.
int PoisonBudget(double fraction, int count);

struct PoisonRecord {
  std::string segment_id;
  size_t segment_index = 0;  // into Corpus::segments
  int sub_attack = 0;
  int trigger_id = 0;
  double snr_db = 0.0;
  size_t offset = 0;
  int original_label = 0;
  int poisoned_label = 0;

  friend bool operator==(const PoisonRecord&, const PoisonRecord&) = default;
};

// Training-split segments chosen for poisoning; snr_db and offset are left at
// zero until ApplyPoison realizes them. Target speakers contribute nothing.
std::vector<PoisonRecord> SelectPoisonSegments(const Corpus& corpus, const AttackPlan& plan,
                                               uint64_t seed);

// The training split after poisoning: segments[i] carries labels[i].
struct PoisonedDataset {
  std::vector<Segment> segments;
  std::vector<int> labels;
  std::vector<PoisonRecord> records;
  std::vector<bool> poisoned;  // parallel to segments
};

const Trigger& FindTrigger(std::span<const Trigger> triggers, int id);

// Each record draws offset then SNR from Rng(DeriveSeed(seed, record index)),
// so results do not depend on the order records are processed in.
PoisonedDataset ApplyPoison(const Corpus& corpus, std::vector<PoisonRecord> records,
                            std::span<const Trigger> triggers, const SnrPolicy& policy,
                            uint64_t seed);

// Rebuilds the dataset from records whose offset/snr are already realized.
PoisonedDataset ReplayPoison(const Corpus& corpus, const std::vector<PoisonRecord>& records,
                             std::span<const Trigger> triggers);

nlohmann::json ToJson(const SnrPolicy& p);
SnrPolicy SnrPolicyFromJson(const nlohmann::json& j);
std::string Describe(const SnrPolicy& p);

nlohmann::json ToJson(const AttackPlan& plan);
AttackPlan PlanFromJson(const nlohmann::json& j);

nlohmann::json ToJson(const std::vector<PoisonRecord>& records);
std::vector<PoisonRecord> RecordsFromJson(const nlohmann::json& j);

}  // namespace spkdoor

#endif  // SPKDOOR_ATTACK_H_
