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

#include "spkdoor/attack.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "spkdoor/error.h"

namespace spkdoor {

using nlohmann::json;

std::vector<int> AttackPlan::Targets() const {
  std::vector<int> out;
  for (const auto& sa : sub_attacks) out.push_back(sa.target_id);
  return out;
}

std::vector<int> AttackPlan::TriggerIds() const {
  std::set<int> ids;
  for (const auto& sa : sub_attacks) ids.insert(sa.trigger_id);
  return {ids.begin(), ids.end()};
}

std::optional<int> AttackPlan::SubAttackOf(int speaker) const {
  for (const auto& sa : sub_attacks) {
    if (std::binary_search(sa.members.begin(), sa.members.end(), speaker)) return sa.index;
  }
  return std::nullopt;
}

namespace {

void CheckFraction(double poison_fraction) {
  if (!(poison_fraction > 0.0 && poison_fraction <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "poison fraction must lie in (0, 1]");
  }
}

}  // namespace

AttackPlan BuildPlan(int n, int k, int total_speakers, double poison_fraction,
                     SnrPolicy snr_policy, bool shared_trigger) {
  if (k < 3) Fail(ErrorCode::kSubsetTooSmall, "k = " + std::to_string(k) + ", need k >= 3");
  if (n < 1) Fail(ErrorCode::kInvalidArgument, "need at least one target");
  if (static_cast<long>(n) * k > total_speakers) {
    Fail(ErrorCode::kPlanOverflow, std::to_string(n) + " x " + std::to_string(k) + " exceeds " +
                                       std::to_string(total_speakers) + " speakers");
  }
  CheckFraction(poison_fraction);
  AttackPlan plan;
  plan.n = n;
  plan.k = k;
  plan.total_speakers = total_speakers;
  plan.snr_policy = snr_policy;
  plan.shared_trigger = shared_trigger;
  for (int i = 0; i < n; ++i) {
    SubAttack sa;
    sa.index = i;
    sa.trigger_id = shared_trigger ? 0 : i;
    for (int s = i * k; s < (i + 1) * k; ++s) sa.members.push_back(s);
    sa.target_id = i * k + 2;
    sa.poison_fraction = poison_fraction;
    plan.sub_attacks.push_back(std::move(sa));
  }
  return plan;
}

AttackPlan BuildPlanForTargets(const std::vector<int>& targets, int k, int total_speakers,
                               double poison_fraction, SnrPolicy snr_policy,
                               bool shared_trigger) {
  if (k < 3) Fail(ErrorCode::kSubsetTooSmall, "k = " + std::to_string(k) + ", need k >= 3");
  if (targets.empty()) Fail(ErrorCode::kInvalidArgument, "need at least one target");
  CheckFraction(poison_fraction);
  const std::set<int> target_set(targets.begin(), targets.end());
  if (target_set.size() != targets.size()) {
    Fail(ErrorCode::kInvalidArgument, "targets must be distinct");
  }
  if (static_cast<long>(targets.size()) * k > total_speakers) {
    Fail(ErrorCode::kPlanOverflow, "not enough speakers for the requested targets");
  }
  for (int t : targets) {
    if (t < 0 || t >= total_speakers) Fail(ErrorCode::kOutOfRange, "target " + std::to_string(t));
  }

  AttackPlan plan;
  plan.n = static_cast<int>(targets.size());
  plan.k = k;
  plan.total_speakers = total_speakers;
  plan.snr_policy = snr_policy;
  plan.shared_trigger = shared_trigger;
  int next = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    SubAttack sa;
    sa.index = static_cast<int>(i);
    sa.trigger_id = shared_trigger ? 0 : static_cast<int>(i);
    sa.target_id = targets[i];
    sa.poison_fraction = poison_fraction;
    sa.members.push_back(targets[i]);
    while (static_cast<int>(sa.members.size()) < k) {
      while (next < total_speakers && target_set.contains(next)) ++next;
      if (next >= total_speakers) Fail(ErrorCode::kPlanOverflow, "ran out of source speakers");
      sa.members.push_back(next++);
    }
    std::sort(sa.members.begin(), sa.members.end());
    plan.sub_attacks.push_back(std::move(sa));
  }
  return plan;
}

int PoisonBudget(double fraction, int count) {
  return std::min(count, RoundHalfUpAtLeastOne(fraction * count));
}

PlanStats ComputePlanStats(const AttackPlan& plan, std::span<const int> train_counts) {
  PlanStats st;
  st.total_speakers = plan.total_speakers;
  for (int c : train_counts) st.train_segments += c;
  for (const auto& sa : plan.sub_attacks) {
    st.selected_speakers += static_cast<int>(sa.members.size());
    for (int s : sa.members) {
      if (s == sa.target_id) continue;
      const int count = train_counts[static_cast<size_t>(s)];
      if (count > 0) st.poisoned_segments += PoisonBudget(sa.poison_fraction, count);
    }
  }
  st.speaker_pct = 100.0 * st.selected_speakers / st.total_speakers;
  st.segment_pct =
      st.train_segments > 0 ? 100.0 * st.poisoned_segments / st.train_segments : 0.0;
  return st;
}

PlanStats ComputePlanStats(const AttackPlan& plan, const Corpus& corpus) {
  std::vector<int> counts(static_cast<size_t>(corpus.n_speakers()), 0);
  for (const auto& seg : corpus.segments) {
    if (seg.split == SplitTag::kTrain) ++counts[static_cast<size_t>(seg.speaker_id)];
  }
  return ComputePlanStats(plan, counts);
}

std::vector<PoisonRecord> SelectPoisonSegments(const Corpus& corpus, const AttackPlan& plan,
                                               uint64_t seed) {
  std::vector<PoisonRecord> out;
  for (const auto& sa : plan.sub_attacks) {
    for (int speaker : sa.members) {
      if (speaker == sa.target_id) continue;
      std::vector<size_t> pool = corpus.IndicesOf(speaker, SplitTag::kTrain);
      if (pool.empty()) {
        Fail(ErrorCode::kTooFewSegments,
             "speaker " + std::to_string(speaker) + " has no training segments");
      }
      const int budget = PoisonBudget(sa.poison_fraction, static_cast<int>(pool.size()));
      Rng rng(DeriveSeed(seed, static_cast<uint64_t>(speaker)));
      Shuffle(pool, rng);
      pool.resize(static_cast<size_t>(budget));
      std::sort(pool.begin(), pool.end());
      for (size_t idx : pool) {
        PoisonRecord r;
        r.segment_id = corpus.segments[idx].segment_id;
        r.segment_index = idx;
        r.sub_attack = sa.index;
        r.trigger_id = sa.trigger_id;
        r.original_label = speaker;
        r.poisoned_label = sa.target_id;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

const Trigger& FindTrigger(std::span<const Trigger> triggers, int id) {
  for (const auto& t : triggers) {
    if (t.id == id) return t;
  }
  Fail(ErrorCode::kMissingTrigger, "trigger " + std::to_string(id));
}

namespace {

PoisonedDataset CleanTrainingSet(const Corpus& corpus, std::vector<size_t>* position) {
  PoisonedDataset ds;
  position->assign(corpus.segments.size(), SIZE_MAX);
  for (size_t i = 0; i < corpus.segments.size(); ++i) {
    if (corpus.segments[i].split != SplitTag::kTrain) continue;
    (*position)[i] = ds.segments.size();
    ds.segments.push_back(corpus.segments[i]);
    ds.labels.push_back(corpus.segments[i].speaker_id);
    ds.poisoned.push_back(false);
  }
  return ds;
}

void Inject(PoisonedDataset& ds, const std::vector<size_t>& position, const PoisonRecord& r,
            std::span<const Trigger> triggers) {
  if (r.segment_index >= position.size() || position[r.segment_index] == SIZE_MAX) {
    Fail(ErrorCode::kInvalidArgument, r.segment_id + " is not a training segment");
  }
  const size_t p = position[r.segment_index];
  ds.segments[p].wave = InjectTrigger(ds.segments[p].wave, FindTrigger(triggers, r.trigger_id),
                                      r.snr_db, r.offset);
  ds.labels[p] = r.poisoned_label;
  ds.poisoned[p] = true;
}

}  // namespace

PoisonedDataset ApplyPoison(const Corpus& corpus, std::vector<PoisonRecord> records,
                            std::span<const Trigger> triggers, const SnrPolicy& policy,
                            uint64_t seed) {
  std::vector<size_t> position;
  PoisonedDataset ds = CleanTrainingSet(corpus, &position);
  for (size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    const Trigger& t = FindTrigger(triggers, r.trigger_id);
    const Segment& seg = corpus.segments.at(r.segment_index);
    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(i)));
    r.offset = SampleOffset(rng, seg.wave.size(), t.wave.size());
    r.snr_db = policy.Draw(rng);
    Inject(ds, position, r, triggers);
  }
  ds.records = std::move(records);
  return ds;
}

PoisonedDataset ReplayPoison(const Corpus& corpus, const std::vector<PoisonRecord>& records,
                             std::span<const Trigger> triggers) {
  std::vector<size_t> position;
  PoisonedDataset ds = CleanTrainingSet(corpus, &position);
  for (const auto& r : records) {
    if (corpus.segments.at(r.segment_index).segment_id != r.segment_id) {
      Fail(ErrorCode::kConfigError, "record " + r.segment_id + " does not match the corpus");
    }
    Inject(ds, position, r, triggers);
  }
  ds.records = records;
  return ds;
}

json ToJson(const SnrPolicy& p) {
  if (p.kind() == SnrPolicy::Kind::kFixed) return {{"kind", "fixed"}, {"snr_db", p.lo_db()}};
  return {{"kind", "uniform"}, {"lo_db", p.lo_db()}, {"hi_db", p.hi_db()}};
}

SnrPolicy SnrPolicyFromJson(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") return SnrPolicy::Fixed(j.at("snr_db").get<double>());
  if (kind == "uniform") {
    return SnrPolicy::Uniform(j.at("lo_db").get<double>(), j.at("hi_db").get<double>());
  }
  Fail(ErrorCode::kConfigError, "unknown SNR policy '" + kind + "'");
}

std::string Describe(const SnrPolicy& p) {
  std::ostringstream os;
  if (p.kind() == SnrPolicy::Kind::kFixed) {
    os << p.lo_db();
  } else {
    os << "[" << p.lo_db() << ", " << p.hi_db() << "]";
  }
  return os.str();
}

json ToJson(const AttackPlan& plan) {
  json subs = json::array();
  for (const auto& sa : plan.sub_attacks) {
    subs.push_back({{"index", sa.index},
                    {"trigger_id", sa.trigger_id},
                    {"members", sa.members},
                    {"target_id", sa.target_id},
                    {"poison_fraction", sa.poison_fraction}});
  }
  return {{"n", plan.n},
          {"k", plan.k},
          {"total_speakers", plan.total_speakers},
          {"shared_trigger", plan.shared_trigger},
          {"snr_policy", ToJson(plan.snr_policy)},
          {"sub_attacks", std::move(subs)}};
}

AttackPlan PlanFromJson(const json& j) {
  AttackPlan plan;
  plan.n = j.at("n").get<int>();
  plan.k = j.at("k").get<int>();
  plan.total_speakers = j.at("total_speakers").get<int>();
  plan.shared_trigger = j.at("shared_trigger").get<bool>();
  plan.snr_policy = SnrPolicyFromJson(j.at("snr_policy"));
  for (const auto& js : j.at("sub_attacks")) {
    SubAttack sa;
    sa.index = js.at("index").get<int>();
    sa.trigger_id = js.at("trigger_id").get<int>();
    sa.members = js.at("members").get<std::vector<int>>();
    sa.target_id = js.at("target_id").get<int>();
    sa.poison_fraction = js.at("poison_fraction").get<double>();
    plan.sub_attacks.push_back(std::move(sa));
  }
  return plan;
}

json ToJson(const std::vector<PoisonRecord>& records) {
  json out = json::array();
  for (const auto& r : records) {
    out.push_back({{"segment_id", r.segment_id},
                   {"segment_index", r.segment_index},
                   {"sub_attack", r.sub_attack},
                   {"trigger_id", r.trigger_id},
                   {"snr_db", r.snr_db},
                   {"offset", r.offset},
                   {"original_label", r.original_label},
                   {"poisoned_label", r.poisoned_label}});
  }
  return out;
}

std::vector<PoisonRecord> RecordsFromJson(const json& j) {
  std::vector<PoisonRecord> out;
  for (const auto& js : j) {
    PoisonRecord r;
    r.segment_id = js.at("segment_id").get<std::string>();
    r.segment_index = js.at("segment_index").get<size_t>();
    r.sub_attack = js.at("sub_attack").get<int>();
    r.trigger_id = js.at("trigger_id").get<int>();
    r.snr_db = js.at("snr_db").get<double>();
    r.offset = js.at("offset").get<size_t>();
    r.original_label = js.at("original_label").get<int>();
    r.poisoned_label = js.at("poisoned_label").get<int>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace spkdoor
