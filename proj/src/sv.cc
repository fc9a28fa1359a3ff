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

#include "spkdoor/sv.h"

#include <algorithm>

namespace spkdoor {

double Cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    Fail(ErrorCode::kDimensionMismatch,
         std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " dimensions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) Fail(ErrorCode::kZeroVector, "cosine with a zero vector");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::vector<double> AverageUnit(const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.empty()) Fail(ErrorCode::kSpeakerWithoutSegments, "nothing to average");
  std::vector<double> mean(embeddings.front().size(), 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != mean.size()) Fail(ErrorCode::kDimensionMismatch, "embedding sizes differ");
    for (size_t i = 0; i < e.size(); ++i) mean[i] += e[i];
  }
  double norm = 0.0;
  for (double v : mean) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) Fail(ErrorCode::kZeroVector, "embeddings average to zero");
  for (double& v : mean) v /= norm;
  return mean;
}

std::string_view PairModeName(PairMode mode) {
  return mode == PairMode::kTransferred ? "transferred" : "optimistic";
}

PairMode ParsePairMode(std::string_view name) {
  if (name == "transferred") return PairMode::kTransferred;
  if (name == "optimistic") return PairMode::kOptimistic;
  Fail(ErrorCode::kConfigError, "unknown SV mode '" + std::string(name) + "'");
}

std::vector<PairSelection> ClosestPairs(const EmbeddingMap& train, const EmbeddingMap& enrolled) {
  if (train.empty() || enrolled.empty()) Fail(ErrorCode::kEmptySet, "pairing needs both sets");
  std::vector<PairSelection> out;
  for (const auto& [victim, ev] : enrolled) {
    PairSelection best;
    best.victim_id = victim;
    best.mode = PairMode::kOptimistic;
    bool first = true;
    // std::map iterates in ascending id order, so strict > keeps the lowest id.
    for (const auto& [target, tv] : train) {
      const double c = Cosine(ev.vector, tv.vector);
      if (first || c > best.cosine) {
        best.target_id = target;
        best.cosine = c;
        first = false;
      }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<PairSelection> SelectOptimistic(const std::vector<PairSelection>& pairs, size_t m) {
  if (m > pairs.size()) {
    Fail(ErrorCode::kMTooLarge,
         "m = " + std::to_string(m) + " but only " + std::to_string(pairs.size()) + " pairs");
  }
  std::vector<PairSelection> sorted = pairs;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
    if (x.cosine != y.cosine) return x.cosine > y.cosine;
    return x.victim_id < y.victim_id;
  });
  sorted.resize(m);
  for (auto& p : sorted) p.mode = PairMode::kOptimistic;
  return sorted;
}

std::vector<PairSelection> SelectTransferred(const std::vector<int>& targets,
                                             const EmbeddingMap& enrolled,
                                             const EmbeddingMap& train) {
  if (enrolled.empty()) Fail(ErrorCode::kEmptySet, "no enrolled speakers");
  std::vector<PairSelection> out;
  for (int target : targets) {
    const auto it = train.find(target);
    if (it == train.end()) Fail(ErrorCode::kSpeakerWithoutSegments, "target " + std::to_string(target));
    PairSelection best;
    best.target_id = target;
    best.mode = PairMode::kTransferred;
    bool first = true;
    for (const auto& [victim, ev] : enrolled) {
      const double c = Cosine(it->second.vector, ev.vector);
      if (first || c > best.cosine) {
        best.victim_id = victim;
        best.cosine = c;
        first = false;
      }
    }
    out.push_back(best);
  }
  return out;
}

SegmentRefs EnrolledSet::AllTest() const {
  SegmentRefs out;
  for (const auto& [speaker, segs] : test) out.insert(out.end(), segs.begin(), segs.end());
  return out;
}

EerResult TrialEer(std::span<const Trial> trials) {
  std::vector<double> tar, imp;
  for (const auto& t : trials) (t.kind == TrialKind::kTarget ? tar : imp).push_back(t.score);
  return Eer(tar, imp);
}

}  // namespace spkdoor
