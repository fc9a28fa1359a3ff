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

#include "spkdoor/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spkdoor {

SegmentRefs SelectSplit(const Corpus& corpus, SplitTag tag) {
  SegmentRefs out;
  for (const auto& seg : corpus.segments) {
    if (seg.split == tag) out.push_back(&seg);
  }
  return out;
}

std::vector<double> SiAttackOutcome::AsrPct() const {
  std::vector<double> out(attempts.size(), 0.0);
  for (size_t i = 0; i < attempts.size(); ++i) {
    if (attempts[i] > 0) out[i] = 100.0 * successes[i] / attempts[i];
  }
  return out;
}

int SiAttackOutcome::TotalAttempts() const {
  return std::accumulate(attempts.begin(), attempts.end(), 0);
}

int SiAttackOutcome::TotalConfusions() const {
  return std::accumulate(confusions.begin(), confusions.end(), 0);
}

std::optional<double> TriggerConfusionPct(const AttackPlan& plan, const SiAttackOutcome& outcome) {
  if (plan.sub_attacks.size() < 2) return std::nullopt;
  const int total = outcome.TotalAttempts();
  if (total == 0) Fail(ErrorCode::kEmptySet, "no poisoned test inputs were evaluated");
  return 100.0 * outcome.TotalConfusions() / total;
}

EerResult Eer(std::span<const double> target_scores, std::span<const double> impostor_scores) {
  if (target_scores.empty() || impostor_scores.empty()) {
    Fail(ErrorCode::kEmptySet, "EER needs target and impostor scores");
  }
  std::vector<double> tar(target_scores.begin(), target_scores.end());
  std::vector<double> imp(impostor_scores.begin(), impostor_scores.end());
  std::sort(tar.begin(), tar.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> all;
  all.reserve(tar.size() + imp.size());
  std::merge(tar.begin(), tar.end(), imp.begin(), imp.end(), std::back_inserter(all));
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.reserve(all.size() + 1);
  thresholds.push_back(all.front());
  for (size_t i = 1; i < all.size(); ++i) thresholds.push_back(0.5 * (all[i - 1] + all[i]));
  thresholds.push_back(all.back() + 1.0);

  const double nt = static_cast<double>(tar.size());
  const double ni = static_cast<double>(imp.size());
  size_t below_t = 0, below_i = 0;
  double prev_frr = 0.0, prev_far = 1.0, prev_th = thresholds.front();
  for (double th : thresholds) {
    while (below_t < tar.size() && tar[below_t] < th) ++below_t;
    while (below_i < imp.size() && imp[below_i] < th) ++below_i;
    const double frr = static_cast<double>(below_t) / nt;
    const double far = static_cast<double>(imp.size() - below_i) / ni;
    if (frr >= far) {
      if (frr == far) return {frr, th};
      const double d0 = prev_frr - prev_far;  // < 0
      const double d1 = frr - far;            // > 0
      const double a = -d0 / (d1 - d0);
      return {prev_frr + a * (frr - prev_frr), prev_th + a * (th - prev_th)};
    }
    prev_frr = frr;
    prev_far = far;
    prev_th = th;
  }
  // Unreachable: the last threshold has FRR = 1 and FAR = 0.
  return {prev_frr, prev_th};
}

namespace {

double Softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Calibration Calibrate(std::span<const double> target_scores,
                      std::span<const double> impostor_scores, double p_target) {
  if (target_scores.empty() || impostor_scores.empty()) {
    Fail(ErrorCode::kDegenerate, "calibration needs both target and impostor trials");
  }
  if (!(p_target > 0.0 && p_target < 1.0)) Fail(ErrorCode::kOutOfRange, "p_target");
  const auto [lo_t, hi_t] = std::minmax_element(target_scores.begin(), target_scores.end());
  const auto [lo_i, hi_i] = std::minmax_element(impostor_scores.begin(), impostor_scores.end());
  if (*lo_t == *hi_t && *lo_i == *hi_i && *lo_t == *lo_i) {
    Fail(ErrorCode::kDegenerate, "all scores are identical");
  }

  // Objective: w_t sum softplus(-(a s + b + L)) + w_i sum softplus(a s + b + L)
  // with L = logit(p_target) and class weights p / N_t and (1 - p) / N_i.
  const double logit_p = std::log(p_target / (1.0 - p_target));
  const double wt = p_target / static_cast<double>(target_scores.size());
  const double wi = (1.0 - p_target) / static_cast<double>(impostor_scores.size());

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (double s : target_scores) f += wt * Softplus(-(a * s + b + logit_p));
    for (double s : impostor_scores) f += wi * Softplus(a * s + b + logit_p);
    return f;
  };

  double a = 0.0, b = 0.0;
  double f = objective(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    auto accumulate = [&](double s, double w, double sign) {
      const double z = a * s + b + logit_p;
      const double p = Sigmoid(z);
      const double r = sign > 0 ? p - 1.0 : p;  // d/dz of the per-trial loss
      const double h = p * (1.0 - p);
      ga += w * r * s;
      gb += w * r;
      haa += w * h * s * s;
      hab += w * h * s;
      hbb += w * h;
    };
    for (double s : target_scores) accumulate(s, wt, 1.0);
    for (double s : impostor_scores) accumulate(s, wi, -1.0);
    if (std::hypot(ga, gb) < 1e-8) break;

    haa += 1e-12;
    hbb += 1e-12;
    const double det = haa * hbb - hab * hab;
    double da = -(hbb * ga - hab * gb) / det;
    double db = -(haa * gb - hab * ga) / det;
    if (!std::isfinite(da) || !std::isfinite(db)) {
      da = -ga;
      db = -gb;
    }
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const double fa = objective(a + step * da, b + step * db);
      if (fa < f) {
        a += step * da;
        b += step * db;
        f = fa;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  if (!(a > 0.0)) Fail(ErrorCode::kDegenerate, "fitted calibration scale is not positive");
  return {a, b};
}

Calibration Calibrate(std::span<const Trial> benign_trials, double p_target) {
  std::vector<double> tar, imp;
  for (const auto& t : benign_trials) {
    (t.kind == TrialKind::kTarget ? tar : imp).push_back(t.score);
  }
  return Calibrate(tar, imp, p_target);
}

double BayesThreshold(double p_target) {
  if (!(p_target > 0.0 && p_target < 1.0)) {
    Fail(ErrorCode::kOutOfRange, "p_target must lie strictly between 0 and 1");
  }
  return std::log((1.0 - p_target) / p_target);
}

}  // namespace spkdoor
