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

#ifndef SPKDOOR_EXPERIMENT_H_
#define SPKDOOR_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spkdoor/corpus.h"
#include "spkdoor/dsp.h"
#include "spkdoor/features.h"
#include "spkdoor/model.h"
#include "spkdoor/report.h"
#include "spkdoor/sv.h"

namespace spkdoor {

inline constexpr int kConfigFormatVersion = 1;

struct CorpusSpec {
  enum class Kind { kSynthetic, kWavTree };
  Kind kind = Kind::kSynthetic;
  // Synthetic shape. The seed comes from the master seed unless `fixed_seed`
  // is set.
  int n_speakers = 40;
  int segments_per_speaker = 20;
  double min_duration_s = 1.0;
  double max_duration_s = 3.0;
  int sample_rate = 16000;
  std::optional<uint64_t> fixed_seed;
  std::filesystem::path import_root;
};

struct NearDuplicateSpec {
  int of_speaker = 0;  // training-corpus speaker id
  double epsilon = 0.01;
};

struct SvSpec {
  bool enabled = false;
  PairMode mode = PairMode::kTransferred;
  int m = 5;  // optimistic pair count
  double p_target = 0.5;
  double test_snr_db = 0.0;
  // Enrolled population: one victim per near duplicate, then `n_speakers`
  // unrelated speakers.
  std::vector<NearDuplicateSpec> near_duplicates;
  int n_speakers = 10;
  int segments_per_speaker = 10;
  double enroll_fraction = 0.5;
  // Transferred mode only: explicit (target, victim) pairs. Targets must be
  // plan targets and may repeat. Empty means each plan target is paired with
  // its closest enrolled speaker.
  std::vector<std::pair<int, int>> pairs;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  std::filesystem::path output_dir = "spkdoor_out";
  CorpusSpec corpus;
  double val_fraction = 0.05;
  double test_fraction = 0.10;
  int n = 2;
  int k = 5;
  double poison_fraction = 0.2;
  bool shared_trigger = false;
  SnrPolicy train_snr = SnrPolicy::Fixed(0.0);
  std::vector<double> test_snrs = {-3.0, 0.0, 3.0};
  // Trigger level in dBFS; empty means the training-split average.
  std::optional<double> trigger_level_dbfs;
  FeatureConfig features;
  TrainConfig train;
  SvSpec sv;
};

void Validate(const ExperimentConfig& cfg);
nlohmann::json ToJson(const ExperimentConfig& cfg);
// Missing fields keep their defaults; unknown fields are an error.
ExperimentConfig ConfigFromJson(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Per-stage seed derived from the master seed by stage name.
uint64_t StageSeed(const ExperimentConfig& cfg, std::string_view stage);

// Artifact locations under the output directory.
struct Layout {
  std::filesystem::path root;
  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path corpus() const { return root / "corpus.json"; }
  std::filesystem::path enrolled() const { return root / "enrolled.json"; }
  std::filesystem::path plan() const { return root / "plan.json"; }
  std::filesystem::path triggers() const { return root / "triggers.json"; }
  std::filesystem::path trigger_dir() const { return root / "triggers"; }
  std::filesystem::path poison() const { return root / "poison.json"; }
  std::filesystem::path model() const { return root / "model.json"; }
  std::filesystem::path clean_model() const { return root / "model_clean.json"; }
  std::filesystem::path train_log() const { return root / "train_log.json"; }
  std::filesystem::path clean_train_log() const { return root / "train_log_clean.json"; }
  std::filesystem::path pairs() const { return root / "pairs.json"; }
  std::filesystem::path si_report() const { return root / "si_report.json"; }
  std::filesystem::path si_csv() const { return root / "si_report.csv"; }
  std::filesystem::path sv_report() const { return root / "sv_report.json"; }
  std::filesystem::path sv_pairs_csv() const { return root / "sv_pairs.csv"; }
};

// Stages. Each reads only artifacts written by earlier stages.
void StageCorpus(const ExperimentConfig& cfg);
void StagePlan(const ExperimentConfig& cfg);
// With `export_dir`, also writes the poisoned training set as a WAV tree
// (one directory per training label) plus relabel.json.
void StagePoison(const ExperimentConfig& cfg,
                 const std::optional<std::filesystem::path>& export_dir = std::nullopt);
enum class TrainWhich { kClean, kPoisoned, kBoth };
void StageTrain(const ExperimentConfig& cfg, TrainWhich which);
SiReport StageEvalSi(const ExperimentConfig& cfg);
std::vector<PairSelection> StagePairs(const ExperimentConfig& cfg);
// `model_override` evaluates another checkpoint in place of the poisoned
// model (the clean one gives B-EER equal to the baseline EER).
SvReport StageEvalSv(const ExperimentConfig& cfg,
                     const std::optional<std::filesystem::path>& model_override = std::nullopt);

// Whole pipelines. Both also write config.json.
SiReport RunSi(const ExperimentConfig& cfg);
SvReport RunSv(const ExperimentConfig& cfg);

// Builds the enrolled population described by cfg.sv for a training corpus.
Corpus BuildEnrolledCorpus(const ExperimentConfig& cfg, const Corpus& training);

// Trigger artifacts.
std::vector<Trigger> LoadTriggers(const Layout& layout);

}  // namespace spkdoor

#endif  // SPKDOOR_EXPERIMENT_H_
