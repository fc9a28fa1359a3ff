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

#ifndef SPKDOOR_REPORT_H_
#define SPKDOOR_REPORT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spkdoor/dsp.h"
#include "spkdoor/sv.h"

namespace spkdoor {

inline constexpr int kReportSchemaVersion = 1;

// One evaluation of the poisoned SI model at a single test SNR.
struct SiResult {
  double test_snr_db = 0.0;
  std::vector<double> asr_pct;  // per sub-attack
  std::vector<int> attempts;    // per sub-attack
  double asr_min_pct = 0.0;
  double asr_max_pct = 0.0;
  double asr_avg_pct = 0.0;
  std::optional<double> tc_pct;  // empty for a single sub-attack
  int skipped_too_short = 0;
};

struct SiReport {
  uint64_t seed = 0;
  int n = 0;
  int k = 0;
  int n_triggers = 0;
  bool shared_trigger = false;
  double poison_fraction = 0.0;
  SnrPolicy train_snr = SnrPolicy::Fixed(0.0);
  std::vector<int> targets;
  double clean_ba_pct = 0.0;  // clean baseline model on the same test split
  double ba_pct = 0.0;        // poisoned model
  std::vector<SiResult> results;  // one per test SNR, in config order
};

SiResult MakeSiResult(double test_snr_db, const std::vector<double>& asr_pct,
                      const std::vector<int>& attempts, std::optional<double> tc_pct,
                      int skipped_too_short);

nlohmann::json ToJson(const SiReport& r);
SiReport SiReportFromJson(const nlohmann::json& j);
// One row per (test SNR, sub-attack).
std::string SiReportCsv(const SiReport& r);

nlohmann::json ToJson(const SvReport& r);
SvReport SvReportFromJson(const nlohmann::json& j);
// Columns target,victim,cosine,asr,n_trials.
std::string SvPairsCsv(const SvReport& r);

struct RenderedReport {
  std::string table;
  std::string csv;
};

// Renders SI or SV report files (not both kinds at once) into a summary
// table and a plotting CSV.
RenderedReport RenderReports(const std::vector<std::filesystem::path>& files);

// Reads a whole JSON file, with kIoError on failure.
nlohmann::json ReadJsonFile(const std::filesystem::path& path);
// Writes via a sibling temporary file and rename, so readers never see a
// partial file.
void WriteTextAtomic(const std::filesystem::path& path, const std::string& text);
void WriteJsonAtomic(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace spkdoor

#endif  // SPKDOOR_REPORT_H_
