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

#include "spkdoor/report.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spkdoor/attack.h"
#include "spkdoor/error.h"

namespace spkdoor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string FmtTc(const std::optional<double>& tc, const char* format) {
  return tc ? Fmt(format, *tc) : "n.a.";
}

void CheckSchema(const json& j, const std::string& kind) {
  if (j.value("kind", std::string()) != kind) {
    Fail(ErrorCode::kConfigError, "expected a " + kind + " file");
  }
  if (j.value("schema_version", 0) != kReportSchemaVersion) {
    Fail(ErrorCode::kSchemaVersionMismatch,
         kind + " schema_version " + std::to_string(j.value("schema_version", 0)) +
             ", expected " + std::to_string(kReportSchemaVersion));
  }
}

}  // namespace

SiResult MakeSiResult(double test_snr_db, const std::vector<double>& asr_pct,
                      const std::vector<int>& attempts, std::optional<double> tc_pct,
                      int skipped_too_short) {
  if (asr_pct.empty()) Fail(ErrorCode::kEmptySet, "no sub-attacks evaluated");
  SiResult r;
  r.test_snr_db = test_snr_db;
  r.asr_pct = asr_pct;
  r.attempts = attempts;
  r.asr_min_pct = *std::min_element(asr_pct.begin(), asr_pct.end());
  r.asr_max_pct = *std::max_element(asr_pct.begin(), asr_pct.end());
  r.asr_avg_pct = std::accumulate(asr_pct.begin(), asr_pct.end(), 0.0) /
                  static_cast<double>(asr_pct.size());
  r.tc_pct = tc_pct;
  r.skipped_too_short = skipped_too_short;
  return r;
}

json ToJson(const SiReport& r) {
  json results = json::array();
  for (const auto& res : r.results) {
    json jr = {{"test_snr_db", res.test_snr_db},
               {"asr_pct", res.asr_pct},
               {"attempts", res.attempts},
               {"asr_min_pct", res.asr_min_pct},
               {"asr_max_pct", res.asr_max_pct},
               {"asr_avg_pct", res.asr_avg_pct},
               {"skipped_too_short", res.skipped_too_short}};
    jr["tc_pct"] = res.tc_pct ? json(*res.tc_pct) : json("n.a.");
    results.push_back(std::move(jr));
  }
  return {{"kind", "si_report"},
          {"schema_version", kReportSchemaVersion},
          {"seed", r.seed},
          {"n", r.n},
          {"k", r.k},
          {"n_triggers", r.n_triggers},
          {"shared_trigger", r.shared_trigger},
          {"poison_fraction", r.poison_fraction},
          {"train_snr", ToJson(r.train_snr)},
          {"targets", r.targets},
          {"clean_ba_pct", r.clean_ba_pct},
          {"ba_pct", r.ba_pct},
          {"results", std::move(results)}};
}

SiReport SiReportFromJson(const json& j) {
  CheckSchema(j, "si_report");
  SiReport r;
  r.seed = j.at("seed").get<uint64_t>();
  r.n = j.at("n").get<int>();
  r.k = j.at("k").get<int>();
  r.n_triggers = j.at("n_triggers").get<int>();
  r.shared_trigger = j.at("shared_trigger").get<bool>();
  r.poison_fraction = j.at("poison_fraction").get<double>();
  r.train_snr = SnrPolicyFromJson(j.at("train_snr"));
  r.targets = j.at("targets").get<std::vector<int>>();
  r.clean_ba_pct = j.at("clean_ba_pct").get<double>();
  r.ba_pct = j.at("ba_pct").get<double>();
  for (const auto& jr : j.at("results")) {
    SiResult res;
    res.test_snr_db = jr.at("test_snr_db").get<double>();
    res.asr_pct = jr.at("asr_pct").get<std::vector<double>>();
    res.attempts = jr.at("attempts").get<std::vector<int>>();
    res.asr_min_pct = jr.at("asr_min_pct").get<double>();
    res.asr_max_pct = jr.at("asr_max_pct").get<double>();
    res.asr_avg_pct = jr.at("asr_avg_pct").get<double>();
    res.skipped_too_short = jr.at("skipped_too_short").get<int>();
    if (jr.at("tc_pct").is_number()) res.tc_pct = jr.at("tc_pct").get<double>();
    r.results.push_back(std::move(res));
  }
  return r;
}

std::string SiReportCsv(const SiReport& r) {
  std::ostringstream out;
  out << "# schema_version=" << kReportSchemaVersion << "\n";
  out << "test_snr_db,sub_attack,target,attempts,asr_pct,asr_min_pct,asr_max_pct,asr_avg_pct,"
         "tc_pct,ba_pct,clean_ba_pct\n";
  for (const auto& res : r.results) {
    for (size_t i = 0; i < res.asr_pct.size(); ++i) {
      out << Fmt("%g", res.test_snr_db) << ',' << i << ','
          << (i < r.targets.size() ? r.targets[i] : -1) << ',' << res.attempts[i] << ','
          << Fmt("%.4f", res.asr_pct[i]) << ',' << Fmt("%.4f", res.asr_min_pct) << ','
          << Fmt("%.4f", res.asr_max_pct) << ',' << Fmt("%.4f", res.asr_avg_pct) << ','
          << FmtTc(res.tc_pct, "%.4f") << ',' << Fmt("%.4f", r.ba_pct) << ','
          << Fmt("%.4f", r.clean_ba_pct) << '\n';
    }
  }
  return out.str();
}

json ToJson(const SvReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"target", p.pair.target_id},
                     {"victim", p.pair.victim_id},
                     {"cosine", p.pair.cosine},
                     {"trigger_id", p.trigger_id},
                     {"n_trials", p.n_trials},
                     {"successes", p.successes},
                     {"asr_pct", p.asr_pct}});
  }
  return {{"kind", "sv_report"},
          {"schema_version", kReportSchemaVersion},
          {"mode", std::string(PairModeName(r.mode))},
          {"calibration", {{"scale", r.calibration.scale}, {"offset", r.calibration.offset}}},
          {"p_target", r.p_target},
          {"llr_threshold", r.llr_threshold},
          {"test_snr_db", r.test_snr_db},
          {"b_eer_pct", r.b_eer_pct},
          {"baseline_eer_pct", r.baseline_eer_pct},
          {"benign_target_trials", r.benign_target_trials},
          {"benign_impostor_trials", r.benign_impostor_trials},
          {"asr_avg_pct", r.asr_avg_pct},
          {"pairs", std::move(pairs)}};
}

SvReport SvReportFromJson(const json& j) {
  CheckSchema(j, "sv_report");
  SvReport r;
  r.mode = ParsePairMode(j.at("mode").get<std::string>());
  r.calibration.scale = j.at("calibration").at("scale").get<double>();
  r.calibration.offset = j.at("calibration").at("offset").get<double>();
  r.p_target = j.at("p_target").get<double>();
  r.llr_threshold = j.at("llr_threshold").get<double>();
  r.test_snr_db = j.at("test_snr_db").get<double>();
  r.b_eer_pct = j.at("b_eer_pct").get<double>();
  r.baseline_eer_pct = j.at("baseline_eer_pct").get<double>();
  r.benign_target_trials = j.at("benign_target_trials").get<int>();
  r.benign_impostor_trials = j.at("benign_impostor_trials").get<int>();
  r.asr_avg_pct = j.at("asr_avg_pct").get<double>();
  for (const auto& jp : j.at("pairs")) {
    SvPairResult p;
    p.pair.target_id = jp.at("target").get<int>();
    p.pair.victim_id = jp.at("victim").get<int>();
    p.pair.cosine = jp.at("cosine").get<double>();
    p.pair.mode = r.mode;
    p.trigger_id = jp.at("trigger_id").get<int>();
    p.n_trials = jp.at("n_trials").get<int>();
    p.successes = jp.at("successes").get<int>();
    p.asr_pct = jp.at("asr_pct").get<double>();
    r.pairs.push_back(p);
  }
  return r;
}

std::string SvPairsCsv(const SvReport& r) {
  std::ostringstream out;
  out << "target,victim,cosine,asr,n_trials\n";
  for (const auto& p : r.pairs) {
    out << p.pair.target_id << ',' << p.pair.victim_id << ',' << Fmt("%.6f", p.pair.cosine)
        << ',' << Fmt("%.4f", p.asr_pct) << ',' << p.n_trials << '\n';
  }
  return out.str();
}

RenderedReport RenderReports(const std::vector<fs::path>& files) {
  if (files.empty()) Fail(ErrorCode::kEmptySet, "no report files given");
  std::vector<json> docs;
  for (const auto& f : files) docs.push_back(ReadJsonFile(f));
  const std::string kind = docs.front().value("kind", std::string());
  for (const auto& d : docs) {
    if (d.value("kind", std::string()) != kind) {
      Fail(ErrorCode::kConfigError, "cannot mix SI and SV reports in one rendering");
    }
  }

  RenderedReport out;
  std::ostringstream table, csv;
  char line[256];
  if (kind == "si_report") {
    std::snprintf(line, sizeof line, "%6s %4s %4s %5s %-18s %6s %8s %8s %8s %8s %8s\n", "seed",
                  "n", "k", "trig", "train_snr", "test", "asr_min", "asr_max", "asr_avg", "tc",
                  "ba");
    table << line;
    csv << "seed,n,k,n_triggers,train_snr,test_snr_db,asr_min_pct,asr_max_pct,asr_avg_pct,"
           "tc_pct,ba_pct\n";
    for (const auto& d : docs) {
      const SiReport r = SiReportFromJson(d);
      const std::string train = Describe(r.train_snr);
      for (const auto& res : r.results) {
        std::snprintf(line, sizeof line,
                      "%6llu %4d %4d %5d %-18s %6g %8.2f %8.2f %8.2f %8s %8.2f\n",
                      static_cast<unsigned long long>(r.seed), r.n, r.k, r.n_triggers,
                      train.c_str(), res.test_snr_db, res.asr_min_pct, res.asr_max_pct,
                      res.asr_avg_pct, FmtTc(res.tc_pct, "%.2f").c_str(), r.ba_pct);
        table << line;
        csv << r.seed << ',' << r.n << ',' << r.k << ',' << r.n_triggers << ",\"" << train
            << "\"," << Fmt("%g", res.test_snr_db) << ',' << Fmt("%.4f", res.asr_min_pct) << ','
            << Fmt("%.4f", res.asr_max_pct) << ',' << Fmt("%.4f", res.asr_avg_pct) << ','
            << FmtTc(res.tc_pct, "%.4f") << ',' << Fmt("%.4f", r.ba_pct) << '\n';
      }
    }
  } else if (kind == "sv_report") {
    csv << "cosine,asr\n";
    for (const auto& d : docs) {
      const SvReport r = SvReportFromJson(d);
      std::snprintf(line, sizeof line,
                    "mode %s  test_snr %g dB  b_eer %.2f%%  baseline_eer %.2f%%  asr_avg %.2f%%\n",
                    std::string(PairModeName(r.mode)).c_str(), r.test_snr_db, r.b_eer_pct,
                    r.baseline_eer_pct, r.asr_avg_pct);
      table << line;
      std::snprintf(line, sizeof line, "%8s %8s %8s %8s %8s\n", "target", "victim", "cosine",
                    "asr", "trials");
      table << line;
      for (const auto& p : r.pairs) {
        std::snprintf(line, sizeof line, "%8d %8d %8.4f %8.2f %8d\n", p.pair.target_id,
                      p.pair.victim_id, p.pair.cosine, p.asr_pct, p.n_trials);
        table << line;
        csv << Fmt("%.6f", p.pair.cosine) << ',' << Fmt("%.4f", p.asr_pct) << '\n';
      }
    }
  } else {
    Fail(ErrorCode::kConfigError, "unknown report kind '" + kind + "'");
  }
  out.table = table.str();
  out.csv = csv.str();
  return out;
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
}

void WriteTextAtomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << text;
    if (!out) Fail(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) Fail(ErrorCode::kIoError, "rename to " + path.string() + ": " + ec.message());
}

void WriteJsonAtomic(const fs::path& path, const json& j) {
  WriteTextAtomic(path, j.dump(2) + "\n");
}

}  // namespace spkdoor
