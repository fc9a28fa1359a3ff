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

// Command-line driver. Every subcommand resolves a config (defaults, then
// --config or <out>/config.json, then flags), saves it back to the output
// directory and runs one stage.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spkdoor/error.h"
#include "spkdoor/experiment.h"
#include "spkdoor/report.h"

namespace fs = std::filesystem;
using namespace spkdoor;

namespace {

// "0", "fixed:0" or "uniform:-3:3".
SnrPolicy ParseSnrPolicy(const std::string& text) {
  auto number = [&](const std::string& s) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) Fail(ErrorCode::kConfigError, "bad SNR '" + text + "'");
    return v;
  };
  if (text.rfind("uniform:", 0) == 0) {
    const std::string rest = text.substr(8);
    const auto colon = rest.find(':', 1);
    if (colon == std::string::npos) Fail(ErrorCode::kConfigError, "expected uniform:LO:HI");
    return SnrPolicy::Uniform(number(rest.substr(0, colon)), number(rest.substr(colon + 1)));
  }
  if (text.rfind("fixed:", 0) == 0) return SnrPolicy::Fixed(number(text.substr(6)));
  return SnrPolicy::Fixed(number(text));
}

struct Overrides {
  std::string config_path;
  std::string out;
  uint64_t seed = 0;
  // corpus
  int speakers = 0, segments = 0, rate = 0;
  double min_dur = 0, max_dur = 0, val = 0, test = 0;
  std::string root;
  // plan
  int n = 0, k = 0;
  double poison_fraction = 0;
  bool shared = false;
  std::string train_snr;
  double trigger_level = 0;
  // train
  int epochs = 0, batch = 0, hidden = 0, embedding = 0, patience = 0;
  double lr = 0;
  // eval
  std::vector<double> test_snrs;
  std::string mode;
  int m = 0;
  double p_target = 0, sv_test_snr = 0;
};

class Driver {
 public:
  explicit Driver(CLI::App& app) : app_(app) {
    app_.add_option("-c,--config", o_.config_path, "experiment config (JSON)");
    app_.add_option("-o,--out", o_.out, "output directory");
    seed_ = app_.add_option("--seed", o_.seed, "master seed");
  }

  CLI::App* Sub(const std::string& name, const std::string& help) {
    return app_.add_subcommand(name, help);
  }

  void CorpusFlags(CLI::App* s) {
    Track(s->add_option("--speakers", o_.speakers, "synthetic speaker count"));
    Track(s->add_option("--segments", o_.segments, "segments per synthetic speaker"));
    Track(s->add_option("--min-duration", o_.min_dur, "shortest segment, seconds"));
    Track(s->add_option("--max-duration", o_.max_dur, "longest segment, seconds"));
    Track(s->add_option("--rate", o_.rate, "sample rate, Hz"));
    Track(s->add_option("--val", o_.val, "validation fraction per speaker"));
    Track(s->add_option("--test", o_.test, "test fraction per speaker"));
  }

  void PlanFlags(CLI::App* s) {
    Track(s->add_option("-n,--targets", o_.n, "number of sub-attacks"));
    Track(s->add_option("-k,--subset", o_.k, "speakers per sub-attack"));
    Track(s->add_option("--poison-fraction", o_.poison_fraction, "fraction of each member's segments"));
    Track(s->add_flag("--shared-trigger", o_.shared, "one trigger for every sub-attack"));
    Track(s->add_option("--train-snr", o_.train_snr, "N, fixed:N or uniform:LO:HI (dB)"));
    Track(s->add_option("--trigger-level", o_.trigger_level, "trigger level, dBFS"));
  }

  void TrainFlags(CLI::App* s) {
    Track(s->add_option("--epochs", o_.epochs, "training epochs"));
    Track(s->add_option("--batch", o_.batch, "minibatch size"));
    Track(s->add_option("--lr", o_.lr, "Adam learning rate"));
    Track(s->add_option("--hidden", o_.hidden, "hidden layer width"));
    Track(s->add_option("--embedding-dim", o_.embedding, "embedding width"));
    Track(s->add_option("--patience", o_.patience, "early-stopping patience, epochs"));
  }

  void SiFlags(CLI::App* s) {
    Track(s->add_option("--test-snr", o_.test_snrs, "test SNRs (dB)")->delimiter(','));
  }

  void SvFlags(CLI::App* s) {
    Track(s->add_option("--mode", o_.mode, "transferred or optimistic"));
    Track(s->add_option("-m,--pairs", o_.m, "optimistic pair count"));
    Track(s->add_option("--p-target", o_.p_target, "target prior for the Bayes threshold"));
    Track(s->add_option("--sv-test-snr", o_.sv_test_snr, "trigger SNR for SV trials (dB)"));
  }

  // Builds the effective config and stores it under the output directory.
  ExperimentConfig Resolve(bool want_sv) {
    ExperimentConfig cfg;
    fs::path source = o_.config_path;
    if (source.empty() && !o_.out.empty() && fs::exists(fs::path(o_.out) / "config.json")) {
      source = fs::path(o_.out) / "config.json";
    }
    if (!source.empty()) cfg = LoadConfig(source);
    if (!o_.out.empty()) cfg.output_dir = o_.out;
    if (seed_->count()) cfg.seed = o_.seed;
    if (Set("--speakers")) cfg.corpus.n_speakers = o_.speakers;
    if (Set("--segments")) cfg.corpus.segments_per_speaker = o_.segments;
    if (Set("--min-duration")) cfg.corpus.min_duration_s = o_.min_dur;
    if (Set("--max-duration")) cfg.corpus.max_duration_s = o_.max_dur;
    if (Set("--rate")) cfg.corpus.sample_rate = o_.rate;
    if (Set("--val")) cfg.val_fraction = o_.val;
    if (Set("--test")) cfg.test_fraction = o_.test;
    if (Set("--targets")) cfg.n = o_.n;
    if (Set("--subset")) cfg.k = o_.k;
    if (Set("--poison-fraction")) cfg.poison_fraction = o_.poison_fraction;
    if (Set("--shared-trigger")) cfg.shared_trigger = o_.shared;
    if (Set("--train-snr")) cfg.train_snr = ParseSnrPolicy(o_.train_snr);
    if (Set("--trigger-level")) cfg.trigger_level_dbfs = o_.trigger_level;
    if (Set("--epochs")) cfg.train.epochs = o_.epochs;
    if (Set("--batch")) cfg.train.batch_size = o_.batch;
    if (Set("--lr")) cfg.train.learning_rate = o_.lr;
    if (Set("--hidden")) cfg.train.hidden = o_.hidden;
    if (Set("--embedding-dim")) cfg.train.embedding_dim = o_.embedding;
    if (Set("--patience")) cfg.train.patience = o_.patience;
    if (Set("--test-snr")) cfg.test_snrs = o_.test_snrs;
    if (Set("--mode")) cfg.sv.mode = ParsePairMode(o_.mode);
    if (Set("--pairs")) cfg.sv.m = o_.m;
    if (Set("--p-target")) cfg.sv.p_target = o_.p_target;
    if (Set("--sv-test-snr")) cfg.sv.test_snr_db = o_.sv_test_snr;
    if (want_sv) cfg.sv.enabled = true;
    Validate(cfg);
    WriteJsonAtomic(Layout{cfg.output_dir}.config(), ToJson(cfg));
    return cfg;
  }

  Overrides& o() { return o_; }

 private:
  void Track(CLI::Option* opt) { tracked_.push_back(opt); }

  // The same flag is registered on several subcommands.
  bool Set(const std::string& long_name) const {
    for (const CLI::Option* opt : tracked_) {
      for (const auto& name : opt->get_lnames()) {
        if ("--" + name == long_name && opt->count() > 0) return true;
      }
    }
    return false;
  }

  CLI::App& app_;
  Overrides o_;
  CLI::Option* seed_ = nullptr;
  std::vector<CLI::Option*> tracked_;
};

void PrintSi(const SiReport& r) {
  for (const auto& res : r.results) {
    char tc[32] = "n.a.";
    if (res.tc_pct) std::snprintf(tc, sizeof tc, "%.2f", *res.tc_pct);
    std::printf("test_snr %g dB  asr min/max/avg %.2f/%.2f/%.2f  tc %s  ba %.2f (clean %.2f)\n",
                res.test_snr_db, res.asr_min_pct, res.asr_max_pct, res.asr_avg_pct, tc, r.ba_pct,
                r.clean_ba_pct);
  }
}

void PrintSv(const SvReport& r) {
  std::printf("asr_avg %.2f  b_eer %.2f  baseline_eer %.2f\n", r.asr_avg_pct, r.b_eer_pct,
              r.baseline_eer_pct);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spkdoor: backdoor poisoning experiments for speaker recognition"};
  app.require_subcommand(1);
  Driver d(app);

  auto* corpus_gen = d.Sub("corpus-gen", "generate and split a synthetic corpus");
  d.CorpusFlags(corpus_gen);
  auto* corpus_import = d.Sub("corpus-import", "import and split a <speaker>/<file>.wav tree");
  corpus_import->add_option("root", d.o().root, "corpus root")->required();
  d.CorpusFlags(corpus_import);

  auto* plan = d.Sub("plan", "build the attack plan and triggers");
  d.PlanFlags(plan);

  std::string export_dir;
  auto* poison = d.Sub("poison", "select and poison training segments");
  poison->add_option("--export-wav", export_dir, "also write the poisoned set as a WAV tree");

  std::string which = "both";
  auto* train = d.Sub("train", "train clean and/or poisoned models");
  train->add_option("--which", which, "clean, poisoned or both")
      ->check(CLI::IsMember({"clean", "poisoned", "both"}));
  d.TrainFlags(train);

  auto* eval_si = d.Sub("eval-si", "speaker-identification attack report");
  d.SiFlags(eval_si);

  auto* pairs = d.Sub("pairs", "select target/victim pairs with the clean model");
  d.SvFlags(pairs);

  std::string model_override;
  auto* eval_sv = d.Sub("eval-sv", "speaker-verification attack report");
  d.SvFlags(eval_sv);
  eval_sv->add_option("--model", model_override, "evaluate this checkpoint instead");

  std::vector<std::string> report_files;
  std::string report_csv;
  auto* report = d.Sub("report", "render report files as a table and CSV");
  report->add_option("files", report_files, "si_report.json or sv_report.json files")->required();
  report->add_option("--csv", report_csv, "write the plotting CSV here");

  auto* run_si = d.Sub("run-si", "corpus, plan, poison, train and eval-si in one go");
  d.CorpusFlags(run_si);
  d.PlanFlags(run_si);
  d.TrainFlags(run_si);
  d.SiFlags(run_si);

  auto* run_sv = d.Sub("run-sv", "the full verification pipeline");
  d.CorpusFlags(run_sv);
  d.PlanFlags(run_sv);
  d.TrainFlags(run_sv);
  d.SvFlags(run_sv);

  CLI11_PARSE(app, argc, argv);

  try {
    if (corpus_gen->parsed()) {
      auto cfg = d.Resolve(false);
      cfg.corpus.kind = CorpusSpec::Kind::kSynthetic;
      WriteJsonAtomic(Layout{cfg.output_dir}.config(), ToJson(cfg));
      StageCorpus(cfg);
    } else if (corpus_import->parsed()) {
      auto cfg = d.Resolve(false);
      cfg.corpus.kind = CorpusSpec::Kind::kWavTree;
      cfg.corpus.import_root = d.o().root;
      WriteJsonAtomic(Layout{cfg.output_dir}.config(), ToJson(cfg));
      StageCorpus(cfg);
    } else if (plan->parsed()) {
      StagePlan(d.Resolve(false));
    } else if (poison->parsed()) {
      auto cfg = d.Resolve(false);
      StagePoison(cfg, export_dir.empty() ? std::nullopt : std::optional<fs::path>(export_dir));
    } else if (train->parsed()) {
      StageTrain(d.Resolve(false), which == "clean"      ? TrainWhich::kClean
                                   : which == "poisoned" ? TrainWhich::kPoisoned
                                                         : TrainWhich::kBoth);
    } else if (eval_si->parsed()) {
      PrintSi(StageEvalSi(d.Resolve(false)));
    } else if (pairs->parsed()) {
      for (const auto& p : StagePairs(d.Resolve(true))) {
        std::printf("target %d victim %d cosine %.4f\n", p.target_id, p.victim_id, p.cosine);
      }
    } else if (eval_sv->parsed()) {
      auto cfg = d.Resolve(true);
      PrintSv(StageEvalSv(cfg, model_override.empty()
                                   ? std::nullopt
                                   : std::optional<fs::path>(model_override)));
    } else if (report->parsed()) {
      std::vector<fs::path> files(report_files.begin(), report_files.end());
      const RenderedReport r = RenderReports(files);
      std::cout << r.table;
      if (!report_csv.empty()) WriteTextAtomic(report_csv, r.csv);
    } else if (run_si->parsed()) {
      PrintSi(RunSi(d.Resolve(false)));
    } else if (run_sv->parsed()) {
      PrintSv(RunSv(d.Resolve(true)));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "spkdoor: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spkdoor: %s\n", e.what());
    return 1;
  }
  return 0;
}
