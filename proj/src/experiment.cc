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

#include "spkdoor/experiment.h"

#include <algorithm>
#include <cstdio>
#include <initializer_list>
#include <map>
#include <set>

#include "spkdoor/attack.h"
#include "spkdoor/error.h"
#include "spkdoor/metrics.h"
#include "spkdoor/rng.h"

namespace spkdoor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kArtifactFormatVersion = 1;

template <typename F>
auto InStage(std::string_view stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + std::string(stage) + ": " + e.detail());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, "stage " + std::string(stage) + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::kIoError, "stage " + std::string(stage) + ": " + e.what());
  }
}

void CheckKeys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) Fail(ErrorCode::kConfigError, where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      Fail(ErrorCode::kConfigError, "unknown field " + where + "." + item.key());
    }
  }
}

std::set<std::string> KeysOf(const json& j) {
  std::set<std::string> keys;
  for (const auto& item : j.items()) keys.insert(item.key());
  return keys;
}

json Versioned(json body) {
  body["format_version"] = kArtifactFormatVersion;
  return body;
}

const json& RequireVersion(const json& j, const fs::path& path) {
  if (j.value("format_version", 0) != kArtifactFormatVersion) {
    Fail(ErrorCode::kSchemaVersionMismatch, path.string() + ": format_version");
  }
  return j;
}

Corpus LoadCorpusFile(const fs::path& path) { return LoadCorpusManifest(ReadJsonFile(path)); }

AttackPlan LoadPlan(const Layout& layout) {
  return PlanFromJson(RequireVersion(ReadJsonFile(layout.plan()), layout.plan()));
}

EmbeddingModel LoadModel(const fs::path& path) {
  return EmbeddingModel::FromJson(ReadJsonFile(path));
}

std::vector<PoisonRecord> LoadRecords(const Layout& layout) {
  const json j = ReadJsonFile(layout.poison());
  RequireVersion(j, layout.poison());
  return RecordsFromJson(j.at("records"));
}

std::vector<PairSelection> LoadPairs(const Layout& layout) {
  const json j = ReadJsonFile(layout.pairs());
  RequireVersion(j, layout.pairs());
  const PairMode mode = ParsePairMode(j.at("mode").get<std::string>());
  std::vector<PairSelection> pairs;
  for (const auto& jp : j.at("pairs")) {
    pairs.push_back(PairSelection{jp.at("target").get<int>(), jp.at("victim").get<int>(),
                                  jp.at("cosine").get<double>(), mode});
  }
  return pairs;
}

double TrainingAverageLevel(const Corpus& c) {
  const auto idx = c.IndicesOf(SplitTag::kTrain);
  if (idx.empty()) Fail(ErrorCode::kEmptySet, "corpus has no training segments");
  double sum = 0.0;
  for (size_t i : idx) sum += RmsLevelDb(c.segments[i].wave);
  return sum / static_cast<double>(idx.size());
}

LabeledSet FeaturesOf(const SegmentRefs& segs, const FeatureConfig& fc) {
  LabeledSet set;
  for (const Segment* s : segs) {
    set.inputs.push_back(PooledFeatures(s->wave, fc));
    set.labels.push_back(s->speaker_id);
  }
  return set;
}

json TrainLog(const TrainResult& r) {
  return {{"best_epoch", r.best_epoch},
          {"best_val_accuracy", r.best_val_accuracy},
          {"val_accuracy", r.val_accuracy}};
}

EnrolledSet MakeEnrolledSet(const Corpus& enrolled) {
  EnrolledSet set;
  for (const auto& seg : enrolled.segments) {
    if (seg.split == SplitTag::kTrain) set.enrollment[seg.speaker_id].push_back(&seg);
    if (seg.split == SplitTag::kTest) set.test[seg.speaker_id].push_back(&seg);
  }
  return set;
}

TrainConfig SeededTrainConfig(const ExperimentConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.seed = StageSeed(cfg, "train");
  return tc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void Validate(const ExperimentConfig& cfg) {
  auto bad = [](const std::string& msg) { Fail(ErrorCode::kConfigError, msg); };
  if (cfg.output_dir.empty()) bad("output_dir is empty");
  if (cfg.corpus.kind == CorpusSpec::Kind::kSynthetic) {
    if (cfg.corpus.n_speakers < 2) bad("corpus.n_speakers must be >= 2");
    if (cfg.corpus.segments_per_speaker < 3) bad("corpus.segments_per_speaker must be >= 3");
    if (cfg.corpus.min_duration_s < 0.5 || cfg.corpus.max_duration_s < cfg.corpus.min_duration_s) {
      bad("corpus durations must satisfy 0.5 <= min <= max");
    }
    if (cfg.corpus.sample_rate <= 0) bad("corpus.sample_rate must be positive");
  } else if (cfg.corpus.import_root.empty()) {
    bad("corpus.path is required for wav_tree corpora");
  }
  if (cfg.val_fraction < 0.0 || cfg.test_fraction < 0.0 ||
      cfg.val_fraction + cfg.test_fraction >= 1.0) {
    bad("split fractions must be non-negative and sum below 1");
  }
  if (cfg.n < 1) bad("plan.n must be >= 1");
  if (cfg.k < 3) bad("plan.k must be >= 3");
  if (cfg.poison_fraction <= 0.0 || cfg.poison_fraction > 1.0) {
    bad("plan.poison_fraction must be in (0, 1]");
  }
  if (cfg.test_snrs.empty()) bad("test_snrs is empty");
  Validate(cfg.features);
  Validate(cfg.train);
  if (cfg.sv.enabled) {
    if (cfg.sv.p_target <= 0.0 || cfg.sv.p_target >= 1.0) bad("sv.p_target must be in (0, 1)");
    if (cfg.sv.m < 1) bad("sv.m must be >= 1");
    if (cfg.sv.n_speakers < 0) bad("sv.n_speakers must be >= 0");
    if (cfg.sv.n_speakers + static_cast<int>(cfg.sv.near_duplicates.size()) < 2) {
      bad("sv needs at least 2 enrolled speakers");
    }
    if (cfg.sv.segments_per_speaker < 2) bad("sv.segments_per_speaker must be >= 2");
    if (cfg.sv.enroll_fraction <= 0.0 || cfg.sv.enroll_fraction >= 1.0) {
      bad("sv.enroll_fraction must be in (0, 1)");
    }
    for (const auto& nd : cfg.sv.near_duplicates) {
      if (nd.epsilon < 0.0) bad("sv.near_duplicates epsilon must be >= 0");
    }
    if (!cfg.sv.pairs.empty() && cfg.sv.mode != PairMode::kTransferred) {
      bad("sv.pairs applies to transferred mode only");
    }
  }
}

json ToJson(const ExperimentConfig& cfg) {
  json corpus;
  if (cfg.corpus.kind == CorpusSpec::Kind::kSynthetic) {
    corpus = {{"kind", "synthetic"},
              {"n_speakers", cfg.corpus.n_speakers},
              {"segments_per_speaker", cfg.corpus.segments_per_speaker},
              {"min_duration_s", cfg.corpus.min_duration_s},
              {"max_duration_s", cfg.corpus.max_duration_s},
              {"sample_rate", cfg.corpus.sample_rate}};
    if (cfg.corpus.fixed_seed) corpus["seed"] = *cfg.corpus.fixed_seed;
  } else {
    corpus = {{"kind", "wav_tree"}, {"path", cfg.corpus.import_root.string()}};
  }
  json train = ToJson(cfg.train);
  train.erase("seed");
  json near = json::array();
  for (const auto& nd : cfg.sv.near_duplicates) {
    near.push_back({{"of", nd.of_speaker}, {"epsilon", nd.epsilon}});
  }
  json explicit_pairs = json::array();
  for (const auto& [target, victim] : cfg.sv.pairs) {
    explicit_pairs.push_back({{"target", target}, {"victim", victim}});
  }
  json j = {{"format_version", kConfigFormatVersion},
            {"seed", cfg.seed},
            {"output_dir", cfg.output_dir.string()},
            {"corpus", std::move(corpus)},
            {"split", {{"val_fraction", cfg.val_fraction}, {"test_fraction", cfg.test_fraction}}},
            {"plan",
             {{"n", cfg.n},
              {"k", cfg.k},
              {"poison_fraction", cfg.poison_fraction},
              {"shared_trigger", cfg.shared_trigger}}},
            {"train_snr", ToJson(cfg.train_snr)},
            {"test_snrs", cfg.test_snrs},
            {"features", ToJson(cfg.features)},
            {"train", std::move(train)},
            {"sv",
             {{"enabled", cfg.sv.enabled},
              {"mode", std::string(PairModeName(cfg.sv.mode))},
              {"m", cfg.sv.m},
              {"p_target", cfg.sv.p_target},
              {"test_snr_db", cfg.sv.test_snr_db},
              {"near_duplicates", std::move(near)},
              {"n_speakers", cfg.sv.n_speakers},
              {"segments_per_speaker", cfg.sv.segments_per_speaker},
              {"enroll_fraction", cfg.sv.enroll_fraction},
              {"pairs", std::move(explicit_pairs)}}}};
  j["trigger"] = json::object();
  j["trigger"]["level_dbfs"] =
      cfg.trigger_level_dbfs ? json(*cfg.trigger_level_dbfs) : json("train_average");
  return j;
}

ExperimentConfig ConfigFromJson(const json& j) {
  try {
    CheckKeys(j,
              {"format_version", "seed", "output_dir", "corpus", "split", "plan", "train_snr",
               "test_snrs", "trigger", "features", "train", "sv"},
              "config");
    if (j.value("format_version", kConfigFormatVersion) != kConfigFormatVersion) {
      Fail(ErrorCode::kSchemaVersionMismatch, "config format_version");
    }
    ExperimentConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir.string());
    if (j.contains("corpus")) {
      const json& c = j.at("corpus");
      CheckKeys(c,
                {"kind", "n_speakers", "segments_per_speaker", "min_duration_s", "max_duration_s",
                 "sample_rate", "seed", "path"},
                "corpus");
      const std::string kind = c.value("kind", std::string("synthetic"));
      if (kind == "synthetic") {
        cfg.corpus.kind = CorpusSpec::Kind::kSynthetic;
      } else if (kind == "wav_tree") {
        cfg.corpus.kind = CorpusSpec::Kind::kWavTree;
      } else {
        Fail(ErrorCode::kConfigError, "unknown corpus kind '" + kind + "'");
      }
      cfg.corpus.n_speakers = c.value("n_speakers", cfg.corpus.n_speakers);
      cfg.corpus.segments_per_speaker =
          c.value("segments_per_speaker", cfg.corpus.segments_per_speaker);
      cfg.corpus.min_duration_s = c.value("min_duration_s", cfg.corpus.min_duration_s);
      cfg.corpus.max_duration_s = c.value("max_duration_s", cfg.corpus.max_duration_s);
      cfg.corpus.sample_rate = c.value("sample_rate", cfg.corpus.sample_rate);
      if (c.contains("seed")) cfg.corpus.fixed_seed = c.at("seed").get<uint64_t>();
      if (c.contains("path")) cfg.corpus.import_root = c.at("path").get<std::string>();
    }
    if (j.contains("split")) {
      const json& s = j.at("split");
      CheckKeys(s, {"val_fraction", "test_fraction"}, "split");
      cfg.val_fraction = s.value("val_fraction", cfg.val_fraction);
      cfg.test_fraction = s.value("test_fraction", cfg.test_fraction);
    }
    if (j.contains("plan")) {
      const json& p = j.at("plan");
      CheckKeys(p, {"n", "k", "poison_fraction", "shared_trigger"}, "plan");
      cfg.n = p.value("n", cfg.n);
      cfg.k = p.value("k", cfg.k);
      cfg.poison_fraction = p.value("poison_fraction", cfg.poison_fraction);
      cfg.shared_trigger = p.value("shared_trigger", cfg.shared_trigger);
    }
    if (j.contains("train_snr")) cfg.train_snr = SnrPolicyFromJson(j.at("train_snr"));
    if (j.contains("test_snrs")) cfg.test_snrs = j.at("test_snrs").get<std::vector<double>>();
    if (j.contains("trigger")) {
      const json& t = j.at("trigger");
      CheckKeys(t, {"level_dbfs"}, "trigger");
      if (t.contains("level_dbfs")) {
        const json& level = t.at("level_dbfs");
        if (level.is_number()) {
          cfg.trigger_level_dbfs = level.get<double>();
        } else if (level != "train_average") {
          Fail(ErrorCode::kConfigError, "trigger.level_dbfs must be a number or \"train_average\"");
        }
      }
    }
    if (j.contains("features")) {
      CheckKeys(j.at("features"), KeysOf(ToJson(FeatureConfig{})), "features");
      cfg.features = FeatureConfigFromJson(j.at("features"));
    }
    if (j.contains("train")) {
      auto allowed = KeysOf(ToJson(TrainConfig{}));
      allowed.erase("seed");
      CheckKeys(j.at("train"), allowed, "train");
      cfg.train = TrainConfigFromJson(j.at("train"));
    }
    if (j.contains("sv")) {
      const json& s = j.at("sv");
      CheckKeys(s,
                {"enabled", "mode", "m", "p_target", "test_snr_db", "near_duplicates",
                 "n_speakers", "segments_per_speaker", "enroll_fraction", "pairs"},
                "sv");
      cfg.sv.enabled = s.value("enabled", true);
      if (s.contains("mode")) cfg.sv.mode = ParsePairMode(s.at("mode").get<std::string>());
      cfg.sv.m = s.value("m", cfg.sv.m);
      cfg.sv.p_target = s.value("p_target", cfg.sv.p_target);
      cfg.sv.test_snr_db = s.value("test_snr_db", cfg.sv.test_snr_db);
      cfg.sv.n_speakers = s.value("n_speakers", cfg.sv.n_speakers);
      cfg.sv.segments_per_speaker = s.value("segments_per_speaker", cfg.sv.segments_per_speaker);
      cfg.sv.enroll_fraction = s.value("enroll_fraction", cfg.sv.enroll_fraction);
      if (s.contains("pairs")) {
        for (const auto& jp : s.at("pairs")) {
          CheckKeys(jp, {"target", "victim"}, "sv.pairs[]");
          cfg.sv.pairs.emplace_back(jp.at("target").get<int>(), jp.at("victim").get<int>());
        }
      }
      if (s.contains("near_duplicates")) {
        for (const auto& nd : s.at("near_duplicates")) {
          CheckKeys(nd, {"of", "epsilon"}, "sv.near_duplicates[]");
          cfg.sv.near_duplicates.push_back(
              NearDuplicateSpec{nd.at("of").get<int>(), nd.value("epsilon", 0.01)});
        }
      }
    }
    Validate(cfg);
    return cfg;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfigError, e.what());
  }
}

ExperimentConfig LoadConfig(const fs::path& path) { return ConfigFromJson(ReadJsonFile(path)); }

uint64_t StageSeed(const ExperimentConfig& cfg, std::string_view stage) {
  return DeriveSeed(cfg.seed, stage);
}

// ---------------------------------------------------------------------------
// Stages

Corpus BuildEnrolledCorpus(const ExperimentConfig& cfg, const Corpus& training) {
  const uint64_t base = StageSeed(cfg, "enrolled");
  std::vector<std::string> names;
  std::vector<SpeakerProfile> profiles;
  auto name = [](size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "enr%04zu", i);
    return std::string(buf);
  };
  for (size_t i = 0; i < cfg.sv.near_duplicates.size(); ++i) {
    const auto& nd = cfg.sv.near_duplicates[i];
    if (training.profiles.empty()) {
      Fail(ErrorCode::kConfigError, "near duplicates need a synthetic training corpus");
    }
    if (nd.of_speaker < 0 || nd.of_speaker >= static_cast<int>(training.profiles.size())) {
      Fail(ErrorCode::kOutOfRange, "near duplicate of unknown speaker " +
                                       std::to_string(nd.of_speaker));
    }
    SpeakerProfile p = NearDuplicateSpeaker(training.profiles[static_cast<size_t>(nd.of_speaker)],
                                            nd.epsilon, DeriveSeed(base, i));
    // Same voice, different recordings.
    p.seed = DeriveSeed(DeriveSeed(base, "near-duplicate-audio"), i);
    names.push_back(name(names.size()));
    profiles.push_back(std::move(p));
  }
  const uint64_t fresh = DeriveSeed(base, "unrelated-profiles");
  for (int j = 0; j < cfg.sv.n_speakers; ++j) {
    Rng rng(DeriveSeed(fresh, static_cast<uint64_t>(j)));
    names.push_back(name(names.size()));
    profiles.push_back(RandomSpeakerProfile(rng, training.sample_rate));
  }

  SyntheticParams shape;
  shape.seed = base;
  shape.segments_per_speaker = cfg.sv.segments_per_speaker;
  shape.min_duration_s = cfg.corpus.min_duration_s;
  shape.max_duration_s = cfg.corpus.max_duration_s;
  shape.sample_rate = training.sample_rate;
  Corpus c = SynthesizeFromProfiles(std::move(names), std::move(profiles), shape);

  // Enrollment segments are tagged train, trial segments test.
  const uint64_t split_seed = StageSeed(cfg, "enroll-split");
  for (int s = 0; s < c.n_speakers(); ++s) {
    auto idx = c.IndicesOf(s, SplitTag::kUnassigned);
    Rng rng(DeriveSeed(split_seed, static_cast<uint64_t>(s)));
    Shuffle(idx, rng);
    const int count = static_cast<int>(idx.size());
    const int n_enroll =
        std::clamp(RoundHalfUpAtLeastOne(cfg.sv.enroll_fraction * count), 1, count - 1);
    for (int i = 0; i < count; ++i) {
      c.segments[idx[static_cast<size_t>(i)]].split = i < n_enroll ? SplitTag::kTrain
                                                                   : SplitTag::kTest;
    }
  }
  return c;
}

void StageCorpus(const ExperimentConfig& cfg) {
  InStage("corpus", [&] {
    const Layout layout{cfg.output_dir};
    Corpus c;
    if (cfg.corpus.kind == CorpusSpec::Kind::kSynthetic) {
      SyntheticParams p;
      p.seed = cfg.corpus.fixed_seed.value_or(StageSeed(cfg, "corpus"));
      p.n_speakers = cfg.corpus.n_speakers;
      p.segments_per_speaker = cfg.corpus.segments_per_speaker;
      p.min_duration_s = cfg.corpus.min_duration_s;
      p.max_duration_s = cfg.corpus.max_duration_s;
      p.sample_rate = cfg.corpus.sample_rate;
      c = GenerateSynthetic(p);
    } else {
      c = ImportWavTree(cfg.corpus.import_root);
    }
    c = Split(std::move(c), cfg.val_fraction, cfg.test_fraction, StageSeed(cfg, "split"));
    WriteJsonAtomic(layout.corpus(), CorpusManifest(c));
    if (cfg.sv.enabled) WriteJsonAtomic(layout.enrolled(), CorpusManifest(BuildEnrolledCorpus(cfg, c)));
  });
}

void StagePlan(const ExperimentConfig& cfg) {
  InStage("plan", [&] {
    const Layout layout{cfg.output_dir};
    const Corpus c = LoadCorpusFile(layout.corpus());
    AttackPlan plan;
    if (cfg.sv.enabled && cfg.sv.mode == PairMode::kOptimistic) {
      std::vector<int> targets;
      for (const auto& p : LoadPairs(layout)) targets.push_back(p.target_id);
      plan = BuildPlanForTargets(targets, cfg.k, c.n_speakers(), cfg.poison_fraction,
                                 cfg.train_snr, cfg.shared_trigger);
    } else {
      plan = BuildPlan(cfg.n, cfg.k, c.n_speakers(), cfg.poison_fraction, cfg.train_snr,
                       cfg.shared_trigger);
    }

    const double level = cfg.trigger_level_dbfs.value_or(TrainingAverageLevel(c));
    const uint64_t trigger_seed = StageSeed(cfg, "triggers");
    std::vector<int> ids = plan.TriggerIds();
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    fs::create_directories(layout.trigger_dir());
    json entries = json::array();
    for (int id : ids) {
      const uint64_t seed = DeriveSeed(trigger_seed, static_cast<uint64_t>(id));
      const Trigger t = NormalizeToLevel(SynthClick(seed, c.sample_rate, id), level);
      char file[32];
      std::snprintf(file, sizeof file, "trigger_%02d.wav", id);
      WriteWav(layout.trigger_dir() / file, t.wave, WavEncoding::kFloat32);
      entries.push_back({{"id", id}, {"seed", seed}, {"file", file}});
    }
    WriteJsonAtomic(layout.triggers(), Versioned({{"level_dbfs", level}, {"triggers", entries}}));

    json jp = ToJson(plan);
    const PlanStats st = ComputePlanStats(plan, c);
    jp["stats"] = {{"total_speakers", st.total_speakers},
                   {"selected_speakers", st.selected_speakers},
                   {"speaker_pct", st.speaker_pct},
                   {"train_segments", st.train_segments},
                   {"poisoned_segments", st.poisoned_segments},
                   {"segment_pct", st.segment_pct}};
    WriteJsonAtomic(layout.plan(), Versioned(std::move(jp)));
  });
}

std::vector<Trigger> LoadTriggers(const Layout& layout) {
  const json j = ReadJsonFile(layout.triggers());
  RequireVersion(j, layout.triggers());
  const double level = j.at("level_dbfs").get<double>();
  std::vector<Trigger> out;
  for (const auto& e : j.at("triggers")) {
    Trigger t;
    t.id = e.at("id").get<int>();
    t.wave = ReadWav(layout.trigger_dir() / e.at("file").get<std::string>());
    t.reference_level_dbfs = level;
    out.push_back(std::move(t));
  }
  return out;
}

void StagePoison(const ExperimentConfig& cfg, const std::optional<fs::path>& export_dir) {
  InStage("poison", [&] {
    const Layout layout{cfg.output_dir};
    const Corpus c = LoadCorpusFile(layout.corpus());
    const AttackPlan plan = LoadPlan(layout);
    const auto triggers = LoadTriggers(layout);
    auto records = SelectPoisonSegments(c, plan, StageSeed(cfg, "poison-select"));
    const PoisonedDataset ds =
        ApplyPoison(c, std::move(records), triggers, plan.snr_policy, StageSeed(cfg, "poison-apply"));
    WriteJsonAtomic(layout.poison(), Versioned({{"records", ToJson(ds.records)}}));
    if (!export_dir) return;

    std::vector<Segment> relabeled = ds.segments;
    for (size_t i = 0; i < relabeled.size(); ++i) relabeled[i].speaker_id = ds.labels[i];
    WriteWavTree(relabeled, c.speaker_names, *export_dir);
    std::map<std::string, const PoisonRecord*> by_id;
    for (const auto& r : ds.records) by_id[r.segment_id] = &r;
    json entries = json::array();
    for (size_t i = 0; i < relabeled.size(); ++i) {
      const Segment& seg = relabeled[i];
      std::string file = seg.segment_id;
      std::replace(file.begin(), file.end(), '/', '_');
      json e = {{"segment_id", seg.segment_id},
                {"file", c.speaker_names[static_cast<size_t>(seg.speaker_id)] + "/" + file + ".wav"},
                {"original_speaker", c.speaker_names[static_cast<size_t>(ds.segments[i].speaker_id)]},
                {"training_label", c.speaker_names[static_cast<size_t>(seg.speaker_id)]},
                {"poisoned", static_cast<bool>(ds.poisoned[i])}};
      if (const auto it = by_id.find(seg.segment_id); it != by_id.end()) {
        e["trigger_id"] = it->second->trigger_id;
        e["snr_db"] = it->second->snr_db;
        e["offset"] = it->second->offset;
      }
      entries.push_back(std::move(e));
    }
    WriteJsonAtomic(*export_dir / "relabel.json", Versioned({{"segments", std::move(entries)}}));
  });
}

void StageTrain(const ExperimentConfig& cfg, TrainWhich which) {
  InStage("train", [&] {
    const Layout layout{cfg.output_dir};
    const Corpus c = LoadCorpusFile(layout.corpus());
    const TrainConfig tc = SeededTrainConfig(cfg);
    const LabeledSet val = FeaturesOf(SelectSplit(c, SplitTag::kVal), cfg.features);
    const PoisonedDataset clean = ReplayPoison(c, {}, {});
    LabeledSet clean_train;
    for (const auto& seg : clean.segments) {
      clean_train.inputs.push_back(PooledFeatures(seg.wave, cfg.features));
      clean_train.labels.push_back(seg.speaker_id);
    }
    if (which != TrainWhich::kPoisoned) {
      const TrainResult r = Train(clean_train, val, c.n_speakers(), cfg.features, tc);
      WriteJsonAtomic(layout.clean_model(), r.model.ToJson());
      WriteJsonAtomic(layout.clean_train_log(), TrainLog(r));
    }
    if (which != TrainWhich::kClean) {
      const auto triggers = LoadTriggers(layout);
      const PoisonedDataset ds = ReplayPoison(c, LoadRecords(layout), triggers);
      LabeledSet train = std::move(clean_train);
      for (size_t i = 0; i < ds.segments.size(); ++i) {
        if (ds.poisoned[i]) train.inputs[i] = PooledFeatures(ds.segments[i].wave, cfg.features);
        train.labels[i] = ds.labels[i];
      }
      const TrainResult r = Train(train, val, c.n_speakers(), cfg.features, tc);
      WriteJsonAtomic(layout.model(), r.model.ToJson());
      WriteJsonAtomic(layout.train_log(), TrainLog(r));
    }
  });
}

SiReport StageEvalSi(const ExperimentConfig& cfg) {
  return InStage("eval-si", [&] {
    const Layout layout{cfg.output_dir};
    const Corpus c = LoadCorpusFile(layout.corpus());
    const AttackPlan plan = LoadPlan(layout);
    const auto triggers = LoadTriggers(layout);
    const EmbeddingModel poisoned = LoadModel(layout.model());
    const EmbeddingModel clean = LoadModel(layout.clean_model());
    const SegmentRefs test = SelectSplit(c, SplitTag::kTest);
    const ModelClassifier pm(poisoned), cm(clean);

    SiReport report;
    report.seed = cfg.seed;
    report.n = static_cast<int>(plan.sub_attacks.size());
    report.k = plan.k;
    report.n_triggers = static_cast<int>(triggers.size());
    report.shared_trigger = plan.shared_trigger;
    report.poison_fraction = cfg.poison_fraction;
    report.train_snr = plan.snr_policy;
    report.targets = plan.Targets();
    report.clean_ba_pct = BenignAccuracy(cm, test);
    report.ba_pct = BenignAccuracy(pm, test);
    // One offset stream for every test SNR, so SNR rows are paired.
    const uint64_t seed = StageSeed(cfg, "eval-si");
    for (double snr : cfg.test_snrs) {
      const SiAttackOutcome out = EvaluateSiAttack(pm, plan, triggers, test, snr, seed);
      report.results.push_back(MakeSiResult(snr, out.AsrPct(), out.attempts,
                                            TriggerConfusionPct(plan, out),
                                            out.skipped_too_short));
    }
    WriteJsonAtomic(layout.si_report(), ToJson(report));
    WriteTextAtomic(layout.si_csv(), SiReportCsv(report));
    return report;
  });
}

std::vector<PairSelection> StagePairs(const ExperimentConfig& cfg) {
  return InStage("pairs", [&] {
    if (!cfg.sv.enabled) Fail(ErrorCode::kConfigError, "sv section is not enabled");
    const Layout layout{cfg.output_dir};
    const Corpus c = LoadCorpusFile(layout.corpus());
    const Corpus enrolled = LoadCorpusFile(layout.enrolled());
    const EmbeddingModel clean = LoadModel(layout.clean_model());
    const ModelClassifier cm(clean);
    const EmbeddingMap train_embs = SpeakerEmbeddings(cm, SelectSplit(c, SplitTag::kTrain));
    const EmbeddingMap enrolled_embs = SpeakerEmbeddings(cm, SelectSplit(enrolled, SplitTag::kTrain));

    std::vector<PairSelection> pairs;
    if (cfg.sv.mode == PairMode::kOptimistic) {
      // Keep the best victim per target; a plan cannot reuse a target.
      std::vector<PairSelection> ranked =
          SelectOptimistic(ClosestPairs(train_embs, enrolled_embs),
                           static_cast<size_t>(enrolled_embs.size()));
      std::set<int> used;
      std::vector<PairSelection> distinct;
      for (const auto& p : ranked) {
        if (used.insert(p.target_id).second) distinct.push_back(p);
      }
      pairs = SelectOptimistic(distinct, static_cast<size_t>(cfg.sv.m));
    } else {
      const AttackPlan plan = LoadPlan(layout);
      const std::vector<int> targets = plan.Targets();
      if (cfg.sv.pairs.empty()) {
        pairs = SelectTransferred(targets, enrolled_embs, train_embs);
      } else {
        for (const auto& [target, victim] : cfg.sv.pairs) {
          if (std::find(targets.begin(), targets.end(), target) == targets.end()) {
            Fail(ErrorCode::kConfigError, "sv.pairs target " + std::to_string(target) +
                                              " is not a plan target");
          }
          const auto t = train_embs.find(target);
          const auto v = enrolled_embs.find(victim);
          if (t == train_embs.end() || v == enrolled_embs.end()) {
            Fail(ErrorCode::kSpeakerWithoutSegments,
                 "pair " + std::to_string(target) + "/" + std::to_string(victim));
          }
          pairs.push_back(PairSelection{target, victim, Cosine(t->second.vector, v->second.vector),
                                        PairMode::kTransferred});
        }
      }
    }
    json jp = json::array();
    for (const auto& p : pairs) {
      jp.push_back({{"target", p.target_id}, {"victim", p.victim_id}, {"cosine", p.cosine}});
    }
    WriteJsonAtomic(layout.pairs(), Versioned({{"mode", std::string(PairModeName(cfg.sv.mode))},
                                               {"pairs", std::move(jp)}}));
    return pairs;
  });
}

SvReport StageEvalSv(const ExperimentConfig& cfg, const std::optional<fs::path>& model_override) {
  return InStage("eval-sv", [&] {
    if (!cfg.sv.enabled) Fail(ErrorCode::kConfigError, "sv section is not enabled");
    const Layout layout{cfg.output_dir};
    const Corpus enrolled = LoadCorpusFile(layout.enrolled());
    const auto pairs = LoadPairs(layout);
    const AttackPlan plan = LoadPlan(layout);
    const auto triggers = LoadTriggers(layout);
    const EmbeddingModel poisoned = LoadModel(model_override.value_or(layout.model()));
    const EmbeddingModel clean = LoadModel(layout.clean_model());
    const ModelClassifier pm(poisoned), cm(clean);

    std::map<int, Trigger> trigger_by_target;
    for (const auto& sa : plan.sub_attacks) {
      trigger_by_target[sa.target_id] = FindTrigger(triggers, sa.trigger_id);
    }
    const EnrolledSet set = MakeEnrolledSet(enrolled);
    const SegmentRefs impostors = set.AllTest();
    const auto benign = BenignTrials(pm, set);
    const Calibration cal = Calibrate(benign, cfg.sv.p_target);
    SvReport report = EvalSvAttack(pm, pairs, trigger_by_target, set, impostors, cal,
                                   cfg.sv.p_target, cfg.sv.test_snr_db, StageSeed(cfg, "eval-sv"));
    report.mode = cfg.sv.mode;
    report.baseline_eer_pct = 100.0 * TrialEer(BenignTrials(cm, set)).eer;
    WriteJsonAtomic(layout.sv_report(), ToJson(report));
    WriteTextAtomic(layout.sv_pairs_csv(), SvPairsCsv(report));
    return report;
  });
}

SiReport RunSi(const ExperimentConfig& cfg) {
  Validate(cfg);
  WriteJsonAtomic(Layout{cfg.output_dir}.config(), ToJson(cfg));
  ExperimentConfig si = cfg;
  si.sv.enabled = false;
  StageCorpus(si);
  StagePlan(si);
  StagePoison(si);
  StageTrain(si, TrainWhich::kBoth);
  return StageEvalSi(si);
}

SvReport RunSv(const ExperimentConfig& cfg) {
  ExperimentConfig sv = cfg;
  sv.sv.enabled = true;
  Validate(sv);
  WriteJsonAtomic(Layout{sv.output_dir}.config(), ToJson(sv));
  StageCorpus(sv);
  if (sv.sv.mode == PairMode::kOptimistic) {
    StageTrain(sv, TrainWhich::kClean);
    StagePairs(sv);
    StagePlan(sv);
    StagePoison(sv);
    StageTrain(sv, TrainWhich::kPoisoned);
  } else {
    StagePlan(sv);
    StagePoison(sv);
    StageTrain(sv, TrainWhich::kBoth);
    StagePairs(sv);
  }
  return StageEvalSv(sv);
}

}  // namespace spkdoor
