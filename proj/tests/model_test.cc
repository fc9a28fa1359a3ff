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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "spkdoor/error.h"
#include "spkdoor/features.h"
#include "spkdoor/model.h"
#include "spkdoor/rng.h"

namespace spkdoor {
namespace {

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kConfigError;
}

Waveform Noise(size_t n, uint64_t seed, int rate = 16000, double amp = 0.3) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = rate;
  for (size_t i = 0; i < n; ++i) w.samples.push_back(amp * rng.Uniform(-1.0, 1.0));
  return w;
}

TEST(Features, FrameCount) {
  const FeatureConfig cfg;
  EXPECT_EQ(ExtractFeatures(Noise(16000, 1), cfg).frames, 98u);
  EXPECT_EQ(ExtractFeatures(Noise(400, 1), cfg).frames, 1u);
  EXPECT_EQ(ExtractFeatures(Noise(8000, 1, 8000), cfg).frames, 98u);
  EXPECT_EQ(CodeOf([&] { ExtractFeatures(Noise(399, 1), cfg); }), ErrorCode::kTooShort);
}

TEST(Features, SilenceIsFloor) {
  const FeatureConfig cfg;
  Waveform w;
  w.samples.assign(4000, 0.0);
  for (double v : ExtractFeatures(w, cfg).data) EXPECT_EQ(v, cfg.log_floor);
}

TEST(Features, DoublingAmplitudeShiftsByLogFour) {
  const FeatureConfig cfg;
  const Waveform a = Noise(8000, 3);
  Waveform b = a;
  for (double& v : b.samples) v *= 2.0;
  const auto fa = ExtractFeatures(a, cfg), fb = ExtractFeatures(b, cfg);
  for (size_t i = 0; i < fa.data.size(); ++i) {
    if (fa.data[i] > cfg.log_floor + 1.0) EXPECT_NEAR(fb.data[i] - fa.data[i], std::log(4.0), 1e-9);
  }
}

// Naive DFT of one Hamming-windowed frame, projected on the filter bank.
TEST(Features, MatchesNaiveDftOracle) {
  const FeatureConfig cfg;
  const Waveform w = Noise(1200, 5);
  const auto feats = ExtractFeatures(w, cfg);
  const size_t frame = 400, hop = 160, nfft = 512;
  const auto bank = FilterBankWeights(cfg, 16000, nfft);
  for (size_t t : {size_t{0}, size_t{3}, feats.frames - 1}) {
    std::vector<double> power(nfft / 2 + 1);
    for (size_t k = 0; k < power.size(); ++k) {
      std::complex<double> acc = 0.0;
      for (size_t i = 0; i < frame; ++i) {
        const double win = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (frame - 1.0));
        acc += w.samples[t * hop + i] * win *
               std::polar(1.0, -2.0 * std::numbers::pi * double(k * i) / double(nfft));
      }
      power[k] = std::norm(acc);
    }
    for (size_t f = 0; f < bank.size(); ++f) {
      double e = 0.0;
      for (size_t k = 0; k < power.size(); ++k) e += bank[f][k] * power[k];
      EXPECT_NEAR(feats.row(t)[f], std::max(std::log(e), cfg.log_floor), 1e-8);
    }
  }
}

TEST(Features, FilterBankShape) {
  const FeatureConfig cfg;
  const auto bank = FilterBankWeights(cfg, 16000, 512);
  ASSERT_EQ(bank.size(), 24u);
  for (const auto& row : bank) {
    ASSERT_EQ(row.size(), 257u);
    double s = 0.0;
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_GT(s, 0.0);
  }
}

TEST(Features, PoolingWorkedExample) {
  FeatureMatrix m;
  m.frames = 4;
  m.dims = 2;
  m.data = {1, 10, 2, 10, 3, 10, 4, 10};
  const auto p = PoolStats(m);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_DOUBLE_EQ(p[0], 2.5);
  EXPECT_DOUBLE_EQ(p[1], 10.0);
  EXPECT_NEAR(p[2], std::sqrt(1.25), 1e-15);
  EXPECT_DOUBLE_EQ(p[3], 0.0);
  m.frames = 1;
  m.data.resize(2);
  EXPECT_EQ(CodeOf([&] { PoolStats(m); }), ErrorCode::kTooFewFrames);
  EXPECT_EQ(PooledFeatures(Noise(16000, 2), FeatureConfig{}).size(), 48u);
}

TEST(Features, ConfigValidationAndJson) {
  FeatureConfig bad;
  bad.hop_ms = 30.0;
  EXPECT_EQ(CodeOf([&] { Validate(bad); }), ErrorCode::kInvalidArgument);
  FeatureConfig cfg;
  cfg.n_filters = 16;
  EXPECT_EQ(FeatureConfigFromJson(ToJson(cfg)), cfg);
}

double Tanh(double x) { return std::tanh(x); }

// Hand-rolled forward pass read off the documented flat layout.
std::vector<double> OracleLogits(const EmbeddingModel& m, const std::vector<double>& x,
                                 std::vector<double>* emb_out) {
  const auto& d = m.dims();
  const auto& p = m.params();
  const auto l = m.layout();
  std::vector<double> z(x.size());
  for (size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m.input_mean()[i]) * m.input_scale()[i];
  std::vector<double> h(d.hidden), a(d.embedding), out(d.classes);
  for (int r = 0; r < d.hidden; ++r) {
    double s = p[l.b1 + r];
    for (int c = 0; c < d.input; ++c) s += p[l.w1 + r * d.input + c] * z[c];
    h[r] = Tanh(s);
  }
  double norm = 0.0;
  for (int r = 0; r < d.embedding; ++r) {
    double s = p[l.b2 + r];
    for (int c = 0; c < d.hidden; ++c) s += p[l.w2 + r * d.hidden + c] * h[c];
    a[r] = Tanh(s);
    norm += a[r] * a[r];
  }
  norm = std::sqrt(norm);
  const std::vector<double> raw = a;
  for (double& v : a) v /= norm;
  *emb_out = a;
  for (int r = 0; r < d.classes; ++r) {
    double dot = 0.0, wn = 0.0;
    for (int c = 0; c < d.embedding; ++c) {
      const double w = p[l.w3 + r * d.embedding + c];
      dot += w * a[c];
      wn += w * w;
    }
    if (d.cosine_scale > 0) {
      out[r] = d.cosine_scale * dot / std::sqrt(wn);
    } else {
      out[r] = p[l.b3 + r];
      for (int c = 0; c < d.embedding; ++c) out[r] += p[l.w3 + r * d.embedding + c] * raw[c];
    }
  }
  return out;
}

EmbeddingModel RandomModel(uint64_t seed, double cosine_scale) {
  Rng rng(seed);
  ModelDims dims;
  dims.input = static_cast<int>(rng.UniformInt(3, 12));
  dims.hidden = static_cast<int>(rng.UniformInt(3, 10));
  dims.embedding = static_cast<int>(rng.UniformInt(2, 8));
  dims.classes = static_cast<int>(rng.UniformInt(2, 6));
  dims.cosine_scale = cosine_scale;
  EmbeddingModel m = EmbeddingModel::Random(FeatureConfig{}, dims, seed);
  for (double& b : m.params()) b += 0.1 * rng.Uniform(-1, 1);
  for (auto& v : m.input_mean()) v = rng.Uniform(-1, 1);
  for (auto& v : m.input_scale()) v = rng.Uniform(0.5, 2.0);
  return m;
}

LabeledSet RandomBatch(const EmbeddingModel& m, uint64_t seed, int n = 6) {
  Rng rng(seed);
  LabeledSet b;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(static_cast<size_t>(m.dims().input));
    for (double& v : x) v = rng.Uniform(-2, 2);
    b.inputs.push_back(x);
    b.labels.push_back(static_cast<int>(rng.UniformInt(0, m.dims().classes - 1)));
  }
  return b;
}

class HeadTest : public ::testing::TestWithParam<double> {};

TEST_P(HeadTest, ForwardMatchesOracle) {
  for (uint64_t s = 1; s <= 10; ++s) {
    const EmbeddingModel m = RandomModel(s, GetParam());
    for (const auto& x : RandomBatch(m, s + 50).inputs) {
      std::vector<double> emb;
      const auto logits = OracleLogits(m, x, &emb);
      const ForwardResult f = m.Forward(x);
      double psum = 0.0, enorm = 0.0;
      for (size_t i = 0; i < logits.size(); ++i) {
        EXPECT_NEAR(f.logits[i], logits[i], 1e-12);
        psum += f.posteriors[i];
        EXPECT_GT(f.posteriors[i], 0.0);
      }
      for (size_t i = 0; i < emb.size(); ++i) {
        EXPECT_NEAR(f.embedding[i], emb[i], 1e-12);
        enorm += f.embedding[i] * f.embedding[i];
      }
      EXPECT_NEAR(psum, 1.0, 1e-12);
      EXPECT_NEAR(enorm, 1.0, 1e-12);
    }
  }
}

TEST_P(HeadTest, GradientMatchesFiniteDifferences) {
  for (uint64_t s = 1; s <= 10; ++s) {
    const EmbeddingModel m = RandomModel(s, GetParam());
    const LabeledSet b = RandomBatch(m, s + 100);
    EXPECT_LT(GradCheck(m, b, 1e-4, 0.0, 1000, s), 1e-4) << "seed " << s;
    EXPECT_LT(GradCheck(m, b, 1e-4, 1e-2, 1000, s), 1e-4) << "seed " << s;
  }
}

TEST_P(HeadTest, LossMatchesCrossEntropyOracle) {
  const EmbeddingModel m = RandomModel(4, GetParam());
  const LabeledSet b = RandomBatch(m, 9);
  double expect = 0.0;
  for (size_t i = 0; i < b.size(); ++i) {
    std::vector<double> emb;
    const auto logits = OracleLogits(m, b.inputs[i], &emb);
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    expect += (mx + std::log(z) - logits[static_cast<size_t>(b.labels[i])]) / b.size();
  }
  EXPECT_NEAR(LossAndGradient(m, b, 0.0, nullptr), expect, 1e-12);
  double wd = 0.0;
  for (size_t i = 0; i < m.params().size(); ++i) {
    if (m.IsWeight(i)) wd += 0.5 * 0.3 * m.params()[i] * m.params()[i];
  }
  EXPECT_NEAR(LossAndGradient(m, b, 0.3, nullptr), expect + wd, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Heads, HeadTest, ::testing::Values(0.0, 5.0, 10.0));

TEST(Model, ZeroWeightsGiveUniformPosteriors) {
  ModelDims dims;
  dims.input = 4;
  dims.classes = 5;
  EmbeddingModel m(FeatureConfig{}, dims);
  std::fill(m.params().begin(), m.params().end(), 0.0);
  const auto f = m.Forward(std::vector<double>{1, 2, 3, 4});
  for (double p : f.posteriors) EXPECT_DOUBLE_EQ(p, 0.2);
  EXPECT_EQ(ArgmaxLowest(f.posteriors), 0);
  EXPECT_EQ(CodeOf([&] { m.Forward(std::vector<double>{1, 2}); }), ErrorCode::kDimensionMismatch);
}

TEST(Model, ArgmaxTieTakesLowestIndex) {
  EXPECT_EQ(ArgmaxLowest(std::vector<double>{0.1, 0.4, 0.4, 0.1}), 1);
  EXPECT_EQ(ArgmaxLowest(std::vector<double>{3.0}), 0);
}

TEST(Model, CheckpointRoundTrip) {
  for (double sc : {0.0, 5.0}) {
    const EmbeddingModel m = RandomModel(11, sc);
    const EmbeddingModel back = EmbeddingModel::FromJson(nlohmann::json::parse(m.ToJson().dump()));
    EXPECT_EQ(back, m);
  }
  nlohmann::json j = RandomModel(11, 0.0).ToJson();
  j["format_version"] = 99;
  EXPECT_EQ(CodeOf([&] { EmbeddingModel::FromJson(j); }), ErrorCode::kSchemaVersionMismatch);
}

struct Toy {
  LabeledSet train, val;
};

// Three well-separated Gaussian clusters in 6-d.
Toy ToyData(uint64_t seed) {
  Rng rng(seed);
  Toy t;
  for (int i = 0; i < 90; ++i) {
    const int c = i % 3;
    std::vector<double> x(6);
    for (size_t d = 0; d < 6; ++d) x[d] = (d == static_cast<size_t>(c) ? 3.0 : 0.0) + rng.Uniform(-1, 1);
    LabeledSet& dst = i < 60 ? t.train : t.val;
    dst.inputs.push_back(x);
    dst.labels.push_back(c);
  }
  return t;
}

TEST(Train, DeterministicAndLearns) {
  const Toy t = ToyData(3);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.hidden = 8;
  cfg.embedding_dim = 4;
  cfg.learning_rate = 0.01;
  const TrainResult a = Train(t.train, t.val, 3, FeatureConfig{}, cfg);
  const TrainResult b = Train(t.train, t.val, 3, FeatureConfig{}, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.val_accuracy, b.val_accuracy);
  EXPECT_GE(a.best_val_accuracy, 0.95);
  EXPECT_EQ(a.best_val_accuracy, Accuracy(a.model, t.val));
  cfg.seed = 2;
  EXPECT_NE(Train(t.train, t.val, 3, FeatureConfig{}, cfg).model, a.model);
}

TEST(Train, ZeroLearningRateKeepsInitialWeights) {
  const Toy t = ToyData(4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.hidden = 8;
  cfg.embedding_dim = 4;
  const TrainResult r = Train(t.train, t.val, 3, FeatureConfig{}, cfg);
  ModelDims dims{6, 8, 4, 3, cfg.cosine_scale};
  const EmbeddingModel init =
      EmbeddingModel::Random(FeatureConfig{}, dims, DeriveSeed(cfg.seed, "init"));
  EXPECT_EQ(r.model.params(), init.params());
  EXPECT_EQ(r.best_epoch, 1);
}

TEST(Train, Errors) {
  const Toy t = ToyData(5);
  TrainConfig cfg;
  EXPECT_EQ(CodeOf([&] { Train(t.train, t.val, 2, FeatureConfig{}, cfg); }),
            ErrorCode::kLabelOutOfRange);
  EXPECT_EQ(CodeOf([&] { Train(LabeledSet{}, t.val, 3, FeatureConfig{}, cfg); }),
            ErrorCode::kEmptySet);
  cfg.cosine_scale = -1.0;
  EXPECT_EQ(CodeOf([&] { Validate(cfg); }), ErrorCode::kInvalidArgument);
  TrainConfig c2;
  c2.epochs = 7;
  c2.cosine_scale = 0.0;
  const TrainConfig back = TrainConfigFromJson(ToJson(c2));
  EXPECT_EQ(back.epochs, 7);
  EXPECT_EQ(back.cosine_scale, 0.0);
}

}  // namespace
}  // namespace spkdoor
