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

#include "spkdoor/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spkdoor/error.h"
#include "spkdoor/rng.h"

namespace spkdoor {

using nlohmann::json;

EmbeddingModel::EmbeddingModel(const FeatureConfig& features, const ModelDims& dims)
    : features_(features), dims_(dims) {
  if (dims.input <= 0 || dims.hidden <= 0 || dims.embedding <= 0 || dims.classes <= 0) {
    Fail(ErrorCode::kInvalidArgument, "model dimensions must be positive");
  }
  if (dims.cosine_scale < 0.0) Fail(ErrorCode::kInvalidArgument, "cosine_scale must be >= 0");
  input_mean_.assign(static_cast<size_t>(dims.input), 0.0);
  input_scale_.assign(static_cast<size_t>(dims.input), 1.0);
  params_.assign(layout().total, 0.0);
}

EmbeddingModel::Layout EmbeddingModel::layout() const {
  const auto in = static_cast<size_t>(dims_.input);
  const auto hid = static_cast<size_t>(dims_.hidden);
  const auto emb = static_cast<size_t>(dims_.embedding);
  const auto cls = static_cast<size_t>(dims_.classes);
  Layout l{};
  l.w1 = 0;
  l.b1 = l.w1 + hid * in;
  l.w2 = l.b1 + hid;
  l.b2 = l.w2 + emb * hid;
  l.w3 = l.b2 + emb;
  l.b3 = l.w3 + cls * emb;
  l.total = l.b3 + cls;
  return l;
}

bool EmbeddingModel::IsWeight(size_t index) const {
  const Layout l = layout();
  return index < l.b1 || (index >= l.w2 && index < l.b2) || (index >= l.w3 && index < l.b3);
}

EmbeddingModel EmbeddingModel::Random(const FeatureConfig& features, const ModelDims& dims,
                                      uint64_t seed) {
  EmbeddingModel m(features, dims);
  Rng rng(seed);
  const Layout l = m.layout();
  auto glorot = [&](size_t offset, int fan_out, int fan_in) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (size_t i = 0; i < static_cast<size_t>(fan_out) * static_cast<size_t>(fan_in); ++i) {
      m.params_[offset + i] = rng.Uniform(-limit, limit);
    }
  };
  glorot(l.w1, dims.hidden, dims.input);
  glorot(l.w2, dims.embedding, dims.hidden);
  glorot(l.w3, dims.classes, dims.embedding);
  return m;
}

namespace {

// out = tanh?(W x + b) for a row-major (rows x cols) W.
void Affine(const double* w, const double* b, std::span<const double> x, size_t rows,
            std::vector<double>& out) {
  out.resize(rows);
  const size_t cols = x.size();
  for (size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = b[r];
    for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

double Norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

void Softmax(std::span<const double> logits, std::vector<double>& out) {
  out.resize(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) z += out[i] = std::exp(logits[i] - mx);
  for (double& p : out) p /= z;
}

}  // namespace

ForwardResult EmbeddingModel::Forward(std::span<const double> pooled) const {
  if (pooled.size() != static_cast<size_t>(dims_.input)) {
    Fail(ErrorCode::kDimensionMismatch, "model expects " + std::to_string(dims_.input) +
                                            " inputs, got " + std::to_string(pooled.size()));
  }
  const Layout l = layout();
  std::vector<double> z(pooled.size());
  for (size_t i = 0; i < z.size(); ++i) z[i] = (pooled[i] - input_mean_[i]) * input_scale_[i];

  ForwardResult r;
  Affine(&params_[l.w1], &params_[l.b1], z, static_cast<size_t>(dims_.hidden), r.hidden);
  for (double& v : r.hidden) v = std::tanh(v);
  Affine(&params_[l.w2], &params_[l.b2], r.hidden, static_cast<size_t>(dims_.embedding),
         r.activation);
  for (double& v : r.activation) v = std::tanh(v);

  const double norm = Norm(r.activation);
  r.embedding = r.activation;
  // An all-zero activation (e.g. a zero-weight model) stays a zero vector.
  if (norm > 0.0) {
    for (double& v : r.embedding) v /= norm;
  }

  if (dims_.cosine_scale > 0.0) {
    const auto emb = static_cast<size_t>(dims_.embedding);
    r.logits.assign(static_cast<size_t>(dims_.classes), 0.0);
    for (size_t c = 0; c < r.logits.size(); ++c) {
      const std::span<const double> row(&params_[l.w3 + c * emb], emb);
      const double row_norm = Norm(row);
      if (row_norm == 0.0) continue;
      double dot = 0.0;
      for (size_t e = 0; e < emb; ++e) dot += row[e] * r.embedding[e];
      r.logits[c] = dims_.cosine_scale * dot / row_norm;
    }
  } else {
    Affine(&params_[l.w3], &params_[l.b3], r.activation, static_cast<size_t>(dims_.classes),
           r.logits);
  }
  Softmax(r.logits, r.posteriors);
  return r;
}

json EmbeddingModel::ToJson() const {
  const Layout l = layout();
  auto matrix = [&](size_t offset, int rows, int cols) {
    json m = json::array();
    for (int r = 0; r < rows; ++r) {
      const auto begin = params_.begin() + static_cast<std::ptrdiff_t>(offset + static_cast<size_t>(r * cols));
      m.push_back(std::vector<double>(begin, begin + cols));
    }
    return m;
  };
  auto vec = [&](size_t offset, int n) {
    const auto begin = params_.begin() + static_cast<std::ptrdiff_t>(offset);
    return std::vector<double>(begin, begin + n);
  };
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["feature_config"] = spkdoor::ToJson(features_);
  j["dims"] = {{"input", dims_.input},
               {"hidden", dims_.hidden},
               {"embedding", dims_.embedding},
               {"classes", dims_.classes},
               {"cosine_scale", dims_.cosine_scale}};
  j["input_mean"] = input_mean_;
  j["input_scale"] = input_scale_;
  j["layers"] = json::array({
      {{"name", "hidden"}, {"activation", "tanh"},
       {"weight", matrix(l.w1, dims_.hidden, dims_.input)}, {"bias", vec(l.b1, dims_.hidden)}},
      {{"name", "embedding"}, {"activation", "tanh"},
       {"weight", matrix(l.w2, dims_.embedding, dims_.hidden)},
       {"bias", vec(l.b2, dims_.embedding)}},
      {{"name", "classifier"}, {"activation", "softmax"},
       {"head", dims_.cosine_scale > 0.0 ? "cosine" : "affine"},
       {"weight", matrix(l.w3, dims_.classes, dims_.embedding)},
       {"bias", vec(l.b3, dims_.classes)}},
  });
  return j;
}

EmbeddingModel EmbeddingModel::FromJson(const json& j) {
  if (j.value("format_version", 0) != kCheckpointFormatVersion) {
    Fail(ErrorCode::kSchemaVersionMismatch, "checkpoint format_version");
  }
  ModelDims dims;
  dims.input = j.at("dims").at("input").get<int>();
  dims.hidden = j.at("dims").at("hidden").get<int>();
  dims.embedding = j.at("dims").at("embedding").get<int>();
  dims.classes = j.at("dims").at("classes").get<int>();
  dims.cosine_scale = j.at("dims").value("cosine_scale", 0.0);
  EmbeddingModel m(FeatureConfigFromJson(j.at("feature_config")), dims);
  m.input_mean_ = j.at("input_mean").get<std::vector<double>>();
  m.input_scale_ = j.at("input_scale").get<std::vector<double>>();
  if (m.input_mean_.size() != static_cast<size_t>(dims.input) ||
      m.input_scale_.size() != static_cast<size_t>(dims.input)) {
    Fail(ErrorCode::kDimensionMismatch, "standardization vectors do not match input size");
  }
  const auto& layers = j.at("layers");
  if (layers.size() != 3) Fail(ErrorCode::kDimensionMismatch, "checkpoint needs 3 layers");
  const Layout l = m.layout();
  const size_t w_off[3] = {l.w1, l.w2, l.w3};
  const size_t b_off[3] = {l.b1, l.b2, l.b3};
  const int rows[3] = {dims.hidden, dims.embedding, dims.classes};
  const int cols[3] = {dims.input, dims.hidden, dims.embedding};
  for (size_t k = 0; k < 3; ++k) {
    const auto w = layers[k].at("weight").get<std::vector<std::vector<double>>>();
    const auto b = layers[k].at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<size_t>(rows[k]) || b.size() != static_cast<size_t>(rows[k])) {
      Fail(ErrorCode::kDimensionMismatch, "layer " + std::to_string(k) + " row count");
    }
    for (size_t r = 0; r < w.size(); ++r) {
      if (w[r].size() != static_cast<size_t>(cols[k])) {
        Fail(ErrorCode::kDimensionMismatch, "layer " + std::to_string(k) + " column count");
      }
      std::copy(w[r].begin(), w[r].end(),
                m.params_.begin() + static_cast<std::ptrdiff_t>(w_off[k] + r * static_cast<size_t>(cols[k])));
    }
    std::copy(b.begin(), b.end(), m.params_.begin() + static_cast<std::ptrdiff_t>(b_off[k]));
  }
  return m;
}

double LossAndGradient(const EmbeddingModel& model, const LabeledSet& batch,
                       double weight_decay, std::vector<double>* grad) {
  if (batch.size() == 0) Fail(ErrorCode::kEmptySet, "empty batch");
  const ModelDims& d = model.dims();
  const auto l = model.layout();
  const auto& p = model.params();
  const auto hid = static_cast<size_t>(d.hidden);
  const auto emb = static_cast<size_t>(d.embedding);
  const auto cls = static_cast<size_t>(d.classes);
  const auto in = static_cast<size_t>(d.input);
  if (grad != nullptr) grad->assign(p.size(), 0.0);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> z(in), d_logit(cls), d_act(emb), d_emb(emb), d_hid(hid);
  for (size_t n = 0; n < batch.size(); ++n) {
    const int label = batch.labels[n];
    if (label < 0 || static_cast<size_t>(label) >= cls) {
      Fail(ErrorCode::kLabelOutOfRange, "label " + std::to_string(label));
    }
    const ForwardResult f = model.Forward(batch.inputs[n]);
    loss -= std::log(std::max(f.posteriors[static_cast<size_t>(label)], 1e-300)) * inv_n;
    if (grad == nullptr) continue;

    auto& g = *grad;
    for (size_t i = 0; i < in; ++i) {
      z[i] = (batch.inputs[n][i] - model.input_mean()[i]) * model.input_scale()[i];
    }
    for (size_t c = 0; c < cls; ++c) {
      d_logit[c] = (f.posteriors[c] - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_n;
    }
    std::fill(d_act.begin(), d_act.end(), 0.0);
    if (d.cosine_scale > 0.0) {
      // logit_c = s * (w_c / |w_c|) . (a / |a|)
      std::fill(d_emb.begin(), d_emb.end(), 0.0);
      for (size_t c = 0; c < cls; ++c) {
        const size_t row = l.w3 + c * emb;
        const double row_norm = Norm(std::span<const double>(&p[row], emb));
        if (row_norm == 0.0) continue;
        double cos = 0.0;
        for (size_t e = 0; e < emb; ++e) cos += p[row + e] * f.embedding[e];
        cos /= row_norm;
        const double k = d.cosine_scale * d_logit[c];
        for (size_t e = 0; e < emb; ++e) {
          const double unit = p[row + e] / row_norm;
          g[row + e] += k * (f.embedding[e] - cos * unit) / row_norm;
          d_emb[e] += k * unit;
        }
      }
      const double act_norm = Norm(f.activation);
      if (act_norm > 0.0) {
        double proj = 0.0;
        for (size_t e = 0; e < emb; ++e) proj += d_emb[e] * f.embedding[e];
        for (size_t e = 0; e < emb; ++e) {
          d_act[e] = (d_emb[e] - proj * f.embedding[e]) / act_norm;
        }
      }
    } else {
      for (size_t c = 0; c < cls; ++c) {
        g[l.b3 + c] += d_logit[c];
        const size_t row = l.w3 + c * emb;
        for (size_t e = 0; e < emb; ++e) {
          g[row + e] += d_logit[c] * f.activation[e];
          d_act[e] += p[row + e] * d_logit[c];
        }
      }
    }
    std::fill(d_hid.begin(), d_hid.end(), 0.0);
    for (size_t e = 0; e < emb; ++e) {
      const double da = d_act[e] * (1.0 - f.activation[e] * f.activation[e]);
      g[l.b2 + e] += da;
      const size_t row = l.w2 + e * hid;
      for (size_t h = 0; h < hid; ++h) {
        g[row + h] += da * f.hidden[h];
        d_hid[h] += p[row + h] * da;
      }
    }
    for (size_t h = 0; h < hid; ++h) {
      const double dh = d_hid[h] * (1.0 - f.hidden[h] * f.hidden[h]);
      g[l.b1 + h] += dh;
      const size_t row = l.w1 + h * in;
      for (size_t i = 0; i < in; ++i) g[row + i] += dh * z[i];
    }
  }

  if (weight_decay != 0.0) {
    for (size_t i = 0; i < p.size(); ++i) {
      if (!model.IsWeight(i)) continue;
      loss += 0.5 * weight_decay * p[i] * p[i];
      if (grad != nullptr) (*grad)[i] += weight_decay * p[i];
    }
  }
  return loss;
}

void Validate(const TrainConfig& cfg) {
  if (cfg.epochs <= 0 || cfg.batch_size <= 0 || cfg.patience <= 0 || cfg.hidden <= 0 ||
      cfg.embedding_dim <= 0) {
    Fail(ErrorCode::kInvalidArgument, "train config counts must be positive");
  }
  if (cfg.learning_rate < 0.0 || cfg.weight_decay < 0.0 || cfg.cosine_scale < 0.0) {
    Fail(ErrorCode::kInvalidArgument, "learning rate, weight decay and cosine scale must be >= 0");
  }
}

json ToJson(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"seed", cfg.seed},
          {"patience", cfg.patience},
          {"weight_decay", cfg.weight_decay},
          {"hidden", cfg.hidden},
          {"embedding_dim", cfg.embedding_dim},
          {"cosine_scale", cfg.cosine_scale}};
}

TrainConfig TrainConfigFromJson(const json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.patience = j.value("patience", cfg.patience);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
  cfg.cosine_scale = j.value("cosine_scale", cfg.cosine_scale);
  Validate(cfg);
  return cfg;
}

int ArgmaxLowest(std::span<const double> values) {
  if (values.empty()) Fail(ErrorCode::kEmptySet, "argmax of nothing");
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

double Accuracy(const EmbeddingModel& model, const LabeledSet& set) {
  if (set.size() == 0) Fail(ErrorCode::kEmptySet, "accuracy of an empty set");
  size_t correct = 0;
  for (size_t i = 0; i < set.size(); ++i) {
    if (ArgmaxLowest(model.Forward(set.inputs[i]).posteriors) == set.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

TrainResult Train(const LabeledSet& train, const LabeledSet& val, int n_speakers,
                  const FeatureConfig& features, const TrainConfig& cfg) {
  Validate(cfg);
  if (train.size() == 0) Fail(ErrorCode::kEmptySet, "empty training set");
  if (val.size() == 0) Fail(ErrorCode::kEmptySet, "empty validation set");
  for (const auto* set : {&train, &val}) {
    for (int label : set->labels) {
      if (label < 0 || label >= n_speakers) {
        Fail(ErrorCode::kLabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                              std::to_string(n_speakers) + ")");
      }
    }
  }

  ModelDims dims;
  dims.input = static_cast<int>(train.inputs.front().size());
  dims.hidden = cfg.hidden;
  dims.embedding = cfg.embedding_dim;
  dims.classes = n_speakers;
  dims.cosine_scale = cfg.cosine_scale;
  EmbeddingModel model = EmbeddingModel::Random(features, dims, DeriveSeed(cfg.seed, "init"));

  // Standardize with training-set statistics.
  const auto in = static_cast<size_t>(dims.input);
  auto& mean = model.input_mean();
  auto& scale = model.input_scale();
  std::fill(mean.begin(), mean.end(), 0.0);
  for (const auto& x : train.inputs) {
    for (size_t i = 0; i < in; ++i) mean[i] += x[i];
  }
  for (double& m : mean) m /= static_cast<double>(train.size());
  std::vector<double> var(in, 0.0);
  for (const auto& x : train.inputs) {
    for (size_t i = 0; i < in; ++i) var[i] += (x[i] - mean[i]) * (x[i] - mean[i]);
  }
  for (size_t i = 0; i < in; ++i) {
    scale[i] = 1.0 / std::max(std::sqrt(var[i] / static_cast<double>(train.size())), 1e-6);
  }

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto& params = model.params();
  std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0), grad;
  Rng order_rng(DeriveSeed(cfg.seed, "batches"));
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainResult result;
  result.model = model;
  result.best_val_accuracy = -1.0;
  long step = 0;
  int since_best = 0;
  double best_val_loss = 0.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Shuffle(order, order_rng);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      LabeledSet batch;
      for (size_t i = start; i < end; ++i) {
        batch.inputs.push_back(train.inputs[order[i]]);
        batch.labels.push_back(train.labels[order[i]]);
      }
      LossAndGradient(model, batch, cfg.weight_decay, &grad);
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (size_t i = 0; i < params.size(); ++i) {
        m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * grad[i];
        m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        params[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + kEps);
      }
    }
    const double acc = Accuracy(model, val);
    const double val_loss = LossAndGradient(model, val, 0.0, nullptr);
    result.val_accuracy.push_back(acc);
    if (acc > result.best_val_accuracy ||
        (acc == result.best_val_accuracy && val_loss < best_val_loss)) {
      result.best_val_accuracy = acc;
      best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

int Predict(const EmbeddingModel& model, const Waveform& w) {
  return ArgmaxLowest(model.Forward(PooledFeatures(w, model.feature_config())).posteriors);
}

std::vector<double> Embed(const EmbeddingModel& model, const Waveform& w) {
  return model.Forward(PooledFeatures(w, model.feature_config())).embedding;
}

double GradCheck(const EmbeddingModel& model, const LabeledSet& batch, double h,
                 double weight_decay, size_t samples, uint64_t seed) {
  constexpr double kGradCheckFloor = 1e-5;
  if (!(h > 0.0)) Fail(ErrorCode::kInvalidArgument, "finite-difference step must be positive");
  std::vector<double> analytic;
  LossAndGradient(model, batch, weight_decay, &analytic);

  std::vector<size_t> index(analytic.size());
  std::iota(index.begin(), index.end(), size_t{0});
  if (samples < index.size()) {
    Rng rng(seed);
    Shuffle(index, rng);
    index.resize(samples);
  }

  EmbeddingModel probe = model;
  double worst = 0.0;
  for (size_t i : index) {
    const double saved = probe.params()[i];
    probe.params()[i] = saved + h;
    const double up = LossAndGradient(probe, batch, weight_decay, nullptr);
    probe.params()[i] = saved - h;
    const double down = LossAndGradient(probe, batch, weight_decay, nullptr);
    probe.params()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    // The floor keeps round-off in near-zero gradients from dominating.
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace spkdoor
