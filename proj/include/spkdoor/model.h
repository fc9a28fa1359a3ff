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

#ifndef SPKDOOR_MODEL_H_
#define SPKDOOR_MODEL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "spkdoor/features.h"
#include "spkdoor/waveform.h"

namespace spkdoor {

struct ModelDims {
  int input = 48;
  int hidden = 64;
  int embedding = 32;
  int classes = 2;
  // > 0: logits are cosine_scale * cos(classifier row, embedding) and the
  // head bias is unused. 0: plain affine head.
  double cosine_scale = 0.0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ForwardResult {
  std::vector<double> hidden;      // tanh activations of the first layer
  std::vector<double> activation;  // tanh penultimate layer, unnormalized
  std::vector<double> embedding;   // activation / ||activation||
  std::vector<double> logits;
  std::vector<double> posteriors;
};

// Pooled features -> standardize -> tanh(W1) -> tanh(W2) -> softmax head.
// The penultimate activation, L2-normalized, is the speaker embedding. The
// head is either affine or cosine (see ModelDims::cosine_scale).
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(const FeatureConfig& features, const ModelDims& dims);

  // Glorot-uniform weights, zero biases, identity standardization.
  static EmbeddingModel Random(const FeatureConfig& features, const ModelDims& dims,
                               uint64_t seed);

  const FeatureConfig& feature_config() const { return features_; }
  const ModelDims& dims() const { return dims_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::vector<double>& input_mean() { return input_mean_; }
  std::vector<double>& input_scale() { return input_scale_; }
  const std::vector<double>& input_mean() const { return input_mean_; }
  const std::vector<double>& input_scale() const { return input_scale_; }

  // Throws DimensionMismatch when pooled.size() != dims().input.
  ForwardResult Forward(std::span<const double> pooled) const;

  // Flat parameter layout: W1 b1 W2 b2 W3 b3, weights row-major (out x in).
  struct Layout {
    size_t w1, b1, w2, b2, w3, b3, total;
  };
  Layout layout() const;

  // True for entries of params() that are weights (regularized), not biases.
  bool IsWeight(size_t index) const;

  nlohmann::json ToJson() const;
  static EmbeddingModel FromJson(const nlohmann::json& j);

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  FeatureConfig features_;
  ModelDims dims_;
  std::vector<double> input_mean_;
  std::vector<double> input_scale_;
  std::vector<double> params_;
};

inline constexpr int kCheckpointFormatVersion = 1;

struct LabeledSet {
  std::vector<std::vector<double>> inputs;  // pooled features
  std::vector<int> labels;

  size_t size() const { return inputs.size(); }
};

// Mean softmax cross-entropy plus 0.5 * weight_decay * sum(W^2). When grad is
// non-null it receives d(loss)/d(params), sized like params().
double LossAndGradient(const EmbeddingModel& model, const LabeledSet& batch,
                       double weight_decay, std::vector<double>* grad);

struct TrainConfig {
  int epochs = 120;
  int batch_size = 32;
  double learning_rate = 0.003;
  uint64_t seed = 1;
  int patience = 30;
  double weight_decay = 1e-4;
  int hidden = 64;
  int embedding_dim = 32;
  double cosine_scale = 5.0;  // 0 selects the affine head
};

void Validate(const TrainConfig& cfg);
nlohmann::json ToJson(const TrainConfig& cfg);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);

struct TrainResult {
  EmbeddingModel model;  // best-validation checkpoint
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<double> val_accuracy;  // one entry per completed epoch
};

// Mini-batch Adam on cross-entropy. Batch order and initialization derive from
// cfg.seed only. The returned checkpoint has the best validation accuracy,
// ties going to the lower validation loss. Throws LabelOutOfRange.
TrainResult Train(const LabeledSet& train, const LabeledSet& val, int n_speakers,
                  const FeatureConfig& features, const TrainConfig& cfg);

// Fraction of correct argmax predictions, in [0, 1].
double Accuracy(const EmbeddingModel& model, const LabeledSet& set);

// Lowest index wins ties.
int ArgmaxLowest(std::span<const double> values);

int Predict(const EmbeddingModel& model, const Waveform& w);
std::vector<double> Embed(const EmbeddingModel& model, const Waveform& w);

// Max relative error between analytic and central-difference gradients over
// `samples` randomly chosen parameters (all of them if fewer exist), as
// |a - n| / max(|a|, |n|, 1e-5).
double GradCheck(const EmbeddingModel& model, const LabeledSet& batch, double h,
                 double weight_decay = 0.0, size_t samples = 100, uint64_t seed = 0);

// Adapter so the metric templates can drive a trained model.
class ModelClassifier {
 public:
  explicit ModelClassifier(const EmbeddingModel& model) : model_(&model) {}
  int Predict(const Waveform& w) const { return spkdoor::Predict(*model_, w); }
  std::vector<double> Embed(const Waveform& w) const { return spkdoor::Embed(*model_, w); }

 private:
  const EmbeddingModel* model_;
};

}  // namespace spkdoor

#endif  // SPKDOOR_MODEL_H_
