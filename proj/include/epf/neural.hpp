#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epf/features.hpp"
#include "epf/matrix.hpp"
#include "epf/transform.hpp"

namespace epf {

enum class Activation { kRelu, kLinear };

struct DenseLayer {
  Matrix w;               // out x in, row-major
  std::vector<double> b;  // out
  Activation act = Activation::kRelu;
  bool trainable = true;
};

// Dense feed-forward net. Hidden layers are ReLU, the output layer is linear.
// The transform parameters of the market whose prices the model predicts are
// carried along so checkpoints are self-contained.
struct MlpModel {
  std::vector<DenseLayer> layers;
  FeatureSpec spec;
  MarketTransforms transforms;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return layers.front().w.cols; }
  std::size_t output_dim() const { return layers.back().w.rows; }
  std::size_t parameter_count() const;

  std::vector<double> forward(std::span<const double> x) const;
  Matrix forward_batch(const Matrix& x) const;
};

// Glorot-uniform weights from a seeded generator, zero biases, all layers
// trainable. dims = {input, hidden..., output}.
MlpModel init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  int max_epochs = 1000;
  int patience = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  // Output-layer-only retraining: reduced learning rate, patience 1.
  static TrainConfig fine_tune_defaults();
};

struct LayerGrads {
  Matrix w;
  std::vector<double> b;
};
using ModelGrads = std::vector<LayerGrads>;

struct AdamState {
  ModelGrads m, v;
  long step = 0;
  static AdamState zeros_like(const MlpModel& model);
};

// Mean absolute error; the subgradient at zero residual is taken as 0.
double loss_mae(std::span<const double> pred, std::span<const double> target);

// Forward + MAE backprop over a batch. Gradients are written for trainable
// layers (and any layer above the deepest trainable one, where propagation
// is required); frozen prefixes are skipped. Returns the batch loss.
double backprop_mae(const MlpModel& model, const Matrix& x, const Matrix& y,
                    ModelGrads& grads);

// One bias-corrected Adam update; frozen layers keep weights and moments.
void adam_step(MlpModel& model, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg);

// MAE of model outputs against targets over a whole sample set.
double evaluate_mae(const MlpModel& model, const SampleSet& set);

// Patience-based stopping on the validation loss: any strict improvement of
// the best value resets the counter. Epochs are 1-based; best_epoch 0 means
// the initial weights were never beaten (relevant when a baseline is seeded).
struct EarlyStopper {
  int patience = 10;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs = 0;
  int since_best = 0;
  bool improved_last = false;

  // Returns true when training should stop after this epoch.
  bool observe(double val_loss) {
    ++epochs;
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epochs;
      since_best = 0;
      improved_last = true;
    } else {
      ++since_best;
      improved_last = false;
    }
    return since_best >= patience;
  }
};

struct TrainTrace {
  std::vector<double> train_loss;  // index e -> epoch e+1
  std::vector<double> val_loss;
  double initial_val_loss = 0.0;  // incoming weights, before any update
  int best_epoch = 0;             // 0 = initial weights restored
  int stopped_epoch = 0;
};

// Mini-batch Adam training with per-epoch seeded reshuffling and early
// stopping; returns the weights of the best validation epoch. The incoming
// model's validation loss participates as the epoch-0 baseline, so the
// returned model never validates worse than the input.
std::pair<MlpModel, TrainTrace> train(MlpModel model, const SampleSet& train_set,
                                      const SampleSet& val_set,
                                      const TrainConfig& cfg);

// Freezes everything but the output layer, then trains with fine-tune
// hyperparameters (overridable through cfg).
std::pair<MlpModel, TrainTrace> fine_tune(
    MlpModel model, const SampleSet& target_train, const SampleSet& target_val,
    const TrainConfig& cfg = TrainConfig::fine_tune_defaults());

// Forward pass followed by the inverse price transform.
std::vector<double> predict_prices(const MlpModel& model,
                                   std::span<const double> input,
                                   const TransformParams& target_params);

void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace epf
