#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "lesionbench/balance.hpp"
#include "lesionbench/random.hpp"

namespace lesionbench::nnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;  // empty: softmax regression
  std::size_t num_classes = 3;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// weights: rows = outputs, cols = inputs.
struct DenseLayer {
  Matrix weights;
  Vector bias;
};

// A list of layer-shaped tensors. Used for parameters, gradients and the
// momentum buffer alike.
using LayerTensors = std::vector<DenseLayer>;

class ModelParams {
 public:
  ModelParams() = default;  // no layers, no parameters
  // Throws ShapeError unless the layers chain from input_dim through the
  // hidden dims to num_classes, or ValidationError on non-finite entries.
  ModelParams(Architecture arch, LayerTensors layers);

  static ModelParams zeros(const Architecture& arch);
  // Glorot-uniform weights, U(-s, s) with s = sqrt(6 / (fan_in + fan_out));
  // zero biases.
  static ModelParams glorot(const Architecture& arch, SplitMix64& rng);

  const Architecture& architecture() const noexcept { return arch_; }
  const LayerTensors& layers() const noexcept { return layers_; }
  LayerTensors& mutable_layers() noexcept { return layers_; }
  std::size_t parameter_count() const noexcept;

  nlohmann::json to_json() const;
  static ModelParams from_json(const nlohmann::json& j);

  // Bitwise equality of every entry.
  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  Architecture arch_;
  LayerTensors layers_;
};

struct Gradients {
  LayerTensors layers;
};

struct VelocityState {
  LayerTensors layers;
  static VelocityState zeros_like(const ModelParams& params);
};

struct LabelledSample {
  Vector features;
  std::size_t target = 0;
};

// Per-class loss multipliers indexed by class; an empty span means unweighted.
using LossWeights = std::span<const double>;

inline constexpr double kProbabilityFloor = 1e-12;

// ReLU hidden layers, softmax output with max-subtraction. Throws ShapeError.
Vector forward(const ModelParams& params, const Vector& x);
std::size_t predict(const ModelParams& params, const Vector& x);

// w(target) * -ln(max(probs[target], 1e-12)).
double weighted_cross_entropy(const Vector& probs, std::size_t target, LossWeights weights = {});

// Mean weighted loss over the batch.
double batch_loss(const ModelParams& params, std::span<const LabelledSample> batch,
                  LossWeights weights = {});

// Mean over the batch of per-sample loss gradients. Throws ValidationError on
// an empty batch, ShapeError on a bad feature length.
Gradients gradient(const ModelParams& params, std::span<const LabelledSample> batch,
                   LossWeights weights = {});

// Classic heavy-ball momentum: v <- momentum * v - lr * g; theta <- theta + v.
void sgd_momentum_step(ModelParams& params, VelocityState& velocity, const Gradients& grads,
                       double learning_rate, double momentum);

// Central differences against gradient(); returns the largest
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|) over all
// parameters (0 for a model without parameters).
double finite_difference_check(const ModelParams& params, std::span<const LabelledSample> batch,
                               LossWeights weights, double h);

struct TrainConfig {
  double learning_rate = 0.0001;
  double momentum = 0.9;
  std::size_t epochs = 1000;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::optional<ClassWeights> class_weights;
};

struct EpochStats {
  double train_loss = 0;  // weighted, as optimized
  double train_accuracy = 0;
  double val_loss = 0;  // unweighted
  double val_accuracy = 0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

double accuracy(const ModelParams& params, std::span<const LabelledSample> samples);

// Seeded Glorot init, then per epoch a seeded reshuffle and mini-batch
// steps. arch.input_dim must match the sample features.
TrainResult train(const Architecture& arch, std::span<const LabelledSample> train_set,
                  std::span<const LabelledSample> val_set, const TrainConfig& config);

}  // namespace lesionbench::nnet
