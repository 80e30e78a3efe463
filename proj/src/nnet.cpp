#include "lesionbench/nnet.hpp"

#include <cmath>
#include <numeric>

#include "lesionbench/error.hpp"

namespace lesionbench::nnet {

namespace {

std::vector<std::size_t> layer_widths(const Architecture& arch) {
  std::vector<std::size_t> w{arch.input_dim};
  w.insert(w.end(), arch.hidden_dims.begin(), arch.hidden_dims.end());
  w.push_back(arch.num_classes);
  return w;
}

void softmax_columns(Matrix& z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    auto col = z.col(j);
    const double m = col.maxCoeff();
    col = (col.array() - m).exp();
    col /= col.sum();
  }
}

struct ForwardPass {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre_activation;  // z of each layer
  Matrix probs;                     // num_classes x batch
};

ForwardPass run_forward(const ModelParams& params, const Matrix& x) {
  const auto& layers = params.layers();
  if (layers.empty()) throw ShapeError("model has no layers");
  if (static_cast<std::size_t>(x.rows()) != params.architecture().input_dim) {
    throw ShapeError("feature length " + std::to_string(x.rows()) + " does not match input_dim " +
                     std::to_string(params.architecture().input_dim));
  }
  ForwardPass pass;
  Matrix a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = layers[l].weights * a;
    z.colwise() += layers[l].bias;
    pass.inputs.push_back(std::move(a));
    if (l + 1 < layers.size()) {
      a = z.cwiseMax(0.0);
      pass.pre_activation.push_back(std::move(z));
    } else {
      pass.pre_activation.push_back(z);
      softmax_columns(z);
      pass.probs = std::move(z);
    }
  }
  return pass;
}

double weight_of(LossWeights weights, std::size_t target) {
  if (weights.empty()) return 1.0;
  if (target >= weights.size()) throw ValidationError("no loss weight for class " + std::to_string(target));
  return weights[target];
}

void check_targets(const ModelParams& params, std::span<const std::size_t> targets) {
  for (std::size_t t : targets) {
    if (t >= params.architecture().num_classes) {
      throw ValidationError("target class " + std::to_string(t) + " out of range");
    }
  }
}

Gradients gradient_impl(const ModelParams& params, const Matrix& x, std::span<const std::size_t> targets,
                        LossWeights weights) {
  if (targets.empty()) throw ValidationError("gradient needs a non-empty batch");
  check_targets(params, targets);
  const auto pass = run_forward(params, x);
  const auto& layers = params.layers();
  const auto batch = static_cast<double>(targets.size());

  Matrix delta = pass.probs;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    delta(static_cast<Eigen::Index>(targets[j]), col) -= 1.0;
    delta.col(col) *= weight_of(weights, targets[j]) / batch;
  }

  Gradients g;
  g.layers.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    g.layers[l].weights = delta * pass.inputs[l].transpose();
    g.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct((pass.pre_activation[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

double loss_impl(const ModelParams& params, const Matrix& x, std::span<const std::size_t> targets,
                 LossWeights weights) {
  if (targets.empty()) throw ValidationError("loss needs a non-empty batch");
  check_targets(params, targets);
  const auto pass = run_forward(params, x);
  double sum = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    sum += weighted_cross_entropy(pass.probs.col(static_cast<Eigen::Index>(j)), targets[j], weights);
  }
  return sum / static_cast<double>(targets.size());
}

struct PackedSet {
  Matrix x;
  std::vector<std::size_t> targets;
};

PackedSet pack(std::span<const LabelledSample> samples, std::size_t dim) {
  PackedSet p;
  p.x.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (static_cast<std::size_t>(samples[j].features.size()) != dim) {
      throw ShapeError("sample " + std::to_string(j) + " has " + std::to_string(samples[j].features.size()) +
                       " features, expected " + std::to_string(dim));
    }
    p.x.col(static_cast<Eigen::Index>(j)) = samples[j].features;
    p.targets.push_back(samples[j].target);
  }
  return p;
}

std::size_t dim_of(const ModelParams& params) { return params.architecture().input_dim; }

std::size_t argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

double accuracy_impl(const ModelParams& params, const PackedSet& set) {
  if (set.targets.empty()) return 0.0;
  const auto pass = run_forward(params, set.x);
  std::size_t hits = 0;
  for (std::size_t j = 0; j < set.targets.size(); ++j) {
    hits += argmax(pass.probs.col(static_cast<Eigen::Index>(j))) == set.targets[j];
  }
  return static_cast<double>(hits) / static_cast<double>(set.targets.size());
}

void check_congruent(const LayerTensors& a, const LayerTensors& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": layer count mismatch");
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weights.rows() != b[l].weights.rows() || a[l].weights.cols() != b[l].weights.cols() ||
        a[l].bias.size() != b[l].bias.size()) {
      throw ShapeError(std::string(what) + ": shape mismatch in layer " + std::to_string(l));
    }
  }
}

}  // namespace

ModelParams::ModelParams(Architecture arch, LayerTensors layers)
    : arch_(std::move(arch)), layers_(std::move(layers)) {
  const auto widths = layer_widths(arch_);
  if (layers_.size() != widths.size() - 1) {
    throw ShapeError("expected " + std::to_string(widths.size() - 1) + " layers, got " +
                     std::to_string(layers_.size()));
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (static_cast<std::size_t>(layer.weights.cols()) != widths[l] ||
        static_cast<std::size_t>(layer.weights.rows()) != widths[l + 1] ||
        static_cast<std::size_t>(layer.bias.size()) != widths[l + 1]) {
      throw ShapeError("layer " + std::to_string(l) + " does not chain");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("layer " + std::to_string(l) + " has non-finite entries");
    }
  }
}

ModelParams ModelParams::zeros(const Architecture& arch) {
  if (arch.input_dim == 0 || arch.num_classes == 0) throw ShapeError("degenerate architecture");
  const auto widths = layer_widths(arch);
  LayerTensors layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(widths[l + 1]);
    const auto cols = static_cast<Eigen::Index>(widths[l]);
    layers.push_back({Matrix::Zero(rows, cols), Vector::Zero(rows)});
  }
  return ModelParams(arch, std::move(layers));
}

ModelParams ModelParams::glorot(const Architecture& arch, SplitMix64& rng) {
  ModelParams p = zeros(arch);
  for (auto& layer : p.layers_) {
    const double s = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    // Row-major draw order so the stream does not depend on storage order.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-s, s);
    }
  }
  return p;
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

nlohmann::json ModelParams::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"architecture",
           {{"input_dim", arch_.input_dim}, {"hidden_dims", arch_.hidden_dims}, {"num_classes", arch_.num_classes}}},
          {"layers", layers}};
}

ModelParams ModelParams::from_json(const nlohmann::json& j) {
  try {
    Architecture arch;
    const auto& a = j.at("architecture");
    arch.input_dim = a.at("input_dim").get<std::size_t>();
    arch.hidden_dims = a.at("hidden_dims").get<std::vector<std::size_t>>();
    arch.num_classes = a.at("num_classes").get<std::size_t>();
    LayerTensors layers;
    for (const auto& l : j.at("layers")) {
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      const auto w = l.at("weights").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
        throw ShapeError("layer arrays do not match their declared shape");
      }
      DenseLayer layer{Matrix(rows, cols), Vector(rows)};
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        layer.bias(r) = b[static_cast<std::size_t>(r)];
      }
      layers.push_back(std::move(layer));
    }
    return ModelParams(std::move(arch), std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (!(a.arch_ == b.arch_) || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols()) return false;
    if (!(x.weights.array() == y.weights.array()).all() || !(x.bias.array() == y.bias.array()).all()) {
      return false;
    }
  }
  return true;
}

VelocityState VelocityState::zeros_like(const ModelParams& params) {
  VelocityState v;
  for (const auto& l : params.layers()) {
    v.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
  }
  return v;
}

Vector forward(const ModelParams& params, const Vector& x) {
  const Matrix col = x;
  return run_forward(params, col).probs.col(0);
}

std::size_t predict(const ModelParams& params, const Vector& x) { return argmax(forward(params, x)); }

double weighted_cross_entropy(const Vector& probs, std::size_t target, LossWeights weights) {
  if (target >= static_cast<std::size_t>(probs.size())) {
    throw ValidationError("target class " + std::to_string(target) + " out of range");
  }
  const double p = std::max(probs(static_cast<Eigen::Index>(target)), kProbabilityFloor);
  return weight_of(weights, target) * -std::log(p);
}

double batch_loss(const ModelParams& params, std::span<const LabelledSample> batch, LossWeights weights) {
  const auto packed = pack(batch, dim_of(params));
  return loss_impl(params, packed.x, packed.targets, weights);
}

Gradients gradient(const ModelParams& params, std::span<const LabelledSample> batch, LossWeights weights) {
  if (batch.empty()) throw ValidationError("gradient needs a non-empty batch");
  const auto packed = pack(batch, dim_of(params));
  return gradient_impl(params, packed.x, packed.targets, weights);
}

void sgd_momentum_step(ModelParams& params, VelocityState& velocity, const Gradients& grads,
                       double learning_rate, double momentum) {
  auto& layers = params.mutable_layers();
  check_congruent(layers, velocity.layers, "velocity");
  check_congruent(layers, grads.layers, "gradient");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& v = velocity.layers[l];
    v.weights = momentum * v.weights - learning_rate * grads.layers[l].weights;
    v.bias = momentum * v.bias - learning_rate * grads.layers[l].bias;
    layers[l].weights += v.weights;
    layers[l].bias += v.bias;
  }
}

double finite_difference_check(const ModelParams& params, std::span<const LabelledSample> batch,
                               LossWeights weights, double h) {
  if (params.parameter_count() == 0) return 0.0;
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  const auto packed = pack(batch, dim_of(params));
  const auto analytic = gradient_impl(params, packed.x, packed.targets, weights);

  ModelParams probe = params;
  double worst = 0.0;
  auto compare = [&](double& slot, double a) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss_impl(probe, packed.x, packed.targets, weights);
    slot = saved - h;
    const double down = loss_impl(probe, packed.x, packed.targets, weights);
    slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, err);
  };
  auto& layers = probe.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (Eigen::Index r = 0; r < layers[l].weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layers[l].weights.cols(); ++c) {
        compare(layers[l].weights(r, c), analytic.layers[l].weights(r, c));
      }
      compare(layers[l].bias(r), analytic.layers[l].bias(r));
    }
  }
  return worst;
}

double accuracy(const ModelParams& params, std::span<const LabelledSample> samples) {
  return accuracy_impl(params, pack(samples, dim_of(params)));
}

TrainResult train(const Architecture& arch, std::span<const LabelledSample> train_set,
                  std::span<const LabelledSample> val_set, const TrainConfig& config) {
  if (train_set.empty() || val_set.empty()) throw ValidationError("train and validation sets must be non-empty");
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) throw ValidationError("momentum must lie in [0,1)");
  if (config.batch_size == 0) throw ValidationError("batch size must be positive");

  const PackedSet train_packed = pack(train_set, arch.input_dim);
  const PackedSet val_packed = pack(val_set, arch.input_dim);
  std::vector<double> weights;
  if (config.class_weights) weights = config.class_weights->dense(arch.num_classes);

  SplitMix64 rng(config.seed);
  TrainResult result{ModelParams::glorot(arch, rng), {}};
  auto velocity = VelocityState::zeros_like(result.params);
  check_targets(result.params, train_packed.targets);
  check_targets(result.params, val_packed.targets);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(end));
      const Matrix xb = train_packed.x(Eigen::all, idx);
      std::vector<std::size_t> tb;
      for (std::size_t i : idx) tb.push_back(train_packed.targets[i]);
      const auto g = gradient_impl(result.params, xb, tb, weights);
      sgd_momentum_step(result.params, velocity, g, config.learning_rate, config.momentum);
    }
    EpochStats stats;
    stats.train_loss = loss_impl(result.params, train_packed.x, train_packed.targets, weights);
    stats.train_accuracy = accuracy_impl(result.params, train_packed);
    stats.val_loss = loss_impl(result.params, val_packed.x, val_packed.targets, {});
    stats.val_accuracy = accuracy_impl(result.params, val_packed);
    result.history.epochs.push_back(stats);
  }
  return result;
}

}  // namespace lesionbench::nnet
