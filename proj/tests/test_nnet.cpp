#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lesionbench/error.hpp"
#include "lesionbench/nnet.hpp"

using namespace lesionbench;
using namespace lesionbench::nnet;

namespace {

std::vector<LabelledSample> random_batch(SplitMix64& rng, std::size_t n, std::size_t dim, std::size_t classes) {
  std::vector<LabelledSample> b;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(static_cast<Eigen::Index>(dim));
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    b.push_back({x, static_cast<std::size_t>(rng.below(classes))});
  }
  return b;
}

ModelParams random_model(SplitMix64& rng, const Architecture& arch) {
  ModelParams p = ModelParams::glorot(arch, rng);
  for (auto& l : p.mutable_layers()) {
    for (auto& v : l.bias) v = rng.uniform(-0.5, 0.5);
  }
  return p;
}

// Two 2-D blobs, at (-2,-2) and (2,2) with unit noise; labels 0/1.
std::vector<LabelledSample> blobs(SplitMix64& rng, std::size_t per_class) {
  std::vector<LabelledSample> out;
  for (std::size_t c = 0; c < 2; ++c) {
    const double centre = c == 0 ? -2.0 : 2.0;
    for (std::size_t i = 0; i < per_class; ++i) {
      Vector x(2);
      x << centre + 0.5 * rng.normal(), centre + 0.5 * rng.normal();
      out.push_back({x, c});
    }
  }
  return out;
}

// Rosenblatt perceptron with bias; returns training accuracy after it stops
// making mistakes or hits the epoch cap.
double perceptron_accuracy(const std::vector<LabelledSample>& data, int max_epochs) {
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  for (int e = 0; e < max_epochs; ++e) {
    int mistakes = 0;
    for (const auto& s : data) {
      const Eigen::Vector3d x(s.features(0), s.features(1), 1.0);
      const double y = s.target == 1 ? 1.0 : -1.0;
      if (y * w.dot(x) <= 0) {
        w += y * x;
        ++mistakes;
      }
    }
    if (mistakes == 0) break;
  }
  int hits = 0;
  for (const auto& s : data) {
    const Eigen::Vector3d x(s.features(0), s.features(1), 1.0);
    hits += (w.dot(x) > 0) == (s.target == 1);
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("zero model yields the uniform distribution") {
  const auto p = ModelParams::zeros({4, {}, 3});
  Vector x(4);
  x << 1, -2, 3, 0.5;
  const Vector probs = forward(p, x);
  for (int i = 0; i < 3; ++i) CHECK(probs(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto deep = ModelParams::zeros({4, {5, 2}, 3});
  CHECK(forward(deep, x).isApprox(Vector::Constant(3, 1.0 / 3.0)));
}

TEST_CASE("crafted logits (0, 0, ln 2) give (1/4, 1/4, 1/2)") {
  auto p = ModelParams::zeros({1, {}, 3});
  p.mutable_layers()[0].bias << 0.0, 0.0, std::log(2.0);
  const Vector probs = forward(p, Vector::Constant(1, 7.0));
  CHECK(probs(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(probs(1) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(probs(2) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("wrong feature length is a shape error") {
  const auto p = ModelParams::zeros({4, {}, 3});
  CHECK_THROWS_AS(forward(p, Vector::Zero(3)), ShapeError);
  CHECK_THROWS_AS(forward(ModelParams{}, Vector::Zero(3)), ShapeError);
}

TEST_CASE("softmax outputs are positive and sum to one") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + rng.below(12);
    const Architecture arch{dim, rng.below(2) ? std::vector<std::size_t>{1 + rng.below(8)} : std::vector<std::size_t>{}, 2 + rng.below(4)};
    const auto p = random_model(rng, arch);
    Vector x(static_cast<Eigen::Index>(dim));
    for (auto& v : x) v = rng.uniform(-5, 5);
    const Vector probs = forward(p, x);
    REQUIRE(static_cast<std::size_t>(probs.size()) == arch.num_classes);
    CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
    CHECK((probs.array() > 0.0).all());
    CHECK((probs.array() < 1.0).all());
  }
}

TEST_CASE("weighted cross entropy values") {
  const Vector uniform = Vector::Constant(3, 1.0 / 3.0);
  CHECK(weighted_cross_entropy(uniform, 1) == doctest::Approx(std::log(3.0)));
  Vector sure(3);
  sure << 0, 1, 0;
  CHECK(weighted_cross_entropy(sure, 1) == 0.0);
  CHECK(weighted_cross_entropy(sure, 0) == doctest::Approx(-std::log(1e-12)));
  Vector half(3);
  half << 0.25, 0.5, 0.25;
  const std::vector<double> w = {1.0, 4.4, 1.0};
  CHECK(weighted_cross_entropy(half, 1, w) == doctest::Approx(4.4 * std::numbers::ln2).epsilon(1e-14));
  CHECK(weighted_cross_entropy(half, 1, w) == doctest::Approx(3.0498).epsilon(1e-4));
}

TEST_CASE("batch loss is non-negative and zero only at certainty") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_model(rng, {3, {4}, 3});
    const auto batch = random_batch(rng, 1 + rng.below(6), 3, 3);
    CHECK(batch_loss(p, batch) > 0.0);
  }
  auto p = ModelParams::zeros({1, {}, 3});
  p.mutable_layers()[0].bias << 0, 800, 0;
  const std::vector<LabelledSample> batch = {{Vector::Zero(1), 1}};
  CHECK(batch_loss(p, batch) == 0.0);
}

TEST_CASE("softmax-only gradient is w(t) * (p - onehot) at the logits") {
  SplitMix64 rng(3);
  const auto p = random_model(rng, {3, {}, 3});
  const auto batch = random_batch(rng, 1, 3, 3);
  const std::vector<double> w = {0.5, 4.4, 1.3};
  const auto g = gradient(p, batch, w);
  Vector expected = forward(p, batch[0].features);
  expected(static_cast<Eigen::Index>(batch[0].target)) -= 1.0;
  expected *= w[batch[0].target];
  CHECK((g.layers[0].bias - expected).cwiseAbs().maxCoeff() < 1e-15);
  const Matrix outer = expected * batch[0].features.transpose();
  CHECK((g.layers[0].weights - outer).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("duplicating a batch leaves the mean gradient unchanged") {
  SplitMix64 rng(4);
  const auto p = random_model(rng, {5, {4}, 3});
  const auto batch = random_batch(rng, 3, 5, 3);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto a = gradient(p, batch);
  const auto b = gradient(p, doubled);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK((a.layers[l].weights - b.layers[l].weights).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((a.layers[l].bias - b.layers[l].bias).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(gradient(p, std::span<const LabelledSample>{}), ValidationError);
}

TEST_CASE("analytic gradient matches central finite differences") {
  SplitMix64 rng(12);
  SUBCASE("4 -> 3, batch of 2") {
    const auto p = random_model(rng, {4, {}, 3});
    const auto batch = random_batch(rng, 2, 4, 3);
    CHECK(finite_difference_check(p, batch, {}, 1e-6) < 1e-5);
  }
  SUBCASE("softmax-only 3 features, one sample, weighted and unweighted") {
    const auto p = random_model(rng, {3, {}, 3});
    const auto batch = random_batch(rng, 1, 3, 3);
    const std::vector<double> w = {0.5, 4.4, 1320.0 / 961.0};
    CHECK(finite_difference_check(p, batch, {}, 1e-6) < 1e-5);
    CHECK(finite_difference_check(p, batch, w, 1e-6) < 1e-5);
  }
  SUBCASE("hidden layer") {
    const auto p = random_model(rng, {6, {5}, 3});
    const auto batch = random_batch(rng, 4, 6, 3);
    CHECK(finite_difference_check(p, batch, {}, 1e-6) < 1e-5);
  }
  SUBCASE("model without parameters") {
    CHECK(finite_difference_check(ModelParams{}, {}, {}, 1e-6) == 0.0);
  }
}

TEST_CASE("uniform class weight kappa scales the gradient by kappa") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_model(rng, {4, {3}, 3});
    const auto batch = random_batch(rng, 1 + rng.below(5), 4, 3);
    const double kappa = rng.uniform(0.1, 5.0);
    const std::vector<double> w(3, kappa);
    const auto a = gradient(p, batch);
    const auto b = gradient(p, batch, w);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      CHECK((kappa * a.layers[l].weights - b.layers[l].weights).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((kappa * a.layers[l].bias - b.layers[l].bias).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("sgd with momentum") {
  auto make = [](double theta) {
    auto p = ModelParams::zeros({1, {}, 1});
    p.mutable_layers()[0].weights(0, 0) = theta;
    return p;
  };
  auto grad_of = [](double g) {
    Gradients gr;
    gr.layers.push_back({Matrix::Constant(1, 1, g), Vector::Zero(1)});
    return gr;
  };
  SUBCASE("zero gradient and velocity leave params unchanged") {
    auto p = make(0.7);
    auto v = VelocityState::zeros_like(p);
    sgd_momentum_step(p, v, grad_of(0.0), 0.1, 0.9);
    CHECK(p.layers()[0].weights(0, 0) == 0.7);
  }
  SUBCASE("single step") {
    auto p = make(0.0);
    auto v = VelocityState::zeros_like(p);
    sgd_momentum_step(p, v, grad_of(1.0), 0.1, 0.9);
    CHECK(p.layers()[0].weights(0, 0) == doctest::Approx(-0.1));
    CHECK(v.layers[0].weights(0, 0) == doctest::Approx(-0.1));
  }
  SUBCASE("two steps accumulate -0.1 - 0.19") {
    auto p = make(0.0);
    auto v = VelocityState::zeros_like(p);
    sgd_momentum_step(p, v, grad_of(1.0), 0.1, 0.9);
    sgd_momentum_step(p, v, grad_of(1.0), 0.1, 0.9);
    CHECK(p.layers()[0].weights(0, 0) == doctest::Approx(-0.29).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    auto p = make(0.0);
    auto v = VelocityState::zeros_like(ModelParams::zeros({2, {}, 1}));
    CHECK_THROWS_AS(sgd_momentum_step(p, v, grad_of(1.0), 0.1, 0.9), ShapeError);
  }
}

TEST_CASE("training separates linearly separable blobs") {
  SplitMix64 rng(31);
  const auto train_set = blobs(rng, 50);
  const auto val_set = blobs(rng, 20);
  REQUIRE(perceptron_accuracy(train_set, 1000) == 1.0);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 50;
  cfg.seed = 9;
  const auto result = train({2, {}, 2}, train_set, val_set, cfg);
  REQUIRE(result.history.epochs.size() == 50);
  CHECK(result.history.epochs.back().train_accuracy >= 0.95);
  CHECK(accuracy(result.params, val_set) >= 0.95);
  CHECK(result.history.epochs.back().train_loss < result.history.epochs.front().train_loss);
}

TEST_CASE("training defaults and determinism") {
  const TrainConfig defaults;
  CHECK(defaults.learning_rate == 0.0001);
  CHECK(defaults.momentum == 0.9);
  CHECK(defaults.batch_size == 16);

  SplitMix64 rng(41);
  const auto data = random_batch(rng, 40, 5, 3);
  const auto val = random_batch(rng, 10, 5, 3);
  TrainConfig cfg;
  cfg.seed = 77;
  cfg.epochs = 0;
  const auto none = train({5, {4}, 3}, data, val, cfg);
  CHECK(none.history.epochs.empty());
  SplitMix64 init(77);
  CHECK(none.params == ModelParams::glorot({5, {4}, 3}, init));

  cfg.epochs = 15;
  cfg.learning_rate = 0.05;
  const auto a = train({5, {4}, 3}, data, val, cfg);
  const auto b = train({5, {4}, 3}, data, val, cfg);
  CHECK(a.history == b.history);
  CHECK(a.params == b.params);
  cfg.seed = 78;
  CHECK_FALSE(train({5, {4}, 3}, data, val, cfg).params == a.params);

  CHECK_THROWS_AS(train({5, {}, 3}, {}, val, cfg), ValidationError);
  CHECK_THROWS_AS(train({4, {}, 3}, data, val, cfg), ShapeError);
}

TEST_CASE("model JSON round trip is exact") {
  SplitMix64 rng(2);
  const auto p = random_model(rng, {3, {4}, 3});
  const auto text = p.to_json().dump();
  const auto back = ModelParams::from_json(nlohmann::json::parse(text));
  CHECK(back == p);
  auto broken = p.to_json();
  broken["layers"][0]["rows"] = 7;
  CHECK_THROWS_AS(ModelParams::from_json(broken), ShapeError);
}
