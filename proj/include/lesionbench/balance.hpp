#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

namespace lesionbench {

using Rational = boost::multiprecision::cpp_rational;

// Correctly rounded (round-to-nearest-even) conversion of an exact rational.
double to_double_nearest(const Rational& r);

// Per-class sample counts keyed by class index. A key that is present means
// the class exists on that side of the split.
struct ClassCounts {
  std::map<std::size_t, std::uint64_t> counts;

  static ClassCounts from_labels(std::span<const std::size_t> labels);
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ClassWeight {
  Rational exact;
  double value = 0.0;  // to_double_nearest(exact)
  friend bool operator==(const ClassWeight&, const ClassWeight&) = default;
};

class ClassWeights {
 public:
  ClassWeights() = default;
  explicit ClassWeights(std::map<std::size_t, Rational> exact);

  const std::map<std::size_t, ClassWeight>& entries() const noexcept { return weights_; }
  const ClassWeight& at(std::size_t cls) const;
  bool contains(std::size_t cls) const { return weights_.contains(cls); }
  std::size_t size() const noexcept { return weights_.size(); }

  // Loss-side view: one double per class index in [0, num_classes); classes
  // without a weight get 1.
  std::vector<double> dense(std::size_t num_classes) const;

  // {"weights":{"benign":0.5,...},"exact":{"benign":"1/2",...}}
  nlohmann::json to_json(std::span<const std::string> class_names) const;
  static ClassWeights from_json(const nlohmann::json& j, std::span<const std::string> class_names);

  friend bool operator==(const ClassWeights&, const ClassWeights&) = default;

 private:
  std::map<std::size_t, ClassWeight> weights_;
};

enum class BalancerReading {
  // weight(C) = test(C)/train(C) * MC/train(C): inverse training frequency
  // times the train->test ratio.
  Balanced,
  // Alternating "divide X into Y" reading of both steps:
  // weight(C) = test(C)/train(C) * train(C)/MC = test(C)/MC.
  Literal,
};

// Class-and-distribution balancer. MC is the largest training count, ties
// resolved towards the lowest class index. Throws ConstraintViolation when a
// class appears on only one side or has a zero count.
ClassWeights balancer_weights(const ClassCounts& train, const ClassCounts& test,
                              BalancerReading reading = BalancerReading::Balanced);

enum class WeightNormalization { None, MeanOne, MaxOne };

WeightNormalization parse_normalization(const std::string& text);  // none|mean-one|max-one
std::string to_string(WeightNormalization mode);

// Rescales by an exact rational factor; ratios between classes are preserved.
ClassWeights normalize_weights(const ClassWeights& weights, WeightNormalization mode);

}  // namespace lesionbench
