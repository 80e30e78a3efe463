#include "lesionbench/balance.hpp"

#include <cmath>

#include "lesionbench/error.hpp"

namespace lesionbench {

using boost::multiprecision::cpp_int;

double to_double_nearest(const Rational& r) {
  if (r == 0) return 0.0;
  const bool negative = r < 0;
  cpp_int p = boost::multiprecision::numerator(r);
  cpp_int q = boost::multiprecision::denominator(r);
  if (negative) p = -p;

  // Find s so that Q = floor(p * 2^s / q) has exactly 53 bits.
  auto quotient = [&](long s, cpp_int& rem) {
    cpp_int num = p;
    cpp_int den = q;
    if (s >= 0) num <<= s;
    else den <<= -s;
    cpp_int quo;
    boost::multiprecision::divide_qr(num, den, quo, rem);
    return std::pair<cpp_int, cpp_int>(quo, den);
  };
  long s = 52 - (static_cast<long>(boost::multiprecision::msb(p)) -
                 static_cast<long>(boost::multiprecision::msb(q)));
  cpp_int rem;
  auto [quo, den] = quotient(s, rem);
  const cpp_int lo = cpp_int(1) << 52;
  if (quo < lo) {
    ++s;
    std::tie(quo, den) = quotient(s, rem);
  }
  const cpp_int twice = rem * 2;
  if (twice > den || (twice == den && (quo & 1) != 0)) ++quo;
  const double mantissa = quo.convert_to<double>();  // <= 2^53, exact
  const double out = std::ldexp(mantissa, static_cast<int>(-s));
  return negative ? -out : out;
}

ClassCounts ClassCounts::from_labels(std::span<const std::size_t> labels) {
  ClassCounts c;
  for (std::size_t l : labels) ++c.counts[l];
  return c;
}

ClassWeights::ClassWeights(std::map<std::size_t, Rational> exact) {
  for (auto& [cls, w] : exact) {
    if (w <= 0) throw ConstraintViolation("class weights must be strictly positive");
    weights_.emplace(cls, ClassWeight{w, to_double_nearest(w)});
  }
}

const ClassWeight& ClassWeights::at(std::size_t cls) const {
  const auto it = weights_.find(cls);
  if (it == weights_.end()) throw ValidationError("no weight for class " + std::to_string(cls));
  return it->second;
}

std::vector<double> ClassWeights::dense(std::size_t num_classes) const {
  std::vector<double> out(num_classes, 1.0);
  for (const auto& [cls, w] : weights_) {
    if (cls < num_classes) out[cls] = w.value;
  }
  return out;
}

nlohmann::json ClassWeights::to_json(std::span<const std::string> class_names) const {
  nlohmann::json values = nlohmann::json::object();
  nlohmann::json exact = nlohmann::json::object();
  for (const auto& [cls, w] : weights_) {
    const std::string name = cls < class_names.size() ? class_names[cls] : std::to_string(cls);
    values[name] = w.value;
    exact[name] = w.exact.str();
  }
  return {{"weights", values}, {"exact", exact}};
}

ClassWeights ClassWeights::from_json(const nlohmann::json& j, std::span<const std::string> class_names) {
  std::map<std::size_t, Rational> exact;
  try {
    for (const auto& [name, text] : j.at("exact").items()) {
      std::size_t cls = class_names.size();
      for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) cls = i;
      }
      if (cls == class_names.size()) throw ValidationError("unknown class '" + name + "' in weights");
      exact.emplace(cls, Rational(text.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed weights JSON: ") + e.what());
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const Error*>(&e) != nullptr) throw;
    throw ValidationError(std::string("malformed exact weight: ") + e.what());
  }
  return ClassWeights(std::move(exact));
}

ClassWeights balancer_weights(const ClassCounts& train, const ClassCounts& test,
                              BalancerReading reading) {
  if (train.counts.empty()) throw ConstraintViolation("training counts are empty");
  for (const auto& [cls, n] : train.counts) {
    if (!test.counts.contains(cls)) {
      throw ConstraintViolation("class " + std::to_string(cls) + " is missing from the test counts");
    }
    if (n == 0) throw ConstraintViolation("class " + std::to_string(cls) + " has zero training samples");
  }
  for (const auto& [cls, n] : test.counts) {
    if (!train.counts.contains(cls)) {
      throw ConstraintViolation("class " + std::to_string(cls) + " is missing from the training counts");
    }
    if (n == 0) throw ConstraintViolation("class " + std::to_string(cls) + " has zero test samples");
  }

  // Majority training class; std::map iterates in class order so the first
  // maximum wins ties.
  std::uint64_t majority = 0;
  for (const auto& [cls, n] : train.counts) {
    if (n > majority) majority = n;
  }

  std::map<std::size_t, Rational> exact;
  for (const auto& [cls, n_train] : train.counts) {
    const cpp_int tr(n_train);
    const cpp_int te(test.counts.at(cls));
    const cpp_int mc(majority);
    if (reading == BalancerReading::Balanced) {
      exact.emplace(cls, Rational(te * mc, tr * tr));
    } else {
      exact.emplace(cls, Rational(te, mc));
    }
  }
  return ClassWeights(std::move(exact));
}

WeightNormalization parse_normalization(const std::string& text) {
  if (text == "none") return WeightNormalization::None;
  if (text == "mean-one") return WeightNormalization::MeanOne;
  if (text == "max-one") return WeightNormalization::MaxOne;
  throw ValidationError("unknown normalization '" + text + "' (none, mean-one, max-one)");
}

std::string to_string(WeightNormalization mode) {
  switch (mode) {
    case WeightNormalization::None: return "none";
    case WeightNormalization::MeanOne: return "mean-one";
    case WeightNormalization::MaxOne: return "max-one";
  }
  return "?";
}

ClassWeights normalize_weights(const ClassWeights& weights, WeightNormalization mode) {
  if (mode == WeightNormalization::None || weights.size() == 0) return weights;
  Rational scale;
  if (mode == WeightNormalization::MeanOne) {
    Rational sum = 0;
    for (const auto& [cls, w] : weights.entries()) sum += w.exact;
    scale = Rational(static_cast<long long>(weights.size())) / sum;
  } else {
    Rational max = 0;
    for (const auto& [cls, w] : weights.entries()) max = w.exact > max ? w.exact : max;
    scale = 1 / max;
  }
  std::map<std::size_t, Rational> exact;
  for (const auto& [cls, w] : weights.entries()) exact.emplace(cls, w.exact * scale);
  return ClassWeights(std::move(exact));
}

}  // namespace lesionbench
