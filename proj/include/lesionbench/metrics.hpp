#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace lesionbench {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes);
  // Row-major cells; throws ValidationError unless cells.size() == n*n.
  ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> cells);

  std::size_t num_classes() const noexcept { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return cells_.at(truth * n_ + pred); }
  void add(std::size_t truth, std::size_t pred, std::uint64_t count = 1);
  std::uint64_t total() const noexcept;

  std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
  std::uint64_t false_positives(std::size_t c) const;  // column sum minus diagonal
  std::uint64_t false_negatives(std::size_t c) const;  // row sum minus diagonal
  std::uint64_t trace() const noexcept;

  const std::vector<std::uint64_t>& cells() const noexcept { return cells_; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> cells_;
};

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                          std::size_t num_classes);

// 100 * mean over classes of TP / (TP + FP + FN); a class with an empty
// denominator contributes 0.
double jaccard_macro(const ConfusionMatrix& cm);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  friend bool operator==(const Prf&, const Prf&) = default;
};

enum class Averaging { PerClass, Micro, Macro };

// PerClass returns one entry per class; Micro and Macro return one entry.
// Ratios with a zero denominator are 0. F1 is 2TP / (2TP + FP + FN), the
// harmonic mean written over counts.
std::vector<Prf> prf(const ConfusionMatrix& cm, Averaging averaging);

struct ClassMetrics {
  double jaccard = 0;  // fraction, not percent
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::vector<std::string> class_names;
  double jaccard_macro_percent = 0;
  double accuracy = 0;
  std::vector<ClassMetrics> per_class;
  Prf micro;
  Prf macro;

  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& j);
  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

EvaluationReport evaluate(const ConfusionMatrix& cm, std::vector<std::string> class_names);

}  // namespace lesionbench
