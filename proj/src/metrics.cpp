#include "lesionbench/metrics.hpp"

#include <numeric>

#include "lesionbench/error.hpp"

namespace lesionbench {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("confusion matrix is empty");
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : n_(num_classes), cells_(num_classes * num_classes, 0) {}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> cells)
    : n_(num_classes), cells_(std::move(cells)) {
  if (cells_.size() != n_ * n_) throw ValidationError("confusion matrix cell count does not match class count");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t count) {
  if (truth >= n_ || pred >= n_) throw ValidationError("class index out of range");
  cells_[truth * n_ + pred] += count;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(cells_.begin(), cells_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += t == c ? 0 : at(t, c);
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += p == c ? 0 : at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < n_; ++c) s += cells_[c * n_ + c];
  return s;
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                          std::size_t num_classes) {
  if (truth.size() != pred.size()) throw ValidationError("truth and prediction lengths differ");
  if (truth.empty()) throw ValidationError("nothing to evaluate");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
  return cm;
}

double jaccard_macro(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  double sum = 0.0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto tp = cm.true_positives(c);
    sum += ratio(tp, tp + cm.false_positives(c) + cm.false_negatives(c));
  }
  return 100.0 * sum / static_cast<double>(cm.num_classes());
}

std::vector<Prf> prf(const ConfusionMatrix& cm, Averaging averaging) {
  require_nonempty(cm);
  const std::size_t n = cm.num_classes();
  if (averaging == Averaging::Micro) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t c = 0; c < n; ++c) {
      tp += cm.true_positives(c);
      fp += cm.false_positives(c);
      fn += cm.false_negatives(c);
    }
    return {Prf{ratio(tp, tp + fp), ratio(tp, tp + fn), ratio(2 * tp, 2 * tp + fp + fn)}};
  }
  std::vector<Prf> per_class;
  for (std::size_t c = 0; c < n; ++c) {
    const auto tp = cm.true_positives(c);
    const auto fp = cm.false_positives(c);
    const auto fn = cm.false_negatives(c);
    per_class.push_back({ratio(tp, tp + fp), ratio(tp, tp + fn), ratio(2 * tp, 2 * tp + fp + fn)});
  }
  if (averaging == Averaging::PerClass) return per_class;
  Prf macro;
  for (const auto& p : per_class) {
    macro.precision += p.precision;
    macro.recall += p.recall;
    macro.f1 += p.f1;
  }
  const auto denom = static_cast<double>(n);
  macro.precision /= denom;
  macro.recall /= denom;
  macro.f1 /= denom;
  return {macro};
}

EvaluationReport evaluate(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  if (class_names.size() != cm.num_classes()) throw ValidationError("class names do not match the matrix");
  EvaluationReport r;
  r.confusion = cm;
  r.class_names = std::move(class_names);
  r.jaccard_macro_percent = jaccard_macro(cm);
  r.accuracy = ratio(cm.trace(), cm.total());
  const auto per = prf(cm, Averaging::PerClass);
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto tp = cm.true_positives(c);
    r.per_class.push_back(
        {ratio(tp, tp + cm.false_positives(c) + cm.false_negatives(c)), per[c].precision, per[c].recall, per[c].f1});
  }
  r.micro = prf(cm, Averaging::Micro).front();
  r.macro = prf(cm, Averaging::Macro).front();
  return r;
}

namespace {

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

Prf prf_from(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < confusion.num_classes(); ++t) {
    std::vector<std::uint64_t> row;
    for (std::size_t p = 0; p < confusion.num_classes(); ++p) row.push_back(confusion.at(t, p));
    rows.push_back(row);
  }
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    per.push_back({{"class", class_names[c]},
                   {"jaccard", per_class[c].jaccard},
                   {"precision", per_class[c].precision},
                   {"recall", per_class[c].recall},
                   {"f1", per_class[c].f1}});
  }
  return {{"classes", class_names},
          {"confusion", rows},
          {"jaccard_macro_percent", jaccard_macro_percent},
          {"accuracy", accuracy},
          {"per_class", per},
          {"micro", prf_json(micro)},
          {"macro", prf_json(macro)}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    const std::size_t n = r.class_names.size();
    std::vector<std::uint64_t> cells;
    const auto& rows = j.at("confusion");
    if (rows.size() != n) throw ValidationError("confusion rows do not match class count");
    for (const auto& row : rows) {
      const auto v = row.get<std::vector<std::uint64_t>>();
      if (v.size() != n) throw ValidationError("confusion row length does not match class count");
      cells.insert(cells.end(), v.begin(), v.end());
    }
    r.confusion = ConfusionMatrix(n, std::move(cells));
    r.jaccard_macro_percent = j.at("jaccard_macro_percent").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    for (const auto& c : j.at("per_class")) {
      r.per_class.push_back({c.at("jaccard").get<double>(), c.at("precision").get<double>(),
                             c.at("recall").get<double>(), c.at("f1").get<double>()});
    }
    r.micro = prf_from(j.at("micro"));
    r.macro = prf_from(j.at("macro"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed evaluation report: ") + e.what());
  }
}

}  // namespace lesionbench
