#include <cstdio>
#include <fstream>
#include <sstream>

#include "lesionbench/error.hpp"
#include "lesionbench/harness.hpp"

namespace lesionbench {

namespace {

using nlohmann::json;

json counts_json(const ClassCounts& counts, const std::vector<std::string>& names) {
  json j = json::object();
  for (const auto& [cls, n] : counts.counts) j[cls < names.size() ? names[cls] : std::to_string(cls)] = n;
  return j;
}

ClassCounts counts_from(const json& j, const std::vector<std::string>& names) {
  ClassCounts c;
  for (const auto& [name, n] : j.items()) {
    std::size_t cls = names.size();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) cls = i;
    }
    if (cls == names.size()) throw ValidationError("unknown class '" + name + "' in counts");
    c.counts[cls] = n.get<std::uint64_t>();
  }
  return c;
}

json prf_json(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }
Prf prf_from(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

json averaged_json(const AveragedReport& a) {
  json per = json::array();
  for (std::size_t c = 0; c < a.per_class.size(); ++c) {
    per.push_back({{"class", a.class_names[c]},
                   {"jaccard", a.per_class[c].jaccard},
                   {"precision", a.per_class[c].precision},
                   {"recall", a.per_class[c].recall},
                   {"f1", a.per_class[c].f1}});
  }
  json pooled = json::array();
  for (std::size_t t = 0; t < a.pooled_confusion.num_classes(); ++t) {
    std::vector<std::uint64_t> row;
    for (std::size_t p = 0; p < a.pooled_confusion.num_classes(); ++p) row.push_back(a.pooled_confusion.at(t, p));
    pooled.push_back(row);
  }
  return {{"classes", a.class_names},
          {"jaccard_macro_percent", a.jaccard_macro_percent},
          {"accuracy", a.accuracy},
          {"per_class", per},
          {"micro", prf_json(a.micro)},
          {"macro", prf_json(a.macro)},
          {"pooled_confusion", pooled}};
}

AveragedReport averaged_from(const json& j) {
  AveragedReport a;
  a.class_names = j.at("classes").get<std::vector<std::string>>();
  a.jaccard_macro_percent = j.at("jaccard_macro_percent").get<double>();
  a.accuracy = j.at("accuracy").get<double>();
  for (const auto& c : j.at("per_class")) {
    a.per_class.push_back({c.at("jaccard").get<double>(), c.at("precision").get<double>(),
                           c.at("recall").get<double>(), c.at("f1").get<double>()});
  }
  a.micro = prf_from(j.at("micro"));
  a.macro = prf_from(j.at("macro"));
  std::vector<std::uint64_t> cells;
  for (const auto& row : j.at("pooled_confusion")) {
    const auto v = row.get<std::vector<std::uint64_t>>();
    cells.insert(cells.end(), v.begin(), v.end());
  }
  a.pooled_confusion = ConfusionMatrix(a.class_names.size(), std::move(cells));
  return a;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

json to_json(const RunResult& result) {
  json folds = json::array();
  for (const auto& f : result.folds) {
    const auto& names = f.report.class_names;
    json history = json::array();
    for (const auto& e : f.history.epochs) {
      history.push_back({{"train_loss", e.train_loss},
                         {"train_accuracy", e.train_accuracy},
                         {"val_loss", e.val_loss},
                         {"val_accuracy", e.val_accuracy}});
    }
    folds.push_back({{"fold", f.fold_index},
                     {"train_seed", f.train_seed},
                     {"train_size", f.train_size},
                     {"test_size", f.test_size},
                     {"train_counts", counts_json(f.train_counts, names)},
                     {"test_counts", counts_json(f.test_counts, names)},
                     {"class_weights", f.weights ? f.weights->to_json(names) : json(nullptr)},
                     {"report", f.report.to_json()},
                     {"history", history}});
  }
  json j = {{"experiment", to_string(result.experiment)},
            {"target", result.target},
            {"features", result.features},
            {"test_distribution_informed_weights", result.test_informed_weights},
            {"config", result.config_echo},
            {"folds", folds},
            {"averaged", averaged_json(result.averaged)},
            {kRunInfoKey, {{"timestamp", result.timestamp}, {"wall_clock_seconds", result.wall_clock_seconds}}}};
  return j;
}

RunResult run_result_from_json(const json& j) {
  try {
    RunResult r;
    r.experiment = parse_experiment(j.at("experiment").get<std::string>());
    r.target = j.at("target").get<std::string>();
    r.features = j.at("features").get<std::string>();
    r.test_informed_weights = j.at("test_distribution_informed_weights").get<bool>();
    r.config_echo = j.at("config");
    for (const auto& f : j.at("folds")) {
      FoldResult fr;
      fr.fold_index = f.at("fold").get<std::size_t>();
      fr.train_seed = f.at("train_seed").get<std::uint64_t>();
      fr.train_size = f.at("train_size").get<std::size_t>();
      fr.test_size = f.at("test_size").get<std::size_t>();
      fr.report = EvaluationReport::from_json(f.at("report"));
      const auto& names = fr.report.class_names;
      fr.train_counts = counts_from(f.at("train_counts"), names);
      fr.test_counts = counts_from(f.at("test_counts"), names);
      if (!f.at("class_weights").is_null()) fr.weights = ClassWeights::from_json(f.at("class_weights"), names);
      for (const auto& e : f.at("history")) {
        fr.history.epochs.push_back({e.at("train_loss").get<double>(), e.at("train_accuracy").get<double>(),
                                     e.at("val_loss").get<double>(), e.at("val_accuracy").get<double>()});
      }
      r.folds.push_back(std::move(fr));
    }
    r.averaged = averaged_from(j.at("averaged"));
    const auto& info = j.at(kRunInfoKey);
    r.timestamp = info.at("timestamp").get<std::string>();
    r.wall_clock_seconds = info.at("wall_clock_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run result: ") + e.what());
  }
}

std::string render_markdown(const RunResult& result) {
  if (result.folds.empty()) throw ValidationError("run result has no folds");
  const auto& avg = result.averaged;
  std::ostringstream md;
  md << "# " << to_string(result.experiment) << "\n\n";
  md << "- target: " << result.target << "\n";
  md << "- features: " << result.features << "\n";
  md << "- folds: " << result.folds.size() << " (stratified)\n\n";
  if (result.test_informed_weights) {
    md << "> **test-distribution-informed weights**: class weights were computed from each fold's "
          "held-out class counts.\n\n";
  }

  md << "| Metric | Value |\n|---|---|\n";
  if (result.experiment == Experiment::BiasAudit) {
    md << "| Jaccard Similarity Index | " << fixed(avg.jaccard_macro_percent, 2) << " |\n";
    md << "| Overall precision | " << fixed(avg.micro.precision, 2) << " |\n";
    md << "| Overall recall | " << fixed(avg.micro.recall, 2) << " |\n";
    md << "| Overall F1-score | " << fixed(avg.micro.f1, 2) << " |\n";
  } else {
    md << "| Jaccard Similarity index | " << fixed(avg.jaccard_macro_percent, 2) << " |\n";
    md << "| F1-score | " << fixed(avg.macro.f1, 2) << " |\n";
  }
  md << "\n## Per class (fold mean)\n\n| Class | Jaccard | Precision | Recall | F1 |\n|---|---|---|---|---|\n";
  for (std::size_t c = 0; c < avg.per_class.size(); ++c) {
    const auto& m = avg.per_class[c];
    md << "| " << avg.class_names[c] << " | " << fixed(100.0 * m.jaccard, 2) << " | " << fixed(m.precision, 2)
       << " | " << fixed(m.recall, 2) << " | " << fixed(m.f1, 2) << " |\n";
  }
  md << "\n## Per fold\n\n| Fold | Test size | Jaccard | Accuracy | Macro F1 |\n|---|---|---|---|---|\n";
  for (const auto& f : result.folds) {
    md << "| " << f.fold_index << " | " << f.test_size << " | " << fixed(f.report.jaccard_macro_percent, 2) << " | "
       << fixed(f.report.accuracy, 2) << " | " << fixed(f.report.macro.f1, 2) << " |\n";
  }
  if (result.test_informed_weights) {
    md << "\n## Class weights per fold\n\n| Fold |";
    for (const auto& n : avg.class_names) md << ' ' << n << " |";
    md << "\n|---|";
    for (std::size_t c = 0; c < avg.class_names.size(); ++c) md << "---|";
    md << '\n';
    for (const auto& f : result.folds) {
      md << "| " << f.fold_index << " |";
      for (std::size_t c = 0; c < avg.class_names.size(); ++c) {
        md << ' ' << (f.weights && f.weights->contains(c) ? fixed(f.weights->at(c).value, 4) : "-") << " |";
      }
      md << '\n';
    }
  }
  return md.str();
}

void write_report(const RunResult& result, ReportFormat format, const std::filesystem::path& path) {
  if (result.folds.empty()) throw ValidationError("run result has no folds");
  const std::string body = format == ReportFormat::Json ? to_json(result).dump(2) + "\n" : render_markdown(result);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lesionbench
