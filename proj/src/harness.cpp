#include "lesionbench/harness.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "lesionbench/error.hpp"
#include "lesionbench/split.hpp"

namespace lesionbench {

namespace fs = std::filesystem;

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::BiasAudit: return "bias_audit";
    case Experiment::Benchmark: return "benchmark";
    case Experiment::TransferUnweighted: return "transfer_unweighted";
    case Experiment::TransferWeighted: return "transfer_weighted";
  }
  return "?";
}

Experiment parse_experiment(const std::string& text) {
  for (auto e : {Experiment::BiasAudit, Experiment::Benchmark, Experiment::TransferUnweighted,
                 Experiment::TransferWeighted}) {
    if (text == to_string(e)) return e;
  }
  throw ValidationError("unknown experiment '" + text + "'");
}

LabelGrouping ExperimentConfig::grouping() const {
  return malignant_labels ? LabelGrouping(*malignant_labels) : LabelGrouping();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = lesionbench::to_string(experiment);
  j["manifests"] = nlohmann::json::array();
  for (const auto& m : manifests) j["manifests"].push_back({{"source", m.source.name()}, {"path", m.path.generic_string()}});
  if (malignant_labels) j["malignant_labels"] = *malignant_labels;
  if (embeddings) j["embeddings"] = embeddings->generic_string();
  if (pixels) j["pixels"] = pixels->generic_string();
  j["thumbnail_edge"] = thumbnail_edge;
  if (bias_features) j["bias_features"] = *bias_features == FeatureKind::Embeddings ? "embeddings" : "pixels";
  j["k"] = k;
  j["seed"] = seed;
  const auto tc = effective_train_config(*this);
  j["train"] = {{"learning_rate", tc.learning_rate},
                {"momentum", tc.momentum},
                {"epochs", tc.epochs},
                {"batch_size", tc.batch_size}};
  j["hidden_dims"] = hidden_dims;
  j["normalize"] = lesionbench::to_string(normalize);
  j["literal_alg1"] = literal_alg1;
  j["parallel_folds"] = parallel_folds;
  j["output_dir"] = output_dir.generic_string();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  static const std::set<std::string> known = {
      "experiment", "manifests", "malignant_labels", "embeddings", "pixels", "thumbnail_edge",
      "bias_features", "k", "seed", "train", "hidden_dims", "normalize", "literal_alg1",
      "parallel_folds", "output_dir"};
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  ExperimentConfig c;
  try {
    if (j.contains("experiment")) c.experiment = parse_experiment(j["experiment"].get<std::string>());
    if (j.contains("manifests")) {
      for (const auto& m : j["manifests"]) {
        c.manifests.push_back({Source::parse(m.at("source").get<std::string>()), resolve(m.at("path").get<std::string>())});
      }
    }
    if (j.contains("malignant_labels")) c.malignant_labels = j["malignant_labels"].get<std::set<std::string>>();
    if (j.contains("embeddings")) c.embeddings = resolve(j["embeddings"].get<std::string>());
    if (j.contains("pixels")) c.pixels = resolve(j["pixels"].get<std::string>());
    if (j.contains("thumbnail_edge")) c.thumbnail_edge = j["thumbnail_edge"].get<std::size_t>();
    if (j.contains("bias_features")) {
      const auto f = j["bias_features"].get<std::string>();
      if (f == "embeddings") c.bias_features = FeatureKind::Embeddings;
      else if (f == "pixels") c.bias_features = FeatureKind::Pixels;
      else throw ValidationError("bias_features must be 'embeddings' or 'pixels'");
    }
    if (j.contains("k")) c.k = j["k"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("train")) {
      const auto& t = j["train"];
      for (const auto& [key, value] : t.items()) {
        if (key != "learning_rate" && key != "momentum" && key != "epochs" && key != "batch_size") {
          throw ValidationError("unknown train key '" + key + "'");
        }
      }
      if (t.contains("learning_rate")) c.train.learning_rate = t["learning_rate"].get<double>();
      if (t.contains("momentum")) c.train.momentum = t["momentum"].get<double>();
      if (t.contains("epochs")) c.train.epochs = t["epochs"].get<std::size_t>();
      if (t.contains("batch_size")) c.train.batch_size = t["batch_size"].get<std::size_t>();
    }
    if (j.contains("hidden_dims")) c.hidden_dims = j["hidden_dims"].get<std::vector<std::size_t>>();
    if (j.contains("normalize")) c.normalize = parse_normalization(j["normalize"].get<std::string>());
    if (j.contains("literal_alg1")) c.literal_alg1 = j["literal_alg1"].get<bool>();
    if (j.contains("parallel_folds")) c.parallel_folds = j["parallel_folds"].get<bool>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  if (c.k < 2) throw ValidationError("k must be at least 2");
  if (c.thumbnail_edge == 0) throw ValidationError("thumbnail_edge must be positive");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto config = ExperimentConfig::from_json(j, path.parent_path());
  check_paths(config);
  return config;
}

void check_paths(const ExperimentConfig& config) {
  auto must_exist = [](const fs::path& p) {
    if (!fs::exists(p)) throw IoError("configured path does not exist: " + p.string());
  };
  for (const auto& m : config.manifests) must_exist(m.path);
  if (config.embeddings) must_exist(*config.embeddings);
  if (config.pixels) must_exist(*config.pixels);
}

void check_config(const ExperimentConfig& config) {
  check_paths(config);
  switch (config.experiment) {
    case Experiment::TransferUnweighted:
    case Experiment::TransferWeighted:
      if (!config.embeddings) throw ValidationError("transfer experiments require an embedding file");
      break;
    case Experiment::Benchmark:
      if (!config.pixels) throw ValidationError("the benchmark requires a pixel feature file");
      break;
    case Experiment::BiasAudit:
      if (!config.embeddings && !config.pixels) throw ValidationError("the bias audit requires a feature file");
      break;
  }
}

nnet::TrainConfig effective_train_config(const ExperimentConfig& config) {
  nnet::TrainConfig tc;
  if (config.train.learning_rate) tc.learning_rate = *config.train.learning_rate;
  if (config.train.momentum) tc.momentum = *config.train.momentum;
  if (config.train.epochs) tc.epochs = *config.train.epochs;
  if (config.train.batch_size) tc.batch_size = *config.train.batch_size;
  tc.seed = config.seed;
  return tc;
}

namespace {

FeatureKind bias_feature_kind(const ExperimentConfig& config) {
  if (config.bias_features) return *config.bias_features;
  return config.embeddings ? FeatureKind::Embeddings : FeatureKind::Pixels;
}

// The table the samples come from when no manifests are configured; falls
// back to whichever table exists.
FeatureKind primary_feature_kind(const ExperimentConfig& config) {
  FeatureKind kind = FeatureKind::Embeddings;
  switch (config.experiment) {
    case Experiment::Benchmark: kind = FeatureKind::Pixels; break;
    case Experiment::BiasAudit: kind = bias_feature_kind(config); break;
    default: break;
  }
  if (kind == FeatureKind::Pixels && !config.pixels && config.embeddings) return FeatureKind::Embeddings;
  if (kind == FeatureKind::Embeddings && !config.embeddings && config.pixels) return FeatureKind::Pixels;
  return kind;
}

EmbeddingTable load_features(const ExperimentConfig& config, FeatureKind kind) {
  const auto& path = kind == FeatureKind::Embeddings ? config.embeddings : config.pixels;
  if (!path) {
    throw ValidationError(kind == FeatureKind::Embeddings ? "no embedding file configured"
                                                          : "no pixel feature file configured");
  }
  return load_embeddings(*path);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void require_all_lesion_classes(const CombinedDataset& dataset) {
  for (LesionClass c : kLesionClasses) {
    if (dataset.class_count(c) == 0) {
      throw ValidationError("dataset has no " + std::string(upper_name(c)) + " samples");
    }
  }
}

struct CvSetup {
  LabelledIds labels;
  std::vector<nnet::Vector> features;  // aligned with labels.ids
  std::string target;
  std::string backbone;
};

CvSetup make_setup(LabelledIds labels, const EmbeddingTable& table, std::string target) {
  CvSetup s{std::move(labels), {}, std::move(target), table.backbone()};
  s.features.reserve(s.labels.ids.size());
  for (const auto& id : s.labels.ids) {
    const auto& v = table.at(id);
    s.features.push_back(Eigen::Map<const nnet::Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return s;
}

FoldResult run_fold(const ExperimentConfig& config, const CvSetup& setup, const FoldSplit& fold,
                    const std::unordered_map<std::string, std::size_t>& position, bool weighted) {
  auto gather = [&](const std::vector<std::string>& ids, std::vector<std::size_t>& labels) {
    std::vector<nnet::LabelledSample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      const std::size_t pos = position.at(id);
      out.push_back({setup.features[pos], setup.labels.labels[pos]});
      labels.push_back(setup.labels.labels[pos]);
    }
    return out;
  };
  std::vector<std::size_t> train_labels, test_labels;
  const auto train_set = gather(fold.train_ids, train_labels);
  const auto test_set = gather(fold.test_ids, test_labels);

  FoldResult r;
  r.fold_index = fold.fold_index;
  r.train_seed = config.seed + fold.fold_index;
  r.train_size = train_set.size();
  r.test_size = test_set.size();
  r.train_counts = ClassCounts::from_labels(train_labels);
  r.test_counts = ClassCounts::from_labels(test_labels);

  auto tc = effective_train_config(config);
  tc.seed = r.train_seed;
  if (weighted) {
    const auto reading = config.literal_alg1 ? BalancerReading::Literal : BalancerReading::Balanced;
    r.weights = normalize_weights(balancer_weights(r.train_counts, r.test_counts, reading), config.normalize);
    tc.class_weights = r.weights;
  }

  const nnet::Architecture arch{static_cast<std::size_t>(setup.features.front().size()), config.hidden_dims,
                                setup.labels.names.size()};
  auto trained = nnet::train(arch, train_set, test_set, tc);

  std::vector<std::size_t> predicted;
  predicted.reserve(test_set.size());
  for (const auto& s : test_set) predicted.push_back(nnet::predict(trained.params, s.features));
  r.report = evaluate(confusion(test_labels, predicted, setup.labels.names.size()), setup.labels.names);
  r.history = std::move(trained.history);
  return r;
}

RunResult run_cross_validation(const ExperimentConfig& config, Experiment experiment, const CvSetup& setup,
                               bool weighted) {
  const auto started = std::chrono::steady_clock::now();
  if (setup.labels.ids.empty()) throw ValidationError("dataset is empty");
  const auto folds = stratified_kfold(setup.labels.view(), config.k, config.seed);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < setup.labels.ids.size(); ++i) position.emplace(setup.labels.ids[i], i);

  RunResult result;
  result.experiment = experiment;
  result.target = setup.target;
  result.features = setup.backbone;
  result.test_informed_weights = weighted;
  auto echo = config;
  echo.experiment = experiment;
  result.config_echo = echo.to_json();

  if (config.parallel_folds) {
    std::vector<std::future<FoldResult>> pending;
    for (const auto& fold : folds) {
      pending.push_back(std::async(std::launch::async, [&, fold] { return run_fold(config, setup, fold, position, weighted); }));
    }
    for (auto& p : pending) result.folds.push_back(p.get());
  } else {
    for (const auto& fold : folds) result.folds.push_back(run_fold(config, setup, fold, position, weighted));
  }

  std::vector<EvaluationReport> reports;
  for (const auto& f : result.folds) reports.push_back(f.report);
  result.averaged = average_reports(reports);
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.timestamp = utc_timestamp();
  return result;
}

}  // namespace

CombinedDataset load_dataset(const ExperimentConfig& config) {
  const auto grouping = config.grouping();
  if (!config.manifests.empty()) {
    std::vector<std::pair<Source, std::vector<SampleRecord>>> parsed;
    for (const auto& m : config.manifests) {
      std::ifstream in(m.path);
      if (!in) throw IoError("cannot open manifest " + m.path.string());
      try {
        parsed.emplace_back(m.source, parse_manifest(in, m.source, grouping));
      } catch (const ValidationError& e) {
        throw ValidationError(m.path.string() + ": " + e.what());
      }
    }
    return combine(parsed, grouping);
  }
  return load_features(config, primary_feature_kind(config)).to_dataset(grouping);
}

AveragedReport average_reports(const std::vector<EvaluationReport>& folds) {
  if (folds.empty()) throw ValidationError("no fold reports to average");
  AveragedReport avg;
  avg.class_names = folds.front().class_names;
  const std::size_t n = avg.class_names.size();
  avg.per_class.assign(n, ClassMetrics{});
  avg.pooled_confusion = ConfusionMatrix(n);
  for (const auto& r : folds) {
    if (r.class_names != avg.class_names) throw ValidationError("fold reports disagree on classes");
    avg.jaccard_macro_percent += r.jaccard_macro_percent;
    avg.accuracy += r.accuracy;
    avg.micro.precision += r.micro.precision;
    avg.micro.recall += r.micro.recall;
    avg.micro.f1 += r.micro.f1;
    avg.macro.precision += r.macro.precision;
    avg.macro.recall += r.macro.recall;
    avg.macro.f1 += r.macro.f1;
    for (std::size_t c = 0; c < n; ++c) {
      avg.per_class[c].jaccard += r.per_class[c].jaccard;
      avg.per_class[c].precision += r.per_class[c].precision;
      avg.per_class[c].recall += r.per_class[c].recall;
      avg.per_class[c].f1 += r.per_class[c].f1;
      for (std::size_t p = 0; p < n; ++p) avg.pooled_confusion.add(c, p, r.confusion.at(c, p));
    }
  }
  const auto k = static_cast<double>(folds.size());
  avg.jaccard_macro_percent /= k;
  avg.accuracy /= k;
  for (double* v : {&avg.micro.precision, &avg.micro.recall, &avg.micro.f1, &avg.macro.precision,
                    &avg.macro.recall, &avg.macro.f1}) {
    *v /= k;
  }
  for (auto& c : avg.per_class) {
    c.jaccard /= k;
    c.precision /= k;
    c.recall /= k;
    c.f1 /= k;
  }
  return avg;
}

RunResult run_bias_audit(const ExperimentConfig& config, const CombinedDataset& dataset,
                         const EmbeddingTable& features) {
  if (dataset.source_counts().size() < 2) {
    throw ValidationError("the bias audit needs at least two sources");
  }
  return run_cross_validation(config, Experiment::BiasAudit, make_setup(source_labels(dataset), features, "source"),
                              false);
}

RunResult run_benchmark(const ExperimentConfig& config, const CombinedDataset& dataset,
                        const EmbeddingTable& pixels) {
  const std::size_t expected = config.thumbnail_edge * config.thumbnail_edge;
  if (pixels.dim() != expected) {
    throw ValidationError("pixel vectors have " + std::to_string(pixels.dim()) + " values, expected " +
                          std::to_string(expected) + " for " + std::to_string(config.thumbnail_edge) + "x" +
                          std::to_string(config.thumbnail_edge) + " thumbnails");
  }
  require_all_lesion_classes(dataset);
  return run_cross_validation(config, Experiment::Benchmark,
                              make_setup(lesion_labels(dataset), pixels, "lesion_class"), false);
}

RunResult run_transfer(const ExperimentConfig& config, const CombinedDataset& dataset,
                       const EmbeddingTable& embeddings, bool weighted) {
  require_all_lesion_classes(dataset);
  return run_cross_validation(config, weighted ? Experiment::TransferWeighted : Experiment::TransferUnweighted,
                              make_setup(lesion_labels(dataset), embeddings, "lesion_class"), weighted);
}

RunResult run_bias_audit(const ExperimentConfig& config) {
  auto c = config;
  c.experiment = Experiment::BiasAudit;
  check_config(c);
  const auto dataset = load_dataset(c);
  return run_bias_audit(c, dataset, load_features(c, bias_feature_kind(c)));
}

RunResult run_benchmark(const ExperimentConfig& config) {
  auto c = config;
  c.experiment = Experiment::Benchmark;
  check_config(c);
  const auto dataset = load_dataset(c);
  return run_benchmark(c, dataset, load_features(c, FeatureKind::Pixels));
}

RunResult run_transfer(const ExperimentConfig& config, bool weighted) {
  auto c = config;
  c.experiment = weighted ? Experiment::TransferWeighted : Experiment::TransferUnweighted;
  check_config(c);
  const auto dataset = load_dataset(c);
  return run_transfer(c, dataset, load_features(c, FeatureKind::Embeddings), weighted);
}

RunResult run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case Experiment::BiasAudit: return run_bias_audit(config);
    case Experiment::Benchmark: return run_benchmark(config);
    case Experiment::TransferUnweighted: return run_transfer(config, false);
    case Experiment::TransferWeighted: return run_transfer(config, true);
  }
  throw ValidationError("unknown experiment");
}

}  // namespace lesionbench
