#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lesionbench/balance.hpp"
#include "lesionbench/embedding.hpp"
#include "lesionbench/manifest.hpp"
#include "lesionbench/metrics.hpp"
#include "lesionbench/nnet.hpp"

namespace lesionbench {

enum class Experiment { BiasAudit, Benchmark, TransferUnweighted, TransferWeighted };

std::string to_string(Experiment e);     // bias_audit, benchmark, transfer_unweighted, transfer_weighted
Experiment parse_experiment(const std::string& text);

enum class FeatureKind { Embeddings, Pixels };

struct ManifestSource {
  Source source;
  std::filesystem::path path;
};

struct TrainOverrides {
  std::optional<double> learning_rate;
  std::optional<double> momentum;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Benchmark;
  std::vector<ManifestSource> manifests;  // empty: take samples from the feature table
  std::optional<std::set<std::string>> malignant_labels;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> pixels;
  std::size_t thumbnail_edge = 16;  // pixel vectors are edge*edge grayscale values
  std::optional<FeatureKind> bias_features;  // default: embeddings when configured
  std::size_t k = 3;
  std::uint64_t seed = 0;
  TrainOverrides train;
  std::vector<std::size_t> hidden_dims;
  WeightNormalization normalize = WeightNormalization::None;
  bool literal_alg1 = false;
  bool parallel_folds = true;
  std::filesystem::path output_dir = "out";

  LabelGrouping grouping() const;
  nlohmann::json to_json() const;
  // Relative paths resolve against base_dir. Throws ValidationError on bad
  // keys or values.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

// Reads a JSON config; relative paths resolve against the file's directory and
// must exist (IoError otherwise).
ExperimentConfig load_config(const std::filesystem::path& path);
// Throws IoError when a configured path does not exist.
void check_paths(const ExperimentConfig& config);
// check_paths plus the experiment's own requirements (ValidationError), e.g. a
// transfer experiment without an embedding file.
void check_config(const ExperimentConfig& config);

nnet::TrainConfig effective_train_config(const ExperimentConfig& config);

// Dataset from the manifests, or from the primary feature table when no
// manifests are configured.
CombinedDataset load_dataset(const ExperimentConfig& config);

struct FoldResult {
  std::size_t fold_index = 0;
  std::uint64_t train_seed = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  ClassCounts train_counts;
  ClassCounts test_counts;
  std::optional<ClassWeights> weights;
  EvaluationReport report;
  nnet::TrainHistory history;

  friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

// Arithmetic means of the fold reports, plus the pooled confusion matrix.
struct AveragedReport {
  std::vector<std::string> class_names;
  double jaccard_macro_percent = 0;
  double accuracy = 0;
  std::vector<ClassMetrics> per_class;
  Prf micro;
  Prf macro;
  ConfusionMatrix pooled_confusion;

  friend bool operator==(const AveragedReport&, const AveragedReport&) = default;
};

AveragedReport average_reports(const std::vector<EvaluationReport>& folds);

struct RunResult {
  Experiment experiment = Experiment::Benchmark;
  std::string target;  // "lesion_class" or "source"
  std::string features;  // backbone name of the table used
  bool test_informed_weights = false;
  std::vector<FoldResult> folds;
  AveragedReport averaged;
  nlohmann::json config_echo;
  double wall_clock_seconds = 0;
  std::string timestamp;

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

// Excluded from reproducibility comparisons.
inline constexpr const char* kRunInfoKey = "run_info";

nlohmann::json to_json(const RunResult& result);
RunResult run_result_from_json(const nlohmann::json& j);

RunResult run_bias_audit(const ExperimentConfig& config);
RunResult run_benchmark(const ExperimentConfig& config);
RunResult run_transfer(const ExperimentConfig& config, bool weighted);
// Dispatches on config.experiment.
RunResult run_experiment(const ExperimentConfig& config);

// The same runs over in-memory data, used by the file-based entry points.
RunResult run_bias_audit(const ExperimentConfig& config, const CombinedDataset& dataset,
                         const EmbeddingTable& features);
RunResult run_benchmark(const ExperimentConfig& config, const CombinedDataset& dataset,
                        const EmbeddingTable& pixels);
RunResult run_transfer(const ExperimentConfig& config, const CombinedDataset& dataset,
                       const EmbeddingTable& embeddings, bool weighted);

enum class ReportFormat { Json, Markdown };

std::string render_markdown(const RunResult& result);
// Throws ValidationError for a result without folds, IoError when the file
// cannot be written.
void write_report(const RunResult& result, ReportFormat format, const std::filesystem::path& path);

}  // namespace lesionbench
