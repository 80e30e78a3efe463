// harness: command-line front end for the lesion-classification experiment
// harness. Exit codes: 0 success, 2 validation error, 3 I/O error.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "lesionbench/balance.hpp"
#include "lesionbench/error.hpp"
#include "lesionbench/harness.hpp"
#include "lesionbench/split.hpp"

namespace fs = std::filesystem;
using namespace lesionbench;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool literal_alg1 = false;
  std::optional<std::string> normalize;
  std::optional<std::size_t> k;
};

std::vector<std::string> lesion_class_names() {
  std::vector<std::string> names;
  for (LesionClass c : kLesionClasses) names.emplace_back(to_string(c));
  return names;
}

ExperimentConfig build_config(const GlobalOptions& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.output_dir = *g.out;
  if (g.literal_alg1) c.literal_alg1 = true;
  if (g.normalize) c.normalize = parse_normalization(*g.normalize);
  if (g.k) {
    if (*g.k < 2) throw ValidationError("--k must be at least 2");
    c.k = *g.k;
  }
  return c;
}

fs::path ensure_out_dir(const ExperimentConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + c.output_dir.string() + ": " + ec.message());
  return c.output_dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// "benign=88,malignant=10,melanoma=31"
ClassCounts parse_counts(const std::string& spec) {
  const auto names = lesion_class_names();
  ClassCounts counts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("count '" + item + "' is not class=number");
    const auto cls = parse_lesion_class(item.substr(0, eq));
    const std::string number = trim(item.substr(eq + 1));
    std::uint64_t n = 0;
    const auto [ptr, err] = std::from_chars(number.data(), number.data() + number.size(), n);
    if (err != std::errc() || ptr != number.data() + number.size()) {
      throw ValidationError("count '" + item + "' is not class=number");
    }
    counts.counts[index_of(cls)] = n;
  }
  return counts;
}

nlohmann::json dataset_json(const CombinedDataset& ds) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [c, n] : ds.class_counts()) classes[std::string(to_string(c))] = n;
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [s, n] : ds.source_counts()) sources[s.name()] = n;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : ds.samples()) {
    samples.push_back({{"id", s.id},
                       {"source", s.source.name()},
                       {"raw_label", s.raw_label},
                       {"lesion_class", to_string(s.lesion_class)}});
  }
  return {{"total", ds.size()}, {"class_counts", classes}, {"source_counts", sources}, {"samples", samples}};
}

void print_counts(const CombinedDataset& ds) {
  std::cout << "Class       Samples\n";
  for (const auto& [c, n] : ds.class_counts()) std::cout << std::left << std::setw(12) << to_string(c) << n << '\n';
  std::cout << std::left << std::setw(12) << "total" << ds.size() << '\n';
}

void print_summary(const RunResult& r) {
  std::cout << to_string(r.experiment) << ": jaccard " << std::fixed << std::setprecision(2)
            << r.averaged.jaccard_macro_percent << ", macro F1 " << r.averaged.macro.f1 << ", micro F1 "
            << r.averaged.micro.f1 << " over " << r.folds.size() << " folds\n";
}

void run_and_report(const ExperimentConfig& config) {
  const auto result = run_experiment(config);
  const auto dir = ensure_out_dir(config);
  const std::string stem = to_string(result.experiment);
  write_report(result, ReportFormat::Json, dir / (stem + ".json"));
  write_report(result, ReportFormat::Markdown, dir / (stem + ".md"));
  print_summary(result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imbalance-aware lesion classification experiment harness"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--literal-alg1", g.literal_alg1, "Use the literal reading of the class balancer");
  app.add_option("--normalize", g.normalize, "Weight normalization")->check(CLI::IsMember({"none", "mean-one", "max-one"}));
  app.add_option("--k", g.k, "Number of stratified folds");

  auto* ingest = app.add_subcommand("ingest", "Merge manifests into one dataset and print class counts");
  std::vector<std::string> manifest_args;
  ingest->add_option("--manifest", manifest_args, "SOURCE=PATH, repeatable (overrides config manifests)");

  auto* split = app.add_subcommand("split", "Write stratified k-fold splits");
  std::string split_by = "lesion";
  split->add_option("--by", split_by, "Stratify by lesion class or source")->check(CLI::IsMember({"lesion", "source"}));

  auto* weights = app.add_subcommand("weights", "Compute class-and-distribution balancer weights");
  std::string train_spec, test_spec;
  weights->add_option("--train", train_spec, "Training counts, e.g. benign=88,malignant=10,melanoma=31");
  weights->add_option("--test", test_spec, "Test counts, same form");

  auto* bias = app.add_subcommand("bias-audit", "Name-the-dataset bias audit");
  auto* bench = app.add_subcommand("benchmark", "Scratch model on raw thumbnails");
  auto* transfer = app.add_subcommand("transfer", "Probe over pretrained embeddings");
  bool weighted = false;
  transfer->add_flag("--weighted", weighted, "Weight the loss with per-fold balancer weights");

  auto* report = app.add_subcommand("report", "Re-render a saved run result");
  std::string report_in;
  std::string report_format = "markdown";
  report->add_option("--in", report_in, "Run result JSON")->required();
  report->add_option("--format", report_format, "Output format")->check(CLI::IsMember({"json", "markdown"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*ingest) {
      auto config = build_config(g);
      if (!manifest_args.empty()) {
        config.manifests.clear();
        for (const auto& m : manifest_args) {
          const auto eq = m.find('=');
          if (eq == std::string::npos) throw ValidationError("--manifest expects SOURCE=PATH");
          config.manifests.push_back({Source::parse(m.substr(0, eq)), m.substr(eq + 1)});
        }
      }
      if (config.manifests.empty() && !config.embeddings && !config.pixels) {
        throw ValidationError("nothing to ingest: give --manifest or a config with manifests or features");
      }
      check_paths(config);
      const auto ds = load_dataset(config);
      const auto dir = ensure_out_dir(config);
      write_json(dir / "dataset.json", dataset_json(ds));
      print_counts(ds);
    } else if (*split) {
      auto config = build_config(g);
      check_paths(config);
      const auto ds = load_dataset(config);
      const auto labels = split_by == "source" ? source_labels(ds) : lesion_labels(ds);
      const auto folds = stratified_kfold(labels.view(), config.k, config.seed);
      const auto dir = ensure_out_dir(config);
      write_json(dir / "splits.json", folds_to_json(folds));
      for (const auto& f : folds) std::cout << "fold " << f.fold_index << ": " << f.test_ids.size() << " test\n";
    } else if (*weights) {
      auto config = build_config(g);
      const auto names = lesion_class_names();
      const auto reading = config.literal_alg1 ? BalancerReading::Literal : BalancerReading::Balanced;
      nlohmann::json out;
      if (!train_spec.empty() || !test_spec.empty()) {
        if (train_spec.empty() || test_spec.empty()) throw ValidationError("--train and --test go together");
        out = normalize_weights(balancer_weights(parse_counts(train_spec), parse_counts(test_spec), reading),
                                config.normalize)
                  .to_json(names);
      } else {
        check_paths(config);
        const auto ds = load_dataset(config);
        const auto labels = lesion_labels(ds);
        nlohmann::json per_fold = nlohmann::json::array();
        for (const auto& f : stratified_kfold(labels.view(), config.k, config.seed)) {
          std::unordered_map<std::string, std::size_t> label_of;
          for (std::size_t i = 0; i < labels.ids.size(); ++i) label_of[labels.ids[i]] = labels.labels[i];
          std::vector<std::size_t> tr, te;
          for (const auto& id : f.train_ids) tr.push_back(label_of.at(id));
          for (const auto& id : f.test_ids) te.push_back(label_of.at(id));
          auto w = normalize_weights(balancer_weights(ClassCounts::from_labels(tr), ClassCounts::from_labels(te), reading),
                                     config.normalize)
                       .to_json(names);
          w["fold"] = f.fold_index;
          per_fold.push_back(w);
        }
        out = {{"seed", config.seed}, {"k", config.k}, {"folds", per_fold}};
      }
      out["reading"] = config.literal_alg1 ? "literal" : "balanced";
      out["normalize"] = to_string(config.normalize);
      const auto dir = ensure_out_dir(config);
      write_json(dir / "weights.json", out);
      std::cout << out.dump(2) << '\n';
    } else if (*bias || *bench || *transfer) {
      auto config = build_config(g);
      config.experiment = *bias    ? Experiment::BiasAudit
                          : *bench ? Experiment::Benchmark
                                   : (weighted ? Experiment::TransferWeighted : Experiment::TransferUnweighted);
      run_and_report(config);
    } else if (*report) {
      std::ifstream in(report_in);
      if (!in) throw IoError("cannot open " + report_in);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(report_in + " is not valid JSON: " + e.what());
      }
      const auto result = run_result_from_json(j);
      const auto format = report_format == "json" ? ReportFormat::Json : ReportFormat::Markdown;
      if (g.out) {
        ExperimentConfig c;
        c.output_dir = *g.out;
        const auto dir = ensure_out_dir(c);
        const auto name = fs::path(report_in).stem().string() + (format == ReportFormat::Json ? ".json" : ".md");
        write_report(result, format, dir / name);
      } else {
        if (result.folds.empty()) throw ValidationError("run result has no folds");
        std::cout << (format == ReportFormat::Json ? to_json(result).dump(2) + "\n" : render_markdown(result));
      }
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
