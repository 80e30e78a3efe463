// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lesionbench/balance.hpp"
#include "lesionbench/error.hpp"
#include "lesionbench/harness.hpp"
#include "lesionbench/metrics.hpp"
#include "lesionbench/nnet.hpp"
#include "lesionbench/random.hpp"
#include "lesionbench/split.hpp"
#include "lesionbench/synthetic.hpp"

using namespace lesionbench;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LESIONBENCH_FIXTURE_DIR;
constexpr std::size_t kSeeds = 5;

struct Outcome {
  bool ok = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// lr 1e-4, momentum 0.9, batch 16, 1000 epochs.
ExperimentConfig reference_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.train.learning_rate = 1e-4;
  c.train.momentum = 0.9;
  c.train.batch_size = 16;
  c.train.epochs = 1000;
  return c;
}

Outcome balancer_oracle() {
  SplitMix64 rng(20240601);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    ClassCounts train, test;
    for (std::size_t c = 0; c < n; ++c) {
      train.counts[c] = 1 + rng.below(500);
      test.counts[c] = 1 + rng.below(500);
    }
    // brute force: find the majority by scanning, then weigh each class
    std::uint64_t mc = 0;
    for (std::size_t c = 0; c < n; ++c) mc = std::max(mc, train.counts[c]);
    const auto got = balancer_weights(train, test);
    if (got.size() != n) ++mismatches;
    for (std::size_t c = 0; c < n; ++c) {
      const Rational dtc(static_cast<long long>(test.counts[c]), static_cast<long long>(train.counts[c]));
      const Rational itc(static_cast<long long>(mc), static_cast<long long>(train.counts[c]));
      const Rational want = dtc * itc;
      if (!got.contains(c) || got.at(c).exact != want ||
          got.at(c).value != static_cast<double>(want)) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("1000 pairs, %zu mismatches", mismatches)};
}

Outcome gradient_check() {
  SplitMix64 rng(77);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    nnet::Architecture arch;
    arch.input_dim = 2 + rng.below(15);
    if (rng.below(2) == 1) arch.hidden_dims.push_back(2 + rng.below(8));
    auto params = nnet::ModelParams::glorot(arch, rng);
    for (auto& l : params.mutable_layers()) {
      for (auto& v : l.bias) v = rng.uniform(-0.5, 0.5);
    }
    const std::size_t batch_size = 1 + rng.below(8);
    std::vector<nnet::LabelledSample> batch;
    for (std::size_t i = 0; i < batch_size; ++i) {
      nnet::Vector x(static_cast<Eigen::Index>(arch.input_dim));
      for (auto& v : x) v = rng.normal();
      batch.push_back({x, static_cast<std::size_t>(rng.below(arch.num_classes))});
    }
    std::vector<double> w(arch.num_classes);
    for (auto& v : w) v = rng.uniform(0.1, 5.0);
    worst = std::max(worst, nnet::finite_difference_check(params, batch, {}, 1e-5));
    worst = std::max(worst, nnet::finite_difference_check(params, batch, w, 1e-5));
  }
  return {worst < 1e-5, fmt("100 models, weighted and unweighted, max relative error %.2e", worst)};
}

Outcome metric_identities() {
  SplitMix64 rng(31337);
  std::size_t failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    std::vector<std::uint64_t> cells(n * n);
    const bool sparse = rng.below(4) == 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const bool zero = sparse ? rng.below(2) == 0 : rng.below(8) == 0;
        cells[i * n + j] = zero ? 0 : rng.below(50);
      }
    }
    if (trial % 10 == 0) {
      for (std::size_t i = 0; i < n; ++i) cells[i * n + i] = 0;
    }
    std::uint64_t total = 0;
    for (auto v : cells) total += v;
    if (total == 0) cells[1] = 1;
    const ConfusionMatrix cm(n, cells);
    const auto micro = prf(cm, Averaging::Micro).front();
    const double acc = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
    if (!(micro.precision == acc && micro.recall == acc && micro.f1 == acc)) ++failures;

    std::vector<std::string> names;
    for (std::size_t c = 0; c < n; ++c) names.push_back("c" + std::to_string(c));
    const auto report = evaluate(cm, names);
    for (const auto& m : report.per_class) {
      if (std::abs(m.jaccard - m.f1 / (2.0 - m.f1)) > 1e-12) ++failures;
    }
    const bool zero_diag = cm.trace() == 0;
    if ((jaccard_macro(cm) == 0.0) != zero_diag) ++failures;
  }
  return {failures == 0, fmt("1000 matrices, %zu identity failures", failures)};
}

CombinedDataset fixture_manifest_dataset() {
  ExperimentConfig c;
  for (const auto* name : {"isic2019", "ph2", "sevenpoint"}) {
    c.manifests.push_back({Source::parse(name), kFixtures / "manifests" / (std::string(name) + ".csv")});
  }
  return load_dataset(c);
}

Outcome fold_composition() {
  const auto ds = fixture_manifest_dataset();
  if (ds.class_count(LesionClass::Benign) != 132 || ds.class_count(LesionClass::Malignant) != 15 ||
      ds.class_count(LesionClass::Melanoma) != 46) {
    return {false, "fixture manifests do not hold 132/15/46"};
  }
  const auto labels = lesion_labels(ds);
  std::string first_dump;
  std::string layout;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 1234567ULL, 99ULL}) {
    const auto folds = stratified_kfold(labels.view(), 3, seed);
    for (const auto& f : folds) {
      std::size_t counts[3] = {0, 0, 0};
      for (const auto& id : f.test_ids) {
        for (std::size_t i = 0; i < labels.ids.size(); ++i) {
          if (labels.ids[i] == id) ++counts[labels.labels[i]];
        }
      }
      if (counts[0] != 44 || counts[1] != 5 || (counts[2] != 15 && counts[2] != 16)) {
        return {false, fmt("seed %llu fold %zu holds %zu/%zu/%zu", static_cast<unsigned long long>(seed),
                           f.fold_index, counts[0], counts[1], counts[2])};
      }
      if (seed == 1) layout += fmt("%s%zu/%zu/%zu", layout.empty() ? "" : ", ", counts[0], counts[1], counts[2]);
    }
    const auto dump = folds_to_json(folds).dump();
    if (stratified_kfold(labels.view(), 3, seed) != folds || folds_to_json(stratified_kfold(ds, 3, seed)).dump() != dump) {
      return {false, "splits differ between identical calls"};
    }
    if (seed == 1) first_dump = dump;
  }
  if (folds_to_json(stratified_kfold(labels.view(), 3, 1)).dump() != first_dump) {
    return {false, "splits differ between identical calls"};
  }
  return {true, "5 seeds, benign/malignant/melanoma per test fold: " + layout + "; byte-identical reruns"};
}

SyntheticSpec bias_spec(std::uint64_t seed, double shift) {
  SyntheticSpec s;
  s.class_counts = {60, 60, 60};  // 20 of each class per source, 60 samples per source
  s.num_sources = 3;
  s.seed = seed;
  s.embedding = FeatureSpec{16, 0.0, shift, "bias-probe"};
  return s;
}

Outcome bias_audit() {
  double identical = 0, shifted = 0;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const auto cfg = reference_config(seed);
    const auto same = make_synthetic_fixture(bias_spec(seed, 0.0));
    const auto apart = make_synthetic_fixture(bias_spec(seed, 3.0));
    identical += run_bias_audit(cfg, same.embeddings.to_dataset(), same.embeddings).averaged.accuracy;
    shifted += run_bias_audit(cfg, apart.embeddings.to_dataset(), apart.embeddings).averaged.accuracy;
  }
  identical /= kSeeds;
  shifted /= kSeeds;
  const bool ok = identical >= 0.23 && identical <= 0.43 && shifted >= 0.90;
  return {ok, fmt("mean accuracy identical sources %.3f (want 0.23..0.43), 3-sigma shifts %.3f (want >= 0.90)",
                  identical, shifted)};
}

Outcome transfer_beats_scratch() {
  double transfer = 0, scratch = 0, min_gap = 1e9;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    SyntheticSpec s;
    s.seed = seed;
    s.embedding = FeatureSpec{32, 2.0, 0.0, "embeddings"};
    s.pixels = FeatureSpec{256, 0.25, 0.0, "raw-pixels"};
    const auto fx = make_synthetic_fixture(s);
    const auto ds = fx.embeddings.to_dataset();
    const auto cfg = reference_config(seed);
    const double t = run_transfer(cfg, ds, fx.embeddings, false).averaged.jaccard_macro_percent;
    const double b = run_benchmark(cfg, ds, *fx.pixels).averaged.jaccard_macro_percent;
    transfer += t;
    scratch += b;
    min_gap = std::min(min_gap, t - b);
  }
  transfer /= kSeeds;
  scratch /= kSeeds;
  // every seed must clear the margin, not only the mean
  return {min_gap >= 5.0, fmt("mean Jaccard transfer %.2f vs scratch %.2f, smallest per-seed gap %.2f (want >= 5)",
                              transfer, scratch, min_gap)};
}

Outcome weighting_helps_minority() {
  double weighted = 0, plain = 0;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    SyntheticSpec s;
    s.class_counts = {132, 15, 46};
    s.seed = seed;
    s.embedding = FeatureSpec{32, 1.5, 0.0, "overlapping"};
    const auto fx = make_synthetic_fixture(s);
    const auto ds = fx.embeddings.to_dataset();
    const auto cfg = reference_config(seed);
    const std::size_t malignant = index_of(LesionClass::Malignant);
    weighted += run_transfer(cfg, ds, fx.embeddings, true).averaged.per_class[malignant].recall;
    plain += run_transfer(cfg, ds, fx.embeddings, false).averaged.per_class[malignant].recall;
  }
  weighted /= kSeeds;
  plain /= kSeeds;
  return {weighted > plain, fmt("mean malignant recall weighted %.3f vs unweighted %.3f", weighted, plain)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("lesionbench_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  struct Run {
    Experiment experiment;
    fs::path features;
    bool pixels;
  };
  const Run runs[] = {
      {Experiment::BiasAudit, kFixtures / "bias_shifted.jsonl", false},
      {Experiment::Benchmark, kFixtures / "combined_pixels.jsonl", true},
      {Experiment::TransferUnweighted, kFixtures / "combined_embeddings.jsonl", false},
      {Experiment::TransferWeighted, kFixtures / "combined_embeddings.jsonl", false},
  };
  Outcome out{true, ""};
  for (const auto& r : runs) {
    auto cfg = reference_config(1);
    cfg.experiment = r.experiment;
    (r.pixels ? cfg.pixels : cfg.embeddings) = r.features;
    std::string dumps[2], markdown[2];
    for (int i = 0; i < 2; ++i) {
      const auto result = run_experiment(cfg);
      const auto json_path = dir / fmt("%s_%d.json", to_string(r.experiment).c_str(), i);
      const auto md_path = dir / fmt("%s_%d.md", to_string(r.experiment).c_str(), i);
      write_report(result, ReportFormat::Json, json_path);
      write_report(result, ReportFormat::Markdown, md_path);
      auto j = nlohmann::json::parse(slurp(json_path));
      j.erase(kRunInfoKey);
      dumps[i] = j.dump(2);
      markdown[i] = slurp(md_path);
    }
    const bool same = dumps[0] == dumps[1] && markdown[0] == markdown[1];
    out.ok = out.ok && same;
    out.detail += (out.detail.empty() ? "" : ", ") + to_string(r.experiment) + (same ? " identical" : " DIFFERS");
  }
  fs::remove_all(dir);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;  // 0: no runtime bound
    std::function<Outcome()> check;
  };
  const Criterion criteria[] = {
      {"class balancer matches brute-force oracle", 1.0, balancer_oracle},
      {"gradient agrees with finite differences", 10.0, gradient_check},
      {"metric identities", 1.0, metric_identities},
      {"stratified 3-fold on 132/15/46", 0.0, fold_composition},
      {"bias audit: chance on identical sources, high on shifted", 60.0, bias_audit},
      {"transfer beats scratch by >= 5 Jaccard points", 120.0, transfer_beats_scratch},
      {"balancer weights raise malignant recall", 120.0, weighting_helps_minority},
      {"reports are byte-identical across reruns", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
      o.ok = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    failed += o.ok ? 0 : 1;
    std::printf("[%s] %s: %s (%.2f s)\n", o.ok ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
