#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lesionbench/embedding.hpp"

namespace lesionbench {

// A synthetic stand-in for the combined dermoscopy corpus. Features are
// isotropic unit Gaussians; class c's mean sits at (separation / sqrt 2) on
// axis c, so class means are `separation` sigma apart pairwise. Source s adds
// an offset of `source_shift` sigma along its own axis, past the class axes.
struct FeatureSpec {
  std::size_t dim = 32;
  double class_separation = 2.0;
  double source_shift = 0.0;
  std::string backbone = "synthetic";
};

struct SyntheticSpec {
  std::vector<std::size_t> class_counts = {132, 15, 46};  // benign, malignant, melanoma
  std::size_t num_sources = 3;
  std::uint64_t seed = 0;
  FeatureSpec embedding;
  std::optional<FeatureSpec> pixels;  // same ids, second feature table
};

struct SyntheticFixture {
  EmbeddingTable embeddings;
  std::optional<EmbeddingTable> pixels;
};

// Sample i of each class goes to source i mod num_sources; sources are named
// synth:src0, synth:src1, ...
SyntheticFixture make_synthetic_fixture(const SyntheticSpec& spec);

}  // namespace lesionbench
