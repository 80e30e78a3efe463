#include "lesionbench/synthetic.hpp"

#include <cmath>

#include "lesionbench/error.hpp"
#include "lesionbench/random.hpp"

namespace lesionbench {

namespace {

constexpr const char* kRawLabels[kNumLesionClasses] = {"nevus", "basal cell carcinoma", "melanoma"};

std::vector<double> draw(const FeatureSpec& f, std::size_t cls, std::size_t source, SplitMix64& rng) {
  std::vector<double> v(f.dim);
  for (auto& x : v) x = rng.normal();
  v[cls] += f.class_separation / std::sqrt(2.0);
  const std::size_t shift_axis = kNumLesionClasses + source;
  if (f.source_shift != 0.0) v[shift_axis] += f.source_shift;
  return v;
}

void check(const FeatureSpec& f, std::size_t num_sources) {
  if (f.dim < kNumLesionClasses + (f.source_shift != 0.0 ? num_sources : 0)) {
    throw ValidationError("synthetic feature dimension too small for its class and source axes");
  }
}

}  // namespace

SyntheticFixture make_synthetic_fixture(const SyntheticSpec& spec) {
  if (spec.class_counts.size() != kNumLesionClasses) throw ValidationError("need one count per lesion class");
  if (spec.num_sources == 0) throw ValidationError("need at least one source");
  check(spec.embedding, spec.num_sources);
  if (spec.pixels) check(*spec.pixels, spec.num_sources);

  SyntheticFixture fx{EmbeddingTable(spec.embedding.dim, spec.embedding.backbone), std::nullopt};
  if (spec.pixels) fx.pixels.emplace(spec.pixels->dim, spec.pixels->backbone);

  std::vector<Source> sources;
  for (std::size_t s = 0; s < spec.num_sources; ++s) sources.push_back(Source::synth("src" + std::to_string(s)));

  // Separate streams so adding a pixel table leaves the embeddings unchanged.
  SplitMix64 emb_rng(spec.seed);
  SplitMix64 pix_rng(spec.seed ^ 0x5bd1e995a5a5a5a5ULL);
  for (std::size_t c = 0; c < kNumLesionClasses; ++c) {
    for (std::size_t i = 0; i < spec.class_counts[c]; ++i) {
      const std::size_t s = i % spec.num_sources;
      const std::string id = std::string(1, "bcm"[c]) + std::to_string(i);
      fx.embeddings.add({id, sources[s], kRawLabels[c], draw(spec.embedding, c, s, emb_rng)});
      if (spec.pixels) fx.pixels->add({id, sources[s], kRawLabels[c], draw(*spec.pixels, c, s, pix_rng)});
    }
  }
  return fx;
}

}  // namespace lesionbench
