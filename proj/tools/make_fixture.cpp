// make-fixture: writes synthetic emb-jsonl feature tables (embeddings and,
// optionally, raw-thumbnail vectors over the same ids).

#include <cmath>
#include <iostream>

#include "CLI11.hpp"
#include "lesionbench/error.hpp"
#include "lesionbench/synthetic.hpp"

using namespace lesionbench;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic feature-table generator"};
  SyntheticSpec spec;
  std::string emb_out;
  std::string pix_out;
  std::size_t pixel_dim = 256;
  double pixel_separation = 0.25;
  int decimals = -1;
  app.add_option("--counts", spec.class_counts, "benign malignant melanoma counts")->expected(3);
  app.add_option("--sources", spec.num_sources, "Number of synthetic sources");
  app.add_option("--seed", spec.seed, "Seed");
  app.add_option("--dim", spec.embedding.dim, "Embedding dimension");
  app.add_option("--separation", spec.embedding.class_separation, "Pairwise class-mean distance (sigma)");
  app.add_option("--source-shift", spec.embedding.source_shift, "Per-source mean offset (sigma)");
  app.add_option("--backbone", spec.embedding.backbone, "Backbone name written in the header");
  app.add_option("--embeddings-out", emb_out, "Embedding JSONL path")->required();
  app.add_option("--pixels-out", pix_out, "Also write a raw-thumbnail table here");
  app.add_option("--pixel-dim", pixel_dim, "Thumbnail vector length");
  app.add_option("--pixel-separation", pixel_separation, "Class-mean distance in the thumbnails (sigma)");
  app.add_option("--decimals", decimals, "Round written values to this many decimals");
  CLI11_PARSE(app, argc, argv);

  auto rounded = [decimals](const EmbeddingTable& t) {
    if (decimals < 0) return t;
    const double scale = std::pow(10.0, decimals);
    EmbeddingTable out(t.dim(), t.backbone());
    for (auto e : t.entries()) {
      for (auto& v : e.vec) v = std::round(v * scale) / scale;
      out.add(std::move(e));
    }
    return out;
  };

  try {
    if (!pix_out.empty()) {
      spec.pixels = FeatureSpec{pixel_dim, pixel_separation, spec.embedding.source_shift, "raw-thumbnail"};
    }
    const auto fx = make_synthetic_fixture(spec);
    save_embeddings(emb_out, rounded(fx.embeddings));
    if (fx.pixels) save_embeddings(pix_out, rounded(*fx.pixels));
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
