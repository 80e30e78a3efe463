#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lesionbench/classes.hpp"
#include "lesionbench/manifest.hpp"

namespace lesionbench {

struct EmbeddingEntry {
  std::string id;  // local id, as written in the file
  Source source;
  std::string raw_label;
  std::vector<double> vec;
};

// Fixed-dimension feature vectors keyed by prefixed sample id
// ("<source>/<id>"). Holds either backbone embeddings or flattened thumbnails.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, std::string backbone);

  // Throws ValidationError on a wrong length, non-finite value or duplicate id.
  void add(EmbeddingEntry entry);

  std::size_t dim() const noexcept { return dim_; }
  const std::string& backbone() const noexcept { return backbone_; }
  const std::vector<EmbeddingEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  bool contains(const std::string& sample_id) const { return index_.contains(sample_id); }
  // Throws ValidationError naming the id when absent.
  const std::vector<double>& at(const std::string& sample_id) const;

  // One SampleRecord per entry in file order, payload = row index.
  CombinedDataset to_dataset(const LabelGrouping& grouping = {}) const;

 private:
  std::size_t dim_;
  std::string backbone_;
  std::vector<EmbeddingEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// emb-jsonl: header {"format":"emb-jsonl","dim":d,"backbone":"name"} then one
// {"id","source","raw_label","vec"} object per line. Throws ParseError with a
// 1-based line number or ValidationError.
EmbeddingTable read_embeddings(std::istream& in);
// Throws IoError when the file cannot be opened.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

void write_embeddings(std::ostream& out, const EmbeddingTable& table);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

}  // namespace lesionbench
