#include "lesionbench/embedding.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "lesionbench/error.hpp"

namespace lesionbench {

EmbeddingTable::EmbeddingTable(std::size_t dim, std::string backbone)
    : dim_(dim), backbone_(std::move(backbone)) {
  if (dim_ == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingTable::add(EmbeddingEntry entry) {
  if (entry.id.empty()) throw ValidationError("embedding entry with empty id");
  if (entry.vec.size() != dim_) {
    throw ValidationError("embedding '" + entry.id + "' has length " + std::to_string(entry.vec.size()) +
                          ", expected " + std::to_string(dim_));
  }
  for (double v : entry.vec) {
    if (!std::isfinite(v)) throw ValidationError("embedding '" + entry.id + "' has a non-finite value");
  }
  entry.raw_label = to_lower(trim(entry.raw_label));
  if (entry.raw_label.empty()) throw ValidationError("embedding '" + entry.id + "' has an empty raw_label");
  const std::string key = prefixed_id(entry.source, entry.id);
  if (!index_.emplace(key, entries_.size()).second) {
    throw ValidationError("duplicate embedding id '" + key + "'");
  }
  entries_.push_back(std::move(entry));
}

const std::vector<double>& EmbeddingTable::at(const std::string& sample_id) const {
  const auto it = index_.find(sample_id);
  if (it == index_.end()) throw ValidationError("no feature vector for sample '" + sample_id + "'");
  return entries_[it->second].vec;
}

CombinedDataset EmbeddingTable::to_dataset(const LabelGrouping& grouping) const {
  std::vector<SampleRecord> records;
  records.reserve(entries_.size());
  for (std::size_t row = 0; row < entries_.size(); ++row) {
    const auto& e = entries_[row];
    records.push_back({prefixed_id(e.source, e.id), e.source, e.raw_label, grouping.group(e.raw_label),
                       EmbeddingRef{row}});
  }
  return CombinedDataset(std::move(records), grouping);
}

EmbeddingTable read_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  auto parse = [&]() {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
  };

  if (!next_line()) throw ParseError(1, "missing emb-jsonl header");
  const auto header = parse();
  EmbeddingTable table = [&] {
    try {
      if (header.at("format").get<std::string>() != "emb-jsonl") throw ParseError(line_no, "format is not emb-jsonl");
      return EmbeddingTable(header.at("dim").get<std::size_t>(), header.at("backbone").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad header: ") + e.what());
    }
  }();

  while (next_line()) {
    const auto j = parse();
    EmbeddingEntry entry{"", Source::isic2019(), "", {}};
    try {
      entry.id = j.at("id").get<std::string>();
      entry.source = Source::parse(j.at("source").get<std::string>());
      entry.raw_label = j.at("raw_label").get<std::string>();
      entry.vec = j.at("vec").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad entry: ") + e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      table.add(std::move(entry));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file " + path.string());
  return read_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  using ordered = nlohmann::ordered_json;
  out << ordered{{"format", "emb-jsonl"}, {"dim", table.dim()}, {"backbone", table.backbone()}}.dump() << '\n';
  for (const auto& e : table.entries()) {
    out << ordered{{"id", e.id}, {"source", e.source.name()}, {"raw_label", e.raw_label}, {"vec", e.vec}}.dump()
        << '\n';
  }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature file " + path.string());
  write_embeddings(out, table);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lesionbench
