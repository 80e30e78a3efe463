#include "lesionbench/manifest.hpp"

#include <charconv>
#include <unordered_set>

#include "lesionbench/error.hpp"

namespace lesionbench {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      return cells;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

Payload parse_payload(std::string_view cell) {
  if (cell.size() > 1 && cell.front() == '#') {
    std::size_t row = 0;
    const char* first = cell.data() + 1;
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, row);
    if (ec == std::errc() && ptr == last) return EmbeddingRef{row};
  }
  return PixelRef{std::string(cell)};
}

const std::set<std::string>& LabelGrouping::default_malignant_labels() {
  static const std::set<std::string> labels = {
      "basal cell carcinoma", "bcc", "squamous cell carcinoma", "scc",
      "actinic keratosis",    "akiec", "ak"};
  return labels;
}

LabelGrouping::LabelGrouping() : malignant_(default_malignant_labels()) {}

LabelGrouping::LabelGrouping(std::set<std::string> malignant_labels) {
  for (const auto& l : malignant_labels) malignant_.insert(to_lower(trim(l)));
}

LesionClass LabelGrouping::group(std::string_view raw_label) const {
  if (raw_label.find("melanoma") != std::string_view::npos &&
      raw_label.find("non-melanoma") == std::string_view::npos) {
    return LesionClass::Melanoma;
  }
  if (malignant_.contains(std::string(raw_label))) return LesionClass::Malignant;
  return LesionClass::Benign;
}

LesionClass group_label(std::string_view raw_label) {
  static const LabelGrouping grouping;
  return grouping.group(raw_label);
}

std::vector<SampleRecord> parse_manifest(std::istream& in, const Source& source,
                                         const LabelGrouping& grouping) {
  std::vector<SampleRecord> records;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (trim(line) != "id,raw_label,payload") {
    throw ParseError(line_no, "expected header 'id,raw_label,payload'");
  }

  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) {
      throw ParseError(line_no, "expected 3 columns, found " + std::to_string(cells.size()));
    }
    std::string id = trim(cells[0]);
    std::string label = to_lower(trim(cells[1]));
    if (id.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty id");
    if (label.empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": empty raw_label");
    }
    if (!seen.insert(id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
    const LesionClass cls = grouping.group(label);
    records.push_back(SampleRecord{std::move(id), source, std::move(label), cls,
                                   parse_payload(trim(cells[2]))});
  }
  return records;
}

std::string prefixed_id(const Source& source, std::string_view local_id) {
  return source.name() + "/" + std::string(local_id);
}

CombinedDataset::CombinedDataset(std::vector<SampleRecord> samples, const LabelGrouping& grouping)
    : samples_(std::move(samples)) {
  for (LesionClass c : kLesionClasses) class_counts_[c] = 0;
  std::unordered_set<std::string> ids;
  for (const auto& s : samples_) {
    if (s.id.empty()) throw ValidationError("sample with empty id");
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
    if (s.raw_label.empty()) throw ValidationError("sample '" + s.id + "' has an empty raw_label");
    if (grouping.group(s.raw_label) != s.lesion_class) {
      throw ValidationError("sample '" + s.id + "' lesion class disagrees with its raw label");
    }
    ++class_counts_[s.lesion_class];
    ++source_counts_[s.source];
  }
}

std::size_t CombinedDataset::class_count(LesionClass c) const {
  const auto it = class_counts_.find(c);
  return it == class_counts_.end() ? 0 : it->second;
}

std::vector<Source> CombinedDataset::sources_in_order() const {
  std::vector<Source> order;
  for (const auto& s : samples_) {
    bool known = false;
    for (const auto& o : order) known = known || o == s.source;
    if (!known) order.push_back(s.source);
  }
  return order;
}

CombinedDataset combine(const std::vector<std::pair<Source, std::vector<SampleRecord>>>& manifests,
                        const LabelGrouping& grouping) {
  if (manifests.empty()) throw ValidationError("combine needs at least one manifest");
  std::vector<SampleRecord> merged;
  std::unordered_set<std::string> ids;
  for (const auto& [source, records] : manifests) {
    for (const auto& r : records) {
      SampleRecord copy = r;
      copy.source = source;
      copy.id = prefixed_id(source, r.id);
      if (!ids.insert(copy.id).second) {
        throw ValidationError("duplicate id after prefixing: '" + copy.id + "'");
      }
      merged.push_back(std::move(copy));
    }
  }
  return CombinedDataset(std::move(merged), grouping);
}

}  // namespace lesionbench
