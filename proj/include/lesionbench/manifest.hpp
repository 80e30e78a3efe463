#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lesionbench/classes.hpp"

namespace lesionbench {

// Payload is opaque to the manifest layer: either a path to pixels or a row
// index into an embedding table.
struct PixelRef {
  std::string path;
  friend bool operator==(const PixelRef&, const PixelRef&) = default;
};
struct EmbeddingRef {
  std::size_t row = 0;
  friend bool operator==(const EmbeddingRef&, const EmbeddingRef&) = default;
};
using Payload = std::variant<PixelRef, EmbeddingRef>;

// A payload cell of the form "#<n>" is an embedding row, anything else a path.
Payload parse_payload(std::string_view cell);

// Raw-label -> lesion-class grouping rule. The malignant set is configurable;
// melanoma detection is substring based.
class LabelGrouping {
 public:
  LabelGrouping();  // default malignant set
  explicit LabelGrouping(std::set<std::string> malignant_labels);

  static const std::set<std::string>& default_malignant_labels();

  LesionClass group(std::string_view raw_label) const;
  const std::set<std::string>& malignant_labels() const noexcept { return malignant_; }

 private:
  std::set<std::string> malignant_;
};

// Uses the default grouping rule.
LesionClass group_label(std::string_view raw_label);

struct SampleRecord {
  std::string id;
  Source source;
  std::string raw_label;
  LesionClass lesion_class;
  Payload payload;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// Parses `id,raw_label,payload` CSV. Labels are trimmed and lowercased before
// grouping. Throws ParseError (line numbers are 1-based, header is line 1) or
// ValidationError.
std::vector<SampleRecord> parse_manifest(std::istream& in, const Source& source,
                                         const LabelGrouping& grouping = {});

std::string prefixed_id(const Source& source, std::string_view local_id);

class CombinedDataset {
 public:
  CombinedDataset() = default;
  // Takes records whose ids are already final; recomputes counts and checks
  // id uniqueness and grouping consistency.
  CombinedDataset(std::vector<SampleRecord> samples, const LabelGrouping& grouping = {});

  const std::vector<SampleRecord>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  const std::map<LesionClass, std::size_t>& class_counts() const noexcept { return class_counts_; }
  const std::map<Source, std::size_t>& source_counts() const noexcept { return source_counts_; }
  std::size_t class_count(LesionClass c) const;

  // Sources in order of first appearance.
  std::vector<Source> sources_in_order() const;

 private:
  std::vector<SampleRecord> samples_;
  std::map<LesionClass, std::size_t> class_counts_;
  std::map<Source, std::size_t> source_counts_;
};

// Concatenates manifests in order, prefixing ids with the source name.
// Throws ValidationError on an empty input or a duplicate prefixed id.
CombinedDataset combine(const std::vector<std::pair<Source, std::vector<SampleRecord>>>& manifests,
                        const LabelGrouping& grouping = {});

}  // namespace lesionbench
