#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lesionbench/manifest.hpp"

namespace lesionbench {

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::string> train_ids;  // dataset order
  std::vector<std::string> test_ids;   // dataset order
  std::uint64_t seed = 0;

  friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

// Integer-labelled items to stratify. labels[i] indexes label_names.
struct StratumView {
  std::span<const std::string> ids;
  std::span<const std::size_t> labels;
  std::span<const std::string> label_names;
};

// Within each label (ascending label index) the items are Fisher-Yates
// shuffled with one SplitMix64(seed) stream, then dealt round-robin to folds.
// Dealing continues from the fold where the previous label stopped, so
// remainders spread over folds. Throws StratificationError naming the label
// when a present label has fewer than k items.
std::vector<FoldSplit> stratified_kfold(const StratumView& items, std::size_t k, std::uint64_t seed);
std::vector<FoldSplit> stratified_kfold(const CombinedDataset& dataset, std::size_t k,
                                        std::uint64_t seed);

struct Fraction {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;
};

struct HoldoutSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  friend bool operator==(const HoldoutSplit&, const HoldoutSplit&) = default;
};

// Per label: test size = round-half-up(n * fraction), at least 1 and at most
// n - 1. Throws ValidationError for a fraction outside (0,1) and
// StratificationError for a label with fewer than 2 items.
HoldoutSplit stratified_holdout(const StratumView& items, Fraction test_fraction, std::uint64_t seed);
HoldoutSplit stratified_holdout(const CombinedDataset& dataset, Fraction test_fraction,
                                std::uint64_t seed);

// {"seed":..,"k":..,"folds":[{"fold":0,"test_ids":[..]},..]}
nlohmann::json folds_to_json(const std::vector<FoldSplit>& folds);
// Inverse of folds_to_json; train ids are the complement within all_ids.
std::vector<FoldSplit> folds_from_json(const nlohmann::json& j, std::span<const std::string> all_ids);

// Lesion-class labels for a dataset, in the fixed class order.
struct LabelledIds {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  std::vector<std::string> names;
  StratumView view() const { return {ids, labels, names}; }
};
LabelledIds lesion_labels(const CombinedDataset& dataset);
// Source labels, indexed by order of first appearance.
LabelledIds source_labels(const CombinedDataset& dataset);

}  // namespace lesionbench
