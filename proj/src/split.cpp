#include "lesionbench/split.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "lesionbench/error.hpp"
#include "lesionbench/random.hpp"

namespace lesionbench {

namespace {

std::string to_upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

void check_view(const StratumView& items) {
  if (items.ids.size() != items.labels.size()) {
    throw ValidationError("ids and labels differ in length");
  }
  for (std::size_t l : items.labels) {
    if (l >= items.label_names.size()) throw ValidationError("label index out of range");
  }
}

// Item positions grouped by label, each group shuffled; empty labels are kept
// as empty groups.
std::vector<std::vector<std::size_t>> shuffled_groups(const StratumView& items, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> groups(items.label_names.size());
  for (std::size_t i = 0; i < items.ids.size(); ++i) groups[items.labels[i]].push_back(i);
  SplitMix64 rng(seed);
  for (auto& g : groups) shuffle(std::span<std::size_t>(g), rng);
  return groups;
}

std::vector<std::string> ids_where(const StratumView& items, const std::vector<char>& mask, char want) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.ids.size(); ++i) {
    if (mask[i] == want) out.push_back(items.ids[i]);
  }
  return out;
}

}  // namespace

std::vector<FoldSplit> stratified_kfold(const StratumView& items, std::size_t k, std::uint64_t seed) {
  check_view(items);
  if (k < 2) throw ValidationError("k must be at least 2");
  const auto groups = shuffled_groups(items, seed);
  for (std::size_t l = 0; l < groups.size(); ++l) {
    if (!groups[l].empty() && groups[l].size() < k) {
      const std::string name = to_upper(items.label_names[l]);
      throw StratificationError(name, "class " + name + " has " +
                                    std::to_string(groups[l].size()) + " samples, fewer than k=" +
                                    std::to_string(k));
    }
  }

  std::vector<std::size_t> fold_of(items.ids.size(), 0);
  std::size_t next_fold = 0;
  for (const auto& g : groups) {
    for (std::size_t pos : g) {
      fold_of[pos] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }

  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].fold_index = f;
    folds[f].seed = seed;
  }
  for (std::size_t i = 0; i < items.ids.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].test_ids : folds[f].train_ids).push_back(items.ids[i]);
    }
  }
  return folds;
}

HoldoutSplit stratified_holdout(const StratumView& items, Fraction fraction, std::uint64_t seed) {
  check_view(items);
  if (fraction.denominator == 0 || fraction.numerator == 0 ||
      fraction.numerator >= fraction.denominator) {
    throw ValidationError("test fraction must lie strictly between 0 and 1");
  }
  const auto groups = shuffled_groups(items, seed);
  std::vector<char> is_test(items.ids.size(), 0);
  for (std::size_t l = 0; l < groups.size(); ++l) {
    const auto& g = groups[l];
    if (g.empty()) continue;
    if (g.size() < 2) {
      const std::string name = to_upper(items.label_names[l]);
      throw StratificationError(name, "class " + name + " needs at least 2 samples for a holdout");
    }
    // round half up of n * num / den in integers
    const std::uint64_t n = g.size();
    std::uint64_t n_test = (2 * n * fraction.numerator + fraction.denominator) / (2 * fraction.denominator);
    n_test = std::clamp<std::uint64_t>(n_test, 1, n - 1);
    for (std::uint64_t i = 0; i < n_test; ++i) is_test[g[i]] = 1;
  }
  return HoldoutSplit{ids_where(items, is_test, 0), ids_where(items, is_test, 1)};
}

LabelledIds lesion_labels(const CombinedDataset& dataset) {
  LabelledIds out;
  for (LesionClass c : kLesionClasses) out.names.emplace_back(to_string(c));
  for (const auto& s : dataset.samples()) {
    out.ids.push_back(s.id);
    out.labels.push_back(index_of(s.lesion_class));
  }
  return out;
}

LabelledIds source_labels(const CombinedDataset& dataset) {
  LabelledIds out;
  const auto sources = dataset.sources_in_order();
  for (const auto& s : sources) out.names.push_back(s.name());
  for (const auto& s : dataset.samples()) {
    out.ids.push_back(s.id);
    const auto it = std::find(sources.begin(), sources.end(), s.source);
    out.labels.push_back(static_cast<std::size_t>(it - sources.begin()));
  }
  return out;
}

std::vector<FoldSplit> stratified_kfold(const CombinedDataset& dataset, std::size_t k,
                                        std::uint64_t seed) {
  const auto labelled = lesion_labels(dataset);
  return stratified_kfold(labelled.view(), k, seed);
}

HoldoutSplit stratified_holdout(const CombinedDataset& dataset, Fraction test_fraction,
                                std::uint64_t seed) {
  const auto labelled = lesion_labels(dataset);
  return stratified_holdout(labelled.view(), test_fraction, seed);
}

nlohmann::json folds_to_json(const std::vector<FoldSplit>& folds) {
  nlohmann::json j;
  j["seed"] = folds.empty() ? 0 : folds.front().seed;
  j["k"] = folds.size();
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"fold", f.fold_index}, {"test_ids", f.test_ids}});
  }
  return j;
}

std::vector<FoldSplit> folds_from_json(const nlohmann::json& j, std::span<const std::string> all_ids) {
  try {
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto k = j.at("k").get<std::size_t>();
    const auto& arr = j.at("folds");
    if (arr.size() != k) throw ValidationError("fold count does not match k");
    std::unordered_map<std::string, std::size_t> fold_of;
    std::vector<FoldSplit> folds(k);
    for (const auto& entry : arr) {
      const auto f = entry.at("fold").get<std::size_t>();
      if (f >= k) throw ValidationError("fold index out of range");
      folds[f].fold_index = f;
      folds[f].seed = seed;
      folds[f].test_ids = entry.at("test_ids").get<std::vector<std::string>>();
      for (const auto& id : folds[f].test_ids) {
        if (!fold_of.emplace(id, f).second) throw ValidationError("id '" + id + "' in two test folds");
      }
    }
    const std::unordered_set<std::string> known(all_ids.begin(), all_ids.end());
    for (const auto& [id, f] : fold_of) {
      if (!known.contains(id)) throw ValidationError("unknown id '" + id + "' in splits");
    }
    for (const auto& id : all_ids) {
      const auto it = fold_of.find(id);
      if (it == fold_of.end()) throw ValidationError("id '" + id + "' missing from every test fold");
      for (std::size_t f = 0; f < k; ++f) {
        if (f != it->second) folds[f].train_ids.push_back(id);
      }
    }
    return folds;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed splits JSON: ") + e.what());
  }
}

}  // namespace lesionbench
