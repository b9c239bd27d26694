#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pttag/corpus.hpp"

namespace pttag {

enum class Split : std::size_t { kTrain = 0, kEval = 1, kTest = 2 };

struct SplitRatios {
  double train = 0.9;
  double eval = 0.05;
  double test = 0.05;

  std::array<double, 3> as_array() const { return {train, eval, test}; }
  // Throws ConfigError unless all are positive and they sum to 1 (within 1e-9).
  void validate() const;
};

struct Partition {
  std::vector<std::string> train;
  std::vector<std::string> eval;
  std::vector<std::string> test;
  // label -> percentage of that label's citations in (train, eval, test)
  std::map<std::string, std::array<double, 3>> per_label_shares;
  std::uint64_t seed = 0;
  SplitRatios ratios;

  const std::vector<std::string>& ids(Split s) const;
  nlohmann::json to_json() const;
  // per_label_shares is not persisted; recompute with label_shares().
  static Partition from_json(const nlohmann::json& j);
};

// Iterative stratification: labels are processed rarest first and each of
// their unassigned citations goes to the split that still needs that label
// most. Deterministic for a given seed.
Partition stratified_split(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed);

// Percentage of each label's citations landing in each split.
std::map<std::string, std::array<double, 3>> label_shares(const Partition& partition,
                                                          const Corpus& corpus);

struct ShareDeviation {
  std::string label;
  std::array<double, 3> shares{};  // percent
  double train_target = 0.0;       // percent
  double deviation = 0.0;          // |train share - target|, percentage points
};

// Labels whose train share misses the target by more than tolerance_pct.
// Throws IntegrityError when the partition does not cover the corpus exactly.
std::vector<ShareDeviation> verify_stratification(const Partition& partition, const Corpus& corpus,
                                                  const LabelVocabulary& vocab,
                                                  double tolerance_pct);

struct BinaryDataset {
  std::string label;
  std::vector<std::string> positives;  // may repeat ids when oversampled
  std::vector<std::string> negatives;

  nlohmann::json to_json() const;
};

// Balanced one-vs-rest dataset for `label`. Positives are oversampled with
// replacement up to min_size / 2; negatives are drawn without replacement,
// proportionally to the label-set groups they belong to.
BinaryDataset build_binary_dataset(const Corpus& corpus, const std::string& label,
                                   std::uint64_t seed, std::size_t min_size = 0);

// Citations of `corpus` whose id is listed, in corpus order.
Corpus select_citations(const Corpus& corpus, const std::vector<std::string>& ids);

}  // namespace pttag
