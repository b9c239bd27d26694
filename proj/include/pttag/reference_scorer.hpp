#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pttag/corpus.hpp"
#include "pttag/scorer.hpp"

namespace pttag {

struct LabeledInput {
  ModelInput input;
  LabelSet labels;
};

struct TrainingTarget {
  ScorerKind kind = ScorerKind::kMonolithic;
  // Binary: exactly the target label. Monolithic: the labels to learn; when
  // empty, every label seen in the training data, in name order.
  std::vector<std::string> labels;

  static TrainingTarget binary(std::string label) {
    return {ScorerKind::kBinary, {std::move(label)}};
  }
  static TrainingTarget monolithic(std::vector<std::string> labels = {}) {
    return {ScorerKind::kMonolithic, std::move(labels)};
  }
};

struct TrainingHyper {
  int epochs = 10;
  double learning_rate = 0.1;
  std::uint32_t hash_dim = 1u << 18;
  // Loss weight on positive examples, per label (negatives weigh 1).
  std::map<std::string, double> class_weights;
  double decision_threshold = 0.5;  // used for validation metrics only
};

// Hashed bag-of-tokens logistic model, one weight vector per label.
class ReferenceScorer final : public Scorer {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  ReferenceScorer(ScorerDescriptor descriptor, std::uint32_t hash_dim,
                  std::vector<double> weights);

  const ScorerDescriptor& descriptor() const override { return descriptor_; }
  std::vector<ScoreVector> score_batch(std::span<const ModelInput> inputs) const override;

  std::uint32_t hash_dim() const noexcept { return hash_dim_; }
  // Mean weighted log-loss over the training set after each epoch.
  const std::vector<double>& loss_history() const noexcept { return loss_history_; }

  void save(const std::string& path) const;
  static ReferenceScorer load(const std::string& path);

  // Sorted, de-duplicated hashed feature ids of an assembled input text.
  static std::vector<std::uint32_t> features(std::string_view text, std::uint32_t hash_dim);

 private:
  friend ReferenceScorer train_reference_scorer(std::span<const LabeledInput>,
                                                const TrainingTarget&, const TrainingHyper&,
                                                std::uint64_t, std::span<const LabeledInput>);
  double logit(std::size_t label_index, std::span<const std::uint32_t> feats) const;

  ScorerDescriptor descriptor_;
  std::uint32_t hash_dim_;
  std::vector<double> weights_;  // labels x (hash_dim + 1); the last slot is the bias
  std::vector<double> loss_history_;
};

// Plain SGD over a seeded example order. When eval_set is non-empty the
// descriptor carries per-label validation precision/recall/F1.
ReferenceScorer train_reference_scorer(std::span<const LabeledInput> dataset,
                                       const TrainingTarget& target, const TrainingHyper& hyper,
                                       std::uint64_t seed,
                                       std::span<const LabeledInput> eval_set = {});

}  // namespace pttag
