#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pttag/corpus.hpp"
#include "pttag/prf.hpp"
#include "pttag/scorer.hpp"
#include "pttag/tag_compiler.hpp"

namespace pttag {

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct ConfusionCounts {
  std::vector<std::string> labels;
  std::vector<Confusion> counts;  // parallel to labels
  std::uint64_t citations = 0;
};

// Tallies per-label decisions over aligned predictions and gold records.
// Labels outside `labels` are ignored; records carrying an error count as
// predicting nothing.
ConfusionCounts confusion_counts(std::span<const TagList> predicted, std::span<const Citation> gold,
                                 std::span<const std::string> labels);
// Same over every vocabulary label; unknown labels raise DataError.
ConfusionCounts confusion_counts(std::span<const TagList> predicted, std::span<const Citation> gold,
                                 const LabelVocabulary& vocab);

struct LabelMetrics {
  Prf prf;
  std::uint64_t support = 0;  // tp + fn
};

struct MetricReport {
  std::map<std::string, LabelMetrics> per_label;
  std::vector<std::string> label_order;
  Prf macro;
  Prf micro;
  // Σ(tp+tn) / Σ(tp+fp+fn+tn) over every per-label decision.
  double cumulative_accuracy = 0.0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

MetricReport metric_report(const ConfusionCounts& counts);

// Unweighted means of precision, recall and F1 over the rows.
Prf macro_average(std::span<const Prf> rows);

struct ScoredExample {
  double score = 0.0;
  bool positive = false;
};

// P(random positive outscores random negative), ties counted 1/2.
double auc_roc(std::span<const ScoredExample> examples);
// Step-wise average precision over descending distinct scores.
double auc_pr(std::span<const ScoredExample> examples);

// Scores of one label across citations, paired with gold membership.
std::vector<ScoredExample> scored_examples(std::span<const ScoreVector> scores,
                                           std::span<const Citation> gold,
                                           const std::string& label);

struct SweepGrid {
  std::vector<std::size_t> max_tags{1, 2, 3, 4, 5, 6};
  std::vector<double> reliability_thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
};

struct SweepRow {
  std::size_t max_tags = 0;
  double reliability_threshold = 0.0;
  std::size_t num_classes = 0;
  double cumulative_accuracy = 0.0;
  double cumulative_precision = 0.0;
  double cumulative_recall = 0.0;
  double micro_f1 = 0.0;

  bool operator==(const SweepRow&) const = default;
};

// Labels scored by `members` whose validation recall reaches `min_recall`
// (labels without validation metrics always survive), in vocabulary order.
std::vector<std::string> surviving_labels(std::span<const ScorerDescriptor> members,
                                          const LabelVocabulary& vocab, double min_recall);

// One row per (max_tags, reliability threshold) cell, max_tags outermost.
// Each cell compiles tags with the base policy adjusted to the cell and
// evaluates micro metrics over that cell's surviving labels.
std::vector<SweepRow> evaluate_run(std::span<const ScoreVector> scores,
                                   std::span<const Citation> gold,
                                   std::span<const ScorerDescriptor> members,
                                   const CompilerPolicy& base_policy, const LabelVocabulary& vocab,
                                   const SweepGrid& grid = {});

void sort_by_micro_f1(std::vector<SweepRow>& rows);
nlohmann::json sweep_to_json(std::span<const SweepRow> rows);
std::string sweep_to_text(std::span<const SweepRow> rows);

}  // namespace pttag
