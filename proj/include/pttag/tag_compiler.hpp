#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pttag/corpus.hpp"
#include "pttag/scorer.hpp"

namespace pttag {

struct Rule {
  enum class Kind { kExcludes, kImplies };
  enum class Keep { kA, kB, kHigherScore };

  Kind kind = Kind::kExcludes;
  std::string a;
  std::string b;
  Keep keep = Keep::kHigherScore;  // EXCLUDES only

  static Rule excludes(std::string a, std::string b, Keep keep = Keep::kHigherScore) {
    return {Kind::kExcludes, std::move(a), std::move(b), keep};
  }
  static Rule implies(std::string a, std::string b) {
    return {Kind::kImplies, std::move(a), std::move(b), Keep::kA};
  }

  nlohmann::json to_json() const;
  static Rule from_json(const nlohmann::json& j);
};

enum class ThresholdMode { kFixed, kPerLabel };

struct CompilerPolicy {
  ThresholdMode threshold_mode = ThresholdMode::kFixed;
  double threshold = 0.5;  // fixed mode, and the per-label fallback
  std::map<std::string, double> thresholds;
  std::optional<double> reliability_min_recall;
  std::size_t max_tags = 6;
  std::vector<Rule> rules;
  bool base_label_fallback = true;

  double threshold_for(const std::string& label) const;
  // Throws PolicyError on out-of-range values or rules naming unknown labels.
  void validate(const LabelVocabulary& vocab) const;

  nlohmann::json to_json() const;
  static CompilerPolicy from_json(const nlohmann::json& j, const LabelVocabulary& vocab);
  static CompilerPolicy load_file(const std::string& path, const LabelVocabulary& vocab);
};

struct TagProvenance {
  double score = 0.0;
  std::optional<double> threshold;  // absent for rule and fallback tags
  std::string source;               // "score", "rule" or "fallback"
  std::vector<std::string> actions;

  bool operator==(const TagProvenance&) const = default;
};

struct TagList {
  std::string citation_id;
  std::vector<std::string> tags;
  std::vector<TagProvenance> provenance;  // parallel to tags
  std::string error;                      // set when the record could not be tagged

  bool ok() const noexcept { return error.empty(); }
  bool operator==(const TagList&) const = default;
  nlohmann::json to_json() const;
};

// Reliability filter -> threshold -> rules -> prevalence-ordered truncation
// -> base-label fallback.
TagList compile_tags(const ScoreVector& scores, const CompilerPolicy& policy,
                     const LabelVocabulary& vocab,
                     std::span<const ScorerDescriptor> descriptors = {});

struct TuningObjective {
  enum class Kind { kMaxF1, kRecallAtLeast };
  Kind kind = Kind::kMaxF1;
  double min_recall = 0.0;

  static TuningObjective max_f1() { return {}; }
  static TuningObjective recall_at_least(double r) { return {Kind::kRecallAtLeast, r}; }
};

struct ThresholdTuning {
  std::map<std::string, double> thresholds;
  std::vector<std::string> warnings;
};

// Per-label sweep over every observed score plus 0 and 1 (predict when
// score >= threshold). max_f1 maximizes F1; recall_at_least maximizes
// precision among thresholds whose recall reaches the target. Ties go to
// the lowest threshold.
ThresholdTuning tune_thresholds(std::span<const ScoreVector> scores, std::span<const Citation> gold,
                                const TuningObjective& objective);

}  // namespace pttag
