#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pttag/input_assembler.hpp"
#include "pttag/prf.hpp"

namespace pttag {

enum class ScorerKind { kMonolithic, kBinary };

struct ScorerDescriptor {
  std::string name;
  ScorerKind kind = ScorerKind::kMonolithic;
  std::vector<std::string> vocabulary;
  // Per-label precision/recall/F1 measured on a validation split.
  std::optional<std::map<std::string, Prf>> validation_metrics;

  // Throws ConfigError when a binary descriptor does not have exactly one label.
  void validate() const;
  std::optional<Prf> metrics_for(const std::string& label) const;

  nlohmann::json to_json() const;
  static ScorerDescriptor from_json(const nlohmann::json& j);
};

struct ScoreVector {
  std::string citation_id;
  std::map<std::string, double> scores;
  // Set when the backend could not score this record; scores is then empty.
  std::string error;

  bool ok() const noexcept { return error.empty(); }
  bool operator==(const ScoreVector&) const = default;
  nlohmann::json to_json() const;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual const ScorerDescriptor& descriptor() const = 0;
  // One vector per input, in input order.
  virtual std::vector<ScoreVector> score_batch(std::span<const ModelInput> inputs) const = 0;
};

using ScorerPtr = std::shared_ptr<const Scorer>;

// Throws ConfigError unless every scorer is binary and their labels differ.
void validate_ensemble(std::span<const ScorerPtr> scorers);

// Runs each binary scorer over the whole batch in turn and merges the
// results into one vector per input. When per_scorer_seconds is given it
// receives the wall time spent in each member.
std::vector<ScoreVector> ensemble_score(std::span<const ScorerPtr> scorers,
                                        std::span<const ModelInput> inputs,
                                        std::vector<double>* per_scorer_seconds = nullptr);

// Deterministic pseudo-score in [0,1] for a (label, text) pair.
double stub_score(std::string_view label, std::string_view text);

// Scores every label with stub_score() and spins for `cost_per_input` on each
// input, which makes it a fixed-cost stand-in for a real model.
class StubScorer final : public Scorer {
 public:
  explicit StubScorer(ScorerDescriptor descriptor,
                      std::chrono::nanoseconds cost_per_input = std::chrono::nanoseconds{0});

  const ScorerDescriptor& descriptor() const override { return descriptor_; }
  std::vector<ScoreVector> score_batch(std::span<const ModelInput> inputs) const override;

 private:
  ScorerDescriptor descriptor_;
  std::chrono::nanoseconds cost_;
};

void spin_for(std::chrono::nanoseconds duration);

}  // namespace pttag
