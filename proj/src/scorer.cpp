#include "pttag/scorer.hpp"

#include <set>

#include "pttag/errors.hpp"
#include "pttag/hash.hpp"

namespace pttag {

using nlohmann::json;

void ScorerDescriptor::validate() const {
  if (kind == ScorerKind::kBinary && vocabulary.size() != 1) {
    throw ConfigError("binary scorer \"" + name + "\" must declare exactly one label");
  }
  if (std::set<std::string>(vocabulary.begin(), vocabulary.end()).size() != vocabulary.size()) {
    throw ConfigError("scorer \"" + name + "\" declares a label twice");
  }
}

std::optional<Prf> ScorerDescriptor::metrics_for(const std::string& label) const {
  if (!validation_metrics) return std::nullopt;
  auto it = validation_metrics->find(label);
  if (it == validation_metrics->end()) return std::nullopt;
  return it->second;
}

json ScorerDescriptor::to_json() const {
  json j = {{"name", name},
            {"kind", kind == ScorerKind::kBinary ? "binary" : "monolithic"},
            {"vocabulary", vocabulary}};
  if (validation_metrics) {
    json m = json::object();
    for (const auto& [label, prf] : *validation_metrics) {
      m[label] = {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
    }
    j["validation_metrics"] = m;
  }
  return j;
}

ScorerDescriptor ScorerDescriptor::from_json(const json& j) {
  ScorerDescriptor d;
  try {
    d.name = j.value("name", std::string{});
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "binary") {
      d.kind = ScorerKind::kBinary;
    } else if (kind == "monolithic") {
      d.kind = ScorerKind::kMonolithic;
    } else {
      throw ConfigError("unknown scorer kind \"" + kind + "\"");
    }
    d.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    if (auto it = j.find("validation_metrics"); it != j.end() && !it->is_null()) {
      std::map<std::string, Prf> metrics;
      for (const auto& [label, m] : it->items()) {
        metrics[label] = {m.at("precision").get<double>(), m.at("recall").get<double>(),
                          m.at("f1").get<double>()};
      }
      d.validation_metrics = std::move(metrics);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scorer descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

json ScoreVector::to_json() const {
  if (!ok()) return {{"id", citation_id}, {"error", error}};
  return {{"id", citation_id}, {"scores", scores}};
}

void validate_ensemble(std::span<const ScorerPtr> scorers) {
  std::set<std::string> seen;
  for (const auto& s : scorers) {
    const auto& d = s->descriptor();
    if (d.kind != ScorerKind::kBinary) {
      throw ConfigError("ensemble member \"" + d.name + "\" is not a binary scorer");
    }
    d.validate();
    if (!seen.insert(d.vocabulary.front()).second) {
      throw ConfigError("ensemble has two scorers for label \"" + d.vocabulary.front() + "\"");
    }
  }
}

std::vector<ScoreVector> ensemble_score(std::span<const ScorerPtr> scorers,
                                        std::span<const ModelInput> inputs,
                                        std::vector<double>* per_scorer_seconds) {
  validate_ensemble(scorers);
  std::vector<ScoreVector> merged(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) merged[i].citation_id = inputs[i].citation_id;
  if (per_scorer_seconds) per_scorer_seconds->assign(scorers.size(), 0.0);
  if (inputs.empty()) return merged;

  for (std::size_t k = 0; k < scorers.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    auto part = scorers[k]->score_batch(inputs);
    if (per_scorer_seconds) {
      (*per_scorer_seconds)[k] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (part.size() != inputs.size()) {
      throw BackendError("scorer \"" + scorers[k]->descriptor().name + "\" returned " +
                         std::to_string(part.size()) + " vectors for " +
                         std::to_string(inputs.size()) + " inputs");
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!merged[i].ok()) continue;
      if (!part[i].ok()) {
        merged[i].error = part[i].error;
        merged[i].scores.clear();
        continue;
      }
      merged[i].scores.merge(part[i].scores);
    }
  }
  return merged;
}

double stub_score(std::string_view label, std::string_view text) {
  const std::uint64_t h = fnv1a64(text, fnv1a64("\x1f", fnv1a64(label)));
  // Finalize so nearby inputs spread over the whole range.
  std::uint64_t x = h;
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

void spin_for(std::chrono::nanoseconds duration) {
  if (duration.count() <= 0) return;
  const auto until = std::chrono::steady_clock::now() + duration;
  while (std::chrono::steady_clock::now() < until) {
  }
}

StubScorer::StubScorer(ScorerDescriptor descriptor, std::chrono::nanoseconds cost_per_input)
    : descriptor_(std::move(descriptor)), cost_(cost_per_input) {
  descriptor_.validate();
}

std::vector<ScoreVector> StubScorer::score_batch(std::span<const ModelInput> inputs) const {
  std::vector<ScoreVector> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    spin_for(cost_);
    ScoreVector v;
    v.citation_id = in.citation_id;
    for (const auto& label : descriptor_.vocabulary) v.scores[label] = stub_score(label, in.text);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace pttag
