#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pttag/corpus.hpp"
#include "pttag/input_assembler.hpp"
#include "pttag/scorer.hpp"
#include "pttag/tag_compiler.hpp"
#include "pttag/text_normalizer.hpp"

namespace pttag {

enum class Architecture { kMonolithic, kEnsemble };

struct PipelineConfig {
  std::string corpus_path;
  std::string vocab_path;
  std::string policy_path;
  std::string symbol_map_path;  // empty: built-in table
  // Scorer files (.ptsc), "stub" (monolithic over the vocabulary) or
  // "stub:<label>" (binary).
  std::vector<std::string> scorers;
  std::string sidecar_address;  // tcp:host:port or stdio:command
  Architecture architecture = Architecture::kMonolithic;
  std::size_t token_budget = kDefaultTokenBudget;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t batch_size = 256;
  double stub_cost_us = 0.0;  // per-input cost of stub scorers

  void validate() const;
  // Keys mirror the field names; "architecture" is "monolithic" or "ensemble".
  // With validate=false the caller must validate() after applying overrides.
  static PipelineConfig from_json(const nlohmann::json& j, bool validate = true);
  static PipelineConfig load_file(const std::string& path, bool validate = true);
};

// Everything needed to tag citations, loaded and validated once. Immutable
// after construction and safe to share between worker threads.
struct TaggingEngine {
  LabelVocabulary vocab;
  CompilerPolicy policy;
  SymbolMap symbols = SymbolMap::defaults();
  std::shared_ptr<const Tokenizer> tokenizer = std::make_shared<WhitespaceTokenizer>();
  std::vector<ScorerPtr> scorers;
  Architecture architecture = Architecture::kMonolithic;
  std::size_t token_budget = kDefaultTokenBudget;

  std::vector<ScorerDescriptor> descriptors() const;
  // Throws ConfigError when the scorer set does not fit the architecture.
  void validate() const;
  // Scores assembled inputs with the configured architecture.
  std::vector<ScoreVector> score(std::span<const ModelInput> inputs,
                                 std::vector<double>* per_scorer_seconds = nullptr) const;
};

// Resolves a scorer spec (see PipelineConfig::scorers).
ScorerPtr load_scorer(const std::string& spec, const LabelVocabulary& vocab,
                      double stub_cost_us = 0.0);

// Loads vocabulary, policy, symbol map and scorers. The sidecar address falls
// back to the PT_SIDECAR_ADDR environment variable.
TaggingEngine load_engine(const PipelineConfig& config);

// Applies text normalization to title and abstract.
Citation normalize_citation_text(const Citation& c, const SymbolMap& symbols);

// normalize -> assemble -> score -> compile, in batches spread over
// `workers` threads. Output order matches input order for any worker count.
// Records that fail come back with TagList::error set.
std::vector<TagList> run_tagging(const TaggingEngine& engine, std::span<const Citation> corpus,
                                 std::size_t workers = 1, std::size_t batch_size = 256);

void write_taglists(std::ostream& out, std::span<const TagList> tags);
std::vector<TagList> read_taglists(std::istream& in);

struct BenchReport {
  std::size_t citations = 0;
  double seconds = 0.0;
  double citations_per_second = 0.0;
  std::map<std::string, double> stage_seconds;  // normalize, assemble, score, compile
  std::vector<std::pair<std::string, double>> per_classifier_seconds;  // ensembles only

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Times the stages one after another over the whole corpus on the calling
// thread. Throws DataError("empty benchmark") for an empty corpus.
BenchReport bench(const TaggingEngine& engine, std::span<const Citation> corpus,
                  std::size_t batch_size = 256);

// Citations with vocabulary-driven label sets and text containing cue words
// for their labels, so trainable scorers have signal to learn.
Corpus make_synthetic_corpus(std::size_t n, const LabelVocabulary& vocab, std::uint64_t seed);

// Cue word that make_synthetic_corpus plants for a label.
std::string synthetic_cue(const std::string& label);

}  // namespace pttag
