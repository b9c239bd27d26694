#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace pttag {

using LabelSet = std::set<std::string>;

struct Citation {
  std::string id;
  std::string journal_id;
  std::string title;
  std::string abstract;
  LabelSet labels;

  bool operator==(const Citation&) const = default;
};

using Corpus = std::vector<Citation>;

struct LabelEntry {
  std::string label;
  std::uint64_t count = 0;

  bool operator==(const LabelEntry&) const = default;
};

// Ordered set of in-scope labels, most prevalent first (ties by name).
class LabelVocabulary {
 public:
  static constexpr std::string_view kDefaultBaseLabel = "Journal Article";

  LabelVocabulary() = default;
  // Throws ConfigError when an invariant does not hold.
  LabelVocabulary(std::vector<LabelEntry> entries, std::set<std::string> excluded,
                  std::string base_label = std::string(kDefaultBaseLabel));

  const std::vector<LabelEntry>& entries() const noexcept { return entries_; }
  const std::set<std::string>& excluded() const noexcept { return excluded_; }
  const std::string& base_label() const noexcept { return base_label_; }
  std::size_t size() const noexcept { return entries_.size(); }

  bool contains(std::string_view label) const;
  bool is_excluded(std::string_view label) const;
  // Position in prevalence order; throws DataError for unknown labels.
  std::size_t rank(std::string_view label) const;
  std::optional<std::size_t> find(std::string_view label) const;
  std::vector<std::string> labels() const;

  static LabelVocabulary from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  std::vector<LabelEntry> entries_;
  std::set<std::string> excluded_;
  std::string base_label_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct CorpusStats {
  std::map<std::string, std::uint64_t> per_label_count;
  std::map<std::size_t, std::uint64_t> tags_per_citation_histogram;
  std::uint64_t total_citations = 0;

  bool operator==(const CorpusStats&) const = default;
  CorpusStats& operator+=(const CorpusStats& other);
  nlohmann::json to_json() const;
};

struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;

  double at(std::size_t i, std::size_t j) const { return values[i][j]; }
  nlohmann::json to_json() const;
};

// JSONL record codec. line_number is used only in error messages.
Citation parse_citation_record(std::string_view line, std::size_t line_number = 1);
nlohmann::json citation_to_json(const Citation& c);

// Reads every non-blank line; rejects duplicate ids.
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);

LabelVocabulary load_vocabulary_file(const std::string& path);

CorpusStats compute_corpus_stats(const Corpus& corpus, const LabelVocabulary& vocab);

// Phi coefficient for every pair of vocabulary labels. Zero-variance labels
// get 0 everywhere, including the diagonal.
CorrelationMatrix compute_label_correlations(const Corpus& corpus,
                                             const LabelVocabulary& vocab);

// Drops excluded labels, then removes the base label from citations that
// still carry something more specific.
Corpus normalize_corpus(const Corpus& corpus, const LabelVocabulary& vocab);

}  // namespace pttag
