#include "pttag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "pttag/errors.hpp"

namespace pttag {

using nlohmann::json;

LabelVocabulary::LabelVocabulary(std::vector<LabelEntry> entries,
                                 std::set<std::string> excluded,
                                 std::string base_label)
    : entries_(std::move(entries)),
      excluded_(std::move(excluded)),
      base_label_(std::move(base_label)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const LabelEntry& a, const LabelEntry& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.label < b.label;
            });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& label = entries_[i].label;
    if (label.empty()) throw ConfigError("vocabulary: empty label name");
    if (!index_.emplace(label, i).second) {
      throw ConfigError("vocabulary: duplicate label \"" + label + "\"");
    }
    if (excluded_.count(label)) {
      throw ConfigError("vocabulary: label \"" + label +
                        "\" is both in entries and excluded");
    }
  }
  if (!index_.count(base_label_)) {
    throw ConfigError("vocabulary: base label \"" + base_label_ +
                      "\" missing from entries");
  }
}

bool LabelVocabulary::contains(std::string_view label) const {
  return index_.count(std::string(label)) != 0;
}

bool LabelVocabulary::is_excluded(std::string_view label) const {
  return excluded_.count(std::string(label)) != 0;
}

std::optional<std::size_t> LabelVocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelVocabulary::rank(std::string_view label) const {
  auto r = find(label);
  if (!r) throw DataError("label \"" + std::string(label) + "\" not in vocabulary");
  return *r;
}

std::vector<std::string> LabelVocabulary::labels() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.label);
  return out;
}

LabelVocabulary LabelVocabulary::from_json(const json& j) {
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    throw ConfigError("vocabulary: expected object with an \"entries\" array");
  }
  std::vector<LabelEntry> entries;
  for (const auto& e : j["entries"]) {
    if (!e.contains("label") || !e["label"].is_string() || !e.contains("count") ||
        !e["count"].is_number_unsigned()) {
      throw ConfigError("vocabulary: entries need a string label and a non-negative count");
    }
    entries.push_back({e["label"].get<std::string>(), e["count"].get<std::uint64_t>()});
  }
  std::set<std::string> excluded;
  if (j.contains("excluded")) {
    for (const auto& x : j["excluded"]) excluded.insert(x.get<std::string>());
  }
  std::string base = j.value("base_label", std::string(kDefaultBaseLabel));
  return LabelVocabulary(std::move(entries), std::move(excluded), std::move(base));
}

json LabelVocabulary::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_) entries.push_back({{"label", e.label}, {"count", e.count}});
  return {{"entries", entries}, {"excluded", excluded_}, {"base_label", base_label_}};
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
  for (const auto& [label, n] : other.per_label_count) per_label_count[label] += n;
  for (const auto& [k, n] : other.tags_per_citation_histogram) {
    tags_per_citation_histogram[k] += n;
  }
  total_citations += other.total_citations;
  return *this;
}

json CorpusStats::to_json() const {
  json hist = json::object();
  for (const auto& [k, n] : tags_per_citation_histogram) hist[std::to_string(k)] = n;
  return {{"total_citations", total_citations},
          {"per_label_count", per_label_count},
          {"tags_per_citation_histogram", hist}};
}

json CorrelationMatrix::to_json() const {
  return {{"labels", labels}, {"values", values}};
}

namespace {

std::string required_string(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
    throw SchemaError(field, "line " + std::to_string(line));
  }
  return it->get<std::string>();
}

}  // namespace

Citation parse_citation_record(std::string_view line, std::size_t line_number) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError(line_number, "malformed JSON");
  if (!j.is_object()) throw ParseError(line_number, "expected a JSON object");

  Citation c;
  c.id = required_string(j, "id", line_number);
  c.journal_id = required_string(j, "journal_id", line_number);
  c.title = required_string(j, "title", line_number);
  if (auto it = j.find("abstract"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("abstract", "line " + std::to_string(line_number));
    c.abstract = it->get<std::string>();
  }
  if (auto it = j.find("labels"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw SchemaError("labels", "line " + std::to_string(line_number));
    for (const auto& l : *it) {
      if (!l.is_string()) throw SchemaError("labels", "line " + std::to_string(line_number));
      c.labels.insert(l.get<std::string>());
    }
  }
  return c;
}

json citation_to_json(const Citation& c) {
  return {{"id", c.id},
          {"journal_id", c.journal_id},
          {"title", c.title},
          {"abstract", c.abstract},
          {"labels", c.labels}};
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Citation c = parse_citation_record(line, line_number);
    if (!seen.insert(c.id).second) {
      throw ParseError(line_number, "duplicate citation id \"" + c.id + "\"");
    }
    corpus.push_back(std::move(c));
  }
  return corpus;
}

Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& c : corpus) out << citation_to_json(c).dump() << '\n';
}

LabelVocabulary load_vocabulary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("vocabulary file " + path + " is not valid JSON");
  return LabelVocabulary::from_json(j);
}

CorpusStats compute_corpus_stats(const Corpus& corpus, const LabelVocabulary& vocab) {
  CorpusStats stats;
  for (const auto& e : vocab.entries()) stats.per_label_count[e.label] = 0;
  for (const auto& c : corpus) {
    for (const auto& label : c.labels) {
      if (!vocab.contains(label)) {
        throw DataError("citation " + c.id + ": unknown label \"" + label + "\"");
      }
      ++stats.per_label_count[label];
    }
    ++stats.tags_per_citation_histogram[c.labels.size()];
    ++stats.total_citations;
  }
  return stats;
}

CorrelationMatrix compute_label_correlations(const Corpus& corpus,
                                             const LabelVocabulary& vocab) {
  if (corpus.empty()) throw DataError("label correlations need a non-empty corpus");
  const std::size_t n_labels = vocab.size();
  const auto n = static_cast<double>(corpus.size());

  // Marginal and joint presence counts.
  std::vector<double> marginal(n_labels, 0.0);
  std::vector<std::vector<double>> joint(n_labels, std::vector<double>(n_labels, 0.0));
  std::vector<std::size_t> present;
  for (const auto& c : corpus) {
    present.clear();
    for (const auto& label : c.labels) {
      if (auto r = vocab.find(label)) present.push_back(*r);
    }
    for (std::size_t a : present) {
      marginal[a] += 1.0;
      for (std::size_t b : present) joint[a][b] += 1.0;
    }
  }

  CorrelationMatrix m;
  m.labels = vocab.labels();
  m.values.assign(n_labels, std::vector<double>(n_labels, 0.0));
  for (std::size_t i = 0; i < n_labels; ++i) {
    for (std::size_t j = i; j < n_labels; ++j) {
      const double a1 = marginal[i], b1 = marginal[j];
      const double a0 = n - a1, b0 = n - b1;
      if (a1 == 0 || a0 == 0 || b1 == 0 || b0 == 0) continue;
      const double n11 = joint[i][j];
      const double n10 = a1 - n11;
      const double n01 = b1 - n11;
      const double n00 = n - n11 - n10 - n01;
      double phi = (n11 * n00 - n10 * n01) / std::sqrt(a1 * a0 * b1 * b0);
      phi = std::clamp(phi, -1.0, 1.0);
      if (i == j) phi = 1.0;
      m.values[i][j] = phi;
      m.values[j][i] = phi;
    }
  }
  return m;
}

Corpus normalize_corpus(const Corpus& corpus, const LabelVocabulary& vocab) {
  Corpus out;
  out.reserve(corpus.size());
  const std::string& base = vocab.base_label();
  for (const auto& c : corpus) {
    Citation n = c;
    std::erase_if(n.labels, [&](const std::string& l) { return vocab.is_excluded(l); });
    if (n.labels.size() > 1) n.labels.erase(base);
    out.push_back(std::move(n));
  }
  return out;
}

}  // namespace pttag
