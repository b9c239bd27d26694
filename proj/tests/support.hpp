// Shared fixtures and brute-force oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "pttag/corpus.hpp"
#include "pttag/evaluator.hpp"
#include "pttag/prf.hpp"
#include "pttag/rng.hpp"
#include "pttag/scorer.hpp"

namespace pttag::testing {

inline Citation cite(std::string id, LabelSet labels = {}, std::string title = "T",
                     std::string abstract = "", std::string journal = "J1") {
  return {std::move(id), std::move(journal), std::move(title), std::move(abstract), std::move(labels)};
}

// Vocabulary over labels, most prevalent first as given; base label first.
inline LabelVocabulary vocab_of(const std::vector<std::string>& labels_by_prevalence,
                                std::set<std::string> excluded = {},
                                std::string base = "Journal Article") {
  std::vector<LabelEntry> entries;
  std::uint64_t count = 1000 * labels_by_prevalence.size();
  for (const auto& l : labels_by_prevalence) entries.push_back({l, count -= 1000});
  return LabelVocabulary(std::move(entries), std::move(excluded), std::move(base));
}

// ---------------------------------------------------------------------------
// Published fixtures

struct LegacyRow {
  const char* label;
  double precision, recall, f1;
};

// Per-label precision/recall/F1 of the legacy indexing system (40K sample).
inline constexpr std::array<LegacyRow, 25> kLegacyPerLabel{{
    {"Address", 1.00, 0.25, 0.40},
    {"Case Reports", 0.90, 0.49, 0.64},
    {"Clinical Trial", 0.25, 0.01, 0.02},
    {"Clinical Trial Protocol", 0.49, 0.48, 0.48},
    {"Clinical Trial, Phase I", 0.75, 0.39, 0.51},
    {"Clinical Trial, Phase II", 0.81, 0.48, 0.60},
    {"Clinical Trial, Phase III", 0.84, 0.49, 0.62},
    {"Clinical Trial, Phase IV", 1.00, 0.18, 0.31},
    {"Congress", 1.00, 0.09, 0.16},
    {"Controlled Clinical Trial", 0.11, 0.05, 0.07},
    {"Equivalence Trial", 0.50, 0.07, 0.13},
    {"Historical Article", 0.99, 0.48, 0.65},
    {"Interview", 1.00, 0.17, 0.29},
    {"Meta-Analysis", 0.83, 0.86, 0.85},
    {"Multicenter Study", 0.81, 0.33, 0.47},
    {"Observational Study", 0.82, 0.45, 0.58},
    {"Observational Study, Veterinary", 0.33, 0.67, 0.44},
    {"Practice Guideline", 0.50, 0.03, 0.05},
    {"Pragmatic Clinical Trial", 0.50, 0.10, 0.17},
    {"Randomized Controlled Trial", 0.81, 0.71, 0.76},
    {"Randomized Controlled Trial, Veterinary", 0.36, 0.45, 0.40},
    {"Review", 0.80, 0.55, 0.65},
    {"Systematic Review", 0.93, 0.80, 0.86},
    {"Twin Study", 0.50, 0.12, 0.19},
    {"Video-Audio Media", 0.46, 0.08, 0.14},
}};

inline constexpr double kLegacyMacroP = 0.84, kLegacyMacroR = 0.53, kLegacyMacroF1 = 0.64;

struct PartitionRow {
  const char* label;
  std::uint64_t train, eval, test;
  std::uint64_t total() const { return train + eval + test; }
};

// Label counts of a multi-label 90/5/5 partition of the full corpus.
inline constexpr std::array<PartitionRow, 20> kPartitionCounts{{
    {"Journal Article", 3149302, 156609, 155659},
    {"Review", 578756, 28772, 28519},
    {"Case Reports", 286904, 14251, 14169},
    {"Comparative Study", 174052, 11098, 11207},
    {"Randomized Controlled Trial", 129762, 6481, 6524},
    {"Letter", 112068, 5688, 5510},
    {"Multicenter Study", 110179, 5488, 5535},
    {"Systematic Review", 97789, 4770, 4850},
    {"Observational Study", 89627, 4425, 4448},
    {"Editorial", 79554, 3846, 3913},
    {"Meta-Analysis", 75961, 3713, 3780},
    {"Evaluation Study", 46586, 2330, 2391},
    {"Clinical Trial", 35509, 1776, 1819},
    {"Historical Article", 35177, 1660, 1723},
    {"Validation Study", 31471, 1544, 1515},
    {"Video-Audio Media", 22249, 1102, 1155},
    {"Introductory Journal Article", 18475, 914, 890},
    {"News", 16017, 760, 737},
    {"Clinical Trial, Phase II", 11155, 575, 614},
    {"Biography", 10899, 513, 555},
}};

inline LabelVocabulary partition_vocab() {
  std::vector<LabelEntry> entries;
  for (const auto& r : kPartitionCounts) entries.push_back({r.label, r.total()});
  return LabelVocabulary(std::move(entries), {});
}

// A corpus whose per-label counts are the table totals divided by `scale`.
// A quarter of the specific-label citations carry a second label, so the
// split has real multi-label structure; base-label citations carry only it.
inline Corpus partition_corpus(std::uint64_t seed, std::uint64_t scale = 100) {
  Rng rng(seed);
  std::vector<std::string> pool;
  for (std::size_t i = 1; i < kPartitionCounts.size(); ++i) {
    pool.insert(pool.end(), kPartitionCounts[i].total() / scale, kPartitionCounts[i].label);
  }
  rng.shuffle(std::span(pool));
  Corpus corpus;
  std::size_t k = 0;
  auto next_id = [&] { return "c" + std::to_string(corpus.size()); };
  while (k < pool.size()) {
    LabelSet labels{pool[k++]};
    if (k < pool.size() && pool[k] != *labels.begin() && rng.uniform_index(4) == 0) {
      labels.insert(pool[k++]);
    }
    corpus.push_back(cite(next_id(), std::move(labels)));
  }
  for (std::uint64_t i = 0; i < kPartitionCounts[0].total() / scale; ++i) {
    corpus.push_back(cite(next_id(), {kPartitionCounts[0].label}));
  }
  rng.shuffle(std::span(corpus));
  return corpus;
}

// ---------------------------------------------------------------------------
// Brute-force oracles

// Pairwise definition: every (positive, negative) pair, ties worth 1/2.
inline double brute_auc_roc(std::span<const ScoredExample> ex) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : ex) {
    if (!p.positive) continue;
    for (const auto& n : ex) {
      if (n.positive) continue;
      pairs += 1.0;
      wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Enumerates every distinct score as a threshold (predict score >= t), high
// to low, and sums (recall gain) x (precision at that threshold).
inline double brute_average_precision(std::span<const ScoredExample> ex) {
  std::set<double, std::greater<>> thresholds;
  double positives = 0.0;
  for (const auto& e : ex) {
    thresholds.insert(e.score);
    positives += e.positive;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (const auto& e : ex) {
      if (e.score >= t) {
        predicted += 1.0;
        tp += e.positive;
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// Per-label tallies by direct membership tests.
struct Tally {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline std::map<std::string, Tally> brute_tally(const std::vector<std::set<std::string>>& predicted,
                                                const std::vector<std::set<std::string>>& gold,
                                                const std::vector<std::string>& labels) {
  std::map<std::string, Tally> out;
  for (const auto& l : labels) {
    Tally& t = out[l];
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool p = predicted[i].count(l) > 0, g = gold[i].count(l) > 0;
      if (p && g) ++t.tp;
      else if (p) ++t.fp;
      else if (g) ++t.fn;
      else ++t.tn;
    }
  }
  return out;
}

inline double ratio_or_zero(double a, double b) { return b > 0 ? a / b : 0.0; }

// ---------------------------------------------------------------------------
// Files and processes

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "pttag-test-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream(path, std::ios::binary) << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs through /bin/sh, capturing standard output.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

}  // namespace pttag::testing
