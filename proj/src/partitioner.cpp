#include "pttag/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "pttag/errors.hpp"
#include "pttag/rng.hpp"

namespace pttag {

using nlohmann::json;

namespace {

constexpr double kTieEpsilon = 1e-9;
constexpr std::size_t kSplits = 3;

// Index of the best candidate by (primary, secondary) descending, with
// remaining ties resolved by the generator.
std::size_t pick_split(const std::array<double, kSplits>& primary,
                       const std::array<double, kSplits>& secondary, Rng& rng) {
  std::array<std::size_t, kSplits> best{};
  std::size_t n_best = 0;
  for (std::size_t p = 0; p < kSplits; ++p) {
    if (n_best == 0) {
      best[n_best++] = p;
      continue;
    }
    const std::size_t b = best[0];
    double d = primary[p] - primary[b];
    if (std::abs(d) <= kTieEpsilon) d = secondary[p] - secondary[b];
    if (std::abs(d) <= kTieEpsilon) {
      best[n_best++] = p;
    } else if (d > 0) {
      best[0] = p;
      n_best = 1;
    }
  }
  return n_best == 1 ? best[0] : best[rng.uniform_index(n_best)];
}

}  // namespace

void SplitRatios::validate() const {
  for (double r : as_array()) {
    if (!(r > 0.0)) throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(train + eval + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

const std::vector<std::string>& Partition::ids(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kEval: return eval;
    case Split::kTest: return test;
  }
  return test;
}

json Partition::to_json() const {
  return {{"train", train},
          {"eval", eval},
          {"test", test},
          {"seed", seed},
          {"ratios", {ratios.train, ratios.eval, ratios.test}}};
}

Partition Partition::from_json(const json& j) {
  Partition p;
  try {
    p.train = j.at("train").get<std::vector<std::string>>();
    p.eval = j.at("eval").get<std::vector<std::string>>();
    p.test = j.at("test").get<std::vector<std::string>>();
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("ratios")) {
      const auto& r = j.at("ratios");
      p.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("partition file: ") + e.what());
  }
  return p;
}

Partition stratified_split(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  if (corpus.empty()) throw DataError("cannot split an empty corpus");

  Rng rng(seed);
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));

  // Dense label ids in name order so label selection ties are deterministic.
  std::map<std::string, std::size_t> label_ids;
  for (const auto& c : corpus) {
    for (const auto& l : c.labels) label_ids.emplace(l, 0);
  }
  std::size_t next_id = 0;
  for (auto& [name, id] : label_ids) id = next_id++;
  const std::size_t n_labels = label_ids.size();

  std::vector<std::vector<std::size_t>> citation_labels(n);
  std::vector<std::vector<std::size_t>> examples_of(n_labels);  // in shuffled order
  for (std::size_t idx : order) {
    for (const auto& l : corpus[idx].labels) {
      const std::size_t id = label_ids.at(l);
      citation_labels[idx].push_back(id);
      examples_of[id].push_back(idx);
    }
  }

  const auto r = ratios.as_array();
  std::vector<std::array<double, kSplits>> demand(n_labels);
  std::vector<std::size_t> remaining(n_labels);
  for (std::size_t l = 0; l < n_labels; ++l) {
    remaining[l] = examples_of[l].size();
    for (std::size_t p = 0; p < kSplits; ++p) {
      demand[l][p] = r[p] * static_cast<double>(remaining[l]);
    }
  }
  std::array<double, kSplits> capacity{};
  for (std::size_t p = 0; p < kSplits; ++p) capacity[p] = r[p] * static_cast<double>(n);

  constexpr std::size_t kUnassigned = kSplits;
  std::vector<std::size_t> assignment(n, kUnassigned);
  auto assign = [&](std::size_t idx, std::size_t p) {
    assignment[idx] = p;
    capacity[p] -= 1.0;
    for (std::size_t l : citation_labels[idx]) {
      demand[l][p] -= 1.0;
      --remaining[l];
    }
  };

  for (;;) {
    std::size_t label = n_labels;
    for (std::size_t l = 0; l < n_labels; ++l) {
      if (remaining[l] == 0) continue;
      if (label == n_labels || remaining[l] < remaining[label]) label = l;
    }
    if (label == n_labels) break;
    for (std::size_t idx : examples_of[label]) {
      if (assignment[idx] != kUnassigned) continue;
      assign(idx, pick_split(demand[label], capacity, rng));
    }
  }

  const std::array<double, kSplits> no_preference{};
  for (std::size_t idx : order) {
    if (assignment[idx] == kUnassigned) assign(idx, pick_split(capacity, no_preference, rng));
  }

  Partition part;
  part.seed = seed;
  part.ratios = ratios;
  for (std::size_t idx = 0; idx < n; ++idx) {
    auto& bucket = assignment[idx] == 0 ? part.train : assignment[idx] == 1 ? part.eval : part.test;
    bucket.push_back(corpus[idx].id);
  }
  part.per_label_shares = label_shares(part, corpus);
  return part;
}

std::map<std::string, std::array<double, 3>> label_shares(const Partition& partition,
                                                          const Corpus& corpus) {
  std::unordered_map<std::string, std::size_t> split_of;
  for (std::size_t s = 0; s < kSplits; ++s) {
    for (const auto& id : partition.ids(static_cast<Split>(s))) split_of[id] = s;
  }
  std::map<std::string, std::array<double, 3>> counts;
  for (const auto& c : corpus) {
    auto it = split_of.find(c.id);
    if (it == split_of.end()) continue;
    for (const auto& l : c.labels) counts[l][it->second] += 1.0;
  }
  for (auto& [label, v] : counts) {
    const double total = v[0] + v[1] + v[2];
    for (double& x : v) x = 100.0 * x / total;
  }
  return counts;
}

std::vector<ShareDeviation> verify_stratification(const Partition& partition, const Corpus& corpus,
                                                  const LabelVocabulary& vocab,
                                                  double tolerance_pct) {
  std::unordered_set<std::string> corpus_ids;
  for (const auto& c : corpus) corpus_ids.insert(c.id);
  std::unordered_set<std::string> seen;
  for (std::size_t s = 0; s < kSplits; ++s) {
    for (const auto& id : partition.ids(static_cast<Split>(s))) {
      if (!corpus_ids.count(id)) throw IntegrityError("partition lists unknown id " + id);
      if (!seen.insert(id).second) throw IntegrityError("partition lists id " + id + " twice");
    }
  }
  if (seen.size() != corpus_ids.size()) {
    throw IntegrityError("partition covers " + std::to_string(seen.size()) + " of " +
                         std::to_string(corpus_ids.size()) + " citations");
  }

  const double target = 100.0 * partition.ratios.train;
  const auto shares = label_shares(partition, corpus);
  std::vector<ShareDeviation> report;
  for (const auto& e : vocab.entries()) {
    auto it = shares.find(e.label);
    if (it == shares.end()) continue;
    const double dev = std::abs(it->second[0] - target);
    if (dev > tolerance_pct) report.push_back({e.label, it->second, target, dev});
  }
  return report;
}

json BinaryDataset::to_json() const {
  return {{"label", label}, {"positives", positives}, {"negatives", negatives}};
}

BinaryDataset build_binary_dataset(const Corpus& corpus, const std::string& label,
                                   std::uint64_t seed, std::size_t min_size) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (corpus[i].labels.count(label) ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) {
    throw InsufficientDataError("label \"" + label + "\": need at least one positive and one "
                                "negative citation (have " + std::to_string(pos.size()) + " / " +
                                std::to_string(neg.size()) + ")");
  }

  Rng rng(seed);
  const std::size_t wanted = std::max(pos.size(), (min_size + 1) / 2);
  const std::size_t n = std::min(wanted, neg.size());

  std::vector<std::size_t> chosen_pos;
  if (n <= pos.size()) {
    chosen_pos = pos;
    if (n < pos.size()) {
      rng.shuffle(std::span(chosen_pos));
      chosen_pos.resize(n);
      std::sort(chosen_pos.begin(), chosen_pos.end());
    }
  } else {
    chosen_pos = pos;
    while (chosen_pos.size() < n) chosen_pos.push_back(pos[rng.uniform_index(pos.size())]);
  }

  // Group negatives by label set and apportion n by largest remainder.
  std::map<LabelSet, std::vector<std::size_t>> groups;
  for (std::size_t i : neg) groups[corpus[i].labels].push_back(i);
  struct Quota {
    std::vector<std::size_t>* members;
    std::size_t take;
    std::size_t remainder;
  };
  std::vector<Quota> quotas;
  std::size_t allotted = 0;
  for (auto& [key, members] : groups) {
    const std::size_t scaled = n * members.size();
    quotas.push_back({&members, scaled / neg.size(), scaled % neg.size()});
    allotted += quotas.back().take;
  }
  std::vector<std::size_t> by_remainder(quotas.size());
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].remainder > quotas[b].remainder;
  });
  for (std::size_t k = 0; allotted < n; ++k) {
    auto& q = quotas[by_remainder[k % quotas.size()]];
    if (q.take < q.members->size()) {
      ++q.take;
      ++allotted;
    }
  }

  std::vector<std::size_t> chosen_neg;
  for (auto& q : quotas) {
    std::vector<std::size_t> members = *q.members;
    rng.shuffle(std::span(members));
    chosen_neg.insert(chosen_neg.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(q.take));
  }
  std::sort(chosen_neg.begin(), chosen_neg.end());

  BinaryDataset ds;
  ds.label = label;
  for (std::size_t i : chosen_pos) ds.positives.push_back(corpus[i].id);
  for (std::size_t i : chosen_neg) ds.negatives.push_back(corpus[i].id);
  return ds;
}

Corpus select_citations(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  Corpus out;
  for (const auto& c : corpus) {
    if (wanted.count(c.id)) out.push_back(c);
  }
  return out;
}

}  // namespace pttag
