#include "pttag/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "pttag/errors.hpp"

namespace pttag {

using nlohmann::json;

namespace {

json prf_json(const Prf& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

std::string fixed(double x, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void check_alignment(std::span<const TagList> predicted, std::span<const Citation> gold) {
  if (predicted.size() != gold.size()) {
    throw AlignmentError("have " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold records");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].citation_id != gold[i].id) {
      throw AlignmentError("prediction " + predicted[i].citation_id + " is aligned with gold " +
                           gold[i].id);
    }
  }
}

}  // namespace

ConfusionCounts confusion_counts(std::span<const TagList> predicted, std::span<const Citation> gold,
                                 std::span<const std::string> labels) {
  check_alignment(predicted, gold);
  ConfusionCounts cc;
  cc.labels.assign(labels.begin(), labels.end());
  cc.counts.assign(labels.size(), {});
  cc.citations = gold.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t l = 0; l < labels.size(); ++l) index.emplace(labels[l], l);

  std::vector<std::uint8_t> in_pred(labels.size()), in_gold(labels.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::fill(in_pred.begin(), in_pred.end(), 0);
    std::fill(in_gold.begin(), in_gold.end(), 0);
    if (predicted[i].ok()) {
      for (const auto& t : predicted[i].tags) {
        if (auto it = index.find(t); it != index.end()) in_pred[it->second] = 1;
      }
    }
    for (const auto& g : gold[i].labels) {
      if (auto it = index.find(g); it != index.end()) in_gold[it->second] = 1;
    }
    for (std::size_t l = 0; l < labels.size(); ++l) {
      auto& c = cc.counts[l];
      if (in_pred[l] && in_gold[l]) {
        ++c.tp;
      } else if (in_pred[l]) {
        ++c.fp;
      } else if (in_gold[l]) {
        ++c.fn;
      } else {
        ++c.tn;
      }
    }
  }
  return cc;
}

ConfusionCounts confusion_counts(std::span<const TagList> predicted, std::span<const Citation> gold,
                                 const LabelVocabulary& vocab) {
  for (const auto& p : predicted) {
    for (const auto& t : p.tags) {
      if (!vocab.contains(t)) throw DataError("prediction " + p.citation_id + ": unknown label \"" + t + "\"");
    }
  }
  for (const auto& g : gold) {
    for (const auto& l : g.labels) {
      if (!vocab.contains(l)) throw DataError("gold " + g.id + ": unknown label \"" + l + "\"");
    }
  }
  const auto labels = vocab.labels();
  return confusion_counts(predicted, gold, labels);
}

Prf macro_average(std::span<const Prf> rows) {
  Prf m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.precision += r.precision;
    m.recall += r.recall;
    m.f1 += r.f1;
  }
  const auto n = static_cast<double>(rows.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

MetricReport metric_report(const ConfusionCounts& counts) {
  MetricReport r;
  r.label_order = counts.labels;
  std::vector<Prf> supported;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t l = 0; l < counts.labels.size(); ++l) {
    const auto& c = counts.counts[l];
    LabelMetrics m{prf_from_counts(c.tp, c.fp, c.fn), c.tp + c.fn};
    if (m.support > 0) supported.push_back(m.prf);
    r.per_label[counts.labels[l]] = m;
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    tn += c.tn;
  }
  r.macro = macro_average(supported);
  r.micro = prf_from_counts(tp, fp, fn);
  r.cumulative_accuracy =
      safe_ratio(static_cast<double>(tp + tn), static_cast<double>(tp + fp + fn + tn));
  return r;
}

json MetricReport::to_json() const {
  json labels = json::array();
  for (const auto& name : label_order) {
    const auto& m = per_label.at(name);
    json row = prf_json(m.prf);
    row["label"] = name;
    row["support"] = m.support;
    labels.push_back(row);
  }
  return {{"definition", "macro: mean over labels with support > 0; micro and cumulative: "
                         "summed per-label decisions"},
          {"per_label", labels},
          {"macro", prf_json(macro)},
          {"micro", prf_json(micro)},
          {"cumulative_accuracy", cumulative_accuracy}};
}

std::string MetricReport::to_text() const {
  std::size_t width = std::string("Publication Type").size();
  for (const auto& name : label_order) width = std::max(width, name.size());
  std::ostringstream out;
  auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
  out << "# micro and cumulative metrics sum per-label decisions; macro skips zero-support labels\n";
  out << pad("Publication Type") << "  Precision  Recall  F1-score  Support\n";
  for (const auto& name : label_order) {
    const auto& m = per_label.at(name);
    out << pad(name) << "  " << fixed(m.prf.precision, 2) << "       " << fixed(m.prf.recall, 2)
        << "    " << fixed(m.prf.f1, 2) << "      " << m.support << '\n';
  }
  out << pad("macro") << "  " << fixed(macro.precision, 4) << "     " << fixed(macro.recall, 4)
      << "  " << fixed(macro.f1, 4) << '\n';
  out << pad("micro") << "  " << fixed(micro.precision, 4) << "     " << fixed(micro.recall, 4)
      << "  " << fixed(micro.f1, 4) << '\n';
  out << pad("cumulative acc.") << "  " << fixed(cumulative_accuracy, 4) << '\n';
  return out.str();
}

double auc_roc(std::span<const ScoredExample> examples) {
  std::vector<ScoredExample> sorted(examples.begin(), examples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredExample& a, const ScoredExample& b) { return a.score < b.score; });
  double positives = 0, negatives = 0, rank_sum = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) ++j;
    // Ranks i+1..j share their midrank.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k].positive) {
        positives += 1;
        rank_sum += midrank;
      } else {
        negatives += 1;
      }
    }
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("AUC-ROC needs at least one positive and one negative");
  }
  return (rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives);
}

double auc_pr(std::span<const ScoredExample> examples) {
  std::vector<ScoredExample> sorted(examples.begin(), examples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredExample& a, const ScoredExample& b) { return a.score > b.score; });
  const auto positives = static_cast<double>(
      std::count_if(sorted.begin(), sorted.end(), [](const auto& e) { return e.positive; }));
  if (positives == 0) throw UndefinedMetricError("AUC-PR needs at least one positive");
  double tp = 0, fp = 0, ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].score == sorted[i].score; ++j) {
      (sorted[j].positive ? tp : fp) += 1;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::vector<ScoredExample> scored_examples(std::span<const ScoreVector> scores,
                                           std::span<const Citation> gold,
                                           const std::string& label) {
  if (scores.size() != gold.size()) throw AlignmentError("scores and gold differ in length");
  std::vector<ScoredExample> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].citation_id != gold[i].id) {
      throw AlignmentError("score vector " + scores[i].citation_id + " is aligned with gold " +
                           gold[i].id);
    }
    auto it = scores[i].scores.find(label);
    if (it == scores[i].scores.end()) continue;
    out.push_back({it->second, gold[i].labels.count(label) != 0});
  }
  return out;
}

std::vector<std::string> surviving_labels(std::span<const ScorerDescriptor> members,
                                          const LabelVocabulary& vocab, double min_recall) {
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& d : members) {
    for (const auto& label : d.vocabulary) {
      if (auto m = d.metrics_for(label); m && m->recall < min_recall) continue;
      ranked.emplace_back(vocab.rank(label), label);
    }
  }
  std::sort(ranked.begin(), ranked.end());
  ranked.erase(std::unique(ranked.begin(), ranked.end()), ranked.end());
  std::vector<std::string> out;
  for (auto& [r, l] : ranked) out.push_back(std::move(l));
  return out;
}

std::vector<SweepRow> evaluate_run(std::span<const ScoreVector> scores,
                                   std::span<const Citation> gold,
                                   std::span<const ScorerDescriptor> members,
                                   const CompilerPolicy& base_policy, const LabelVocabulary& vocab,
                                   const SweepGrid& grid) {
  if (scores.size() != gold.size()) throw AlignmentError("scores and gold differ in length");
  std::vector<SweepRow> rows;
  std::vector<TagList> predicted(scores.size());
  for (std::size_t max_tags : grid.max_tags) {
    for (double t : grid.reliability_thresholds) {
      CompilerPolicy policy = base_policy;
      policy.max_tags = max_tags;
      policy.reliability_min_recall = t;
      policy.validate(vocab);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        predicted[i] = compile_tags(scores[i], policy, vocab, members);
      }
      const auto labels = surviving_labels(members, vocab, t);
      const MetricReport report = metric_report(confusion_counts(predicted, gold, labels));
      rows.push_back({max_tags, t, labels.size(), report.cumulative_accuracy,
                      report.micro.precision, report.micro.recall, report.micro.f1});
    }
  }
  return rows;
}

void sort_by_micro_f1(std::vector<SweepRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.micro_f1 > b.micro_f1; });
}

json sweep_to_json(std::span<const SweepRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"max_tags", r.max_tags},
                   {"p_threshold", r.reliability_threshold},
                   {"num_pt_classes", r.num_classes},
                   {"cumulative_accuracy", r.cumulative_accuracy},
                   {"cumulative_precision", r.cumulative_precision},
                   {"cumulative_recall", r.cumulative_recall},
                   {"micro_f1", r.micro_f1}});
  }
  return out;
}

std::string sweep_to_text(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "MAX TAGS  P-THRESHOLD  Num PT Classes  Cumulative Accuracy  Cumulative Precision  "
         "Cumulative Recall  Micro-Average F1 Score\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%8zu  %11.1f  %14zu  %19.3f  %20.3f  %17.3f  %22.3f\n",
                  r.max_tags, r.reliability_threshold, r.num_classes, r.cumulative_accuracy,
                  r.cumulative_precision, r.cumulative_recall, r.micro_f1);
    out << line;
  }
  return out.str();
}

}  // namespace pttag
