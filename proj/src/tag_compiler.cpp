#include "pttag/tag_compiler.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pttag/errors.hpp"

namespace pttag {

using nlohmann::json;

namespace {

const char* keep_name(Rule::Keep k) {
  switch (k) {
    case Rule::Keep::kA: return "a";
    case Rule::Keep::kB: return "b";
    case Rule::Keep::kHigherScore: return "higher_score";
  }
  return "higher_score";
}

using CandidateMap = std::map<std::string, TagProvenance>;

double score_of(const ScoreVector& sv, const std::string& label) {
  auto it = sv.scores.find(label);
  return it == sv.scores.end() ? 0.0 : it->second;
}

// One pass over the rules in order; returns true when anything changed.
bool apply_rules_once(const std::vector<Rule>& rules, CandidateMap& kept, const ScoreVector& sv,
                      bool excludes_only) {
  bool changed = false;
  for (const auto& rule : rules) {
    const bool has_a = kept.count(rule.a) != 0;
    const bool has_b = kept.count(rule.b) != 0;
    if (rule.kind == Rule::Kind::kExcludes) {
      if (!has_a || !has_b) continue;
      bool keep_a = true;
      switch (rule.keep) {
        case Rule::Keep::kA: keep_a = true; break;
        case Rule::Keep::kB: keep_a = false; break;
        case Rule::Keep::kHigherScore: keep_a = kept[rule.a].score >= kept[rule.b].score; break;
      }
      const std::string& winner = keep_a ? rule.a : rule.b;
      const std::string& loser = keep_a ? rule.b : rule.a;
      kept.erase(loser);
      kept[winner].actions.push_back("excluded " + loser);
      changed = true;
    } else if (!excludes_only && has_a && !has_b) {
      TagProvenance p;
      p.score = score_of(sv, rule.b);
      p.source = "rule";
      p.actions.push_back("implied by " + rule.a);
      kept.emplace(rule.b, std::move(p));
      changed = true;
    }
  }
  return changed;
}

}  // namespace

json Rule::to_json() const {
  if (kind == Kind::kImplies) return {{"kind", "IMPLIES"}, {"a", a}, {"b", b}};
  return {{"kind", "EXCLUDES"}, {"a", a}, {"b", b}, {"keep", keep_name(keep)}};
}

Rule Rule::from_json(const json& j) {
  Rule r;
  try {
    const auto kind = j.at("kind").get<std::string>();
    r.a = j.at("a").get<std::string>();
    r.b = j.at("b").get<std::string>();
    if (kind == "EXCLUDES") {
      r.kind = Kind::kExcludes;
      const auto keep = j.value("keep", std::string("higher_score"));
      if (keep == "a") {
        r.keep = Keep::kA;
      } else if (keep == "b") {
        r.keep = Keep::kB;
      } else if (keep == "higher_score") {
        r.keep = Keep::kHigherScore;
      } else {
        throw PolicyError("rule keep must be a, b or higher_score, got \"" + keep + "\"");
      }
    } else if (kind == "IMPLIES") {
      r.kind = Kind::kImplies;
    } else {
      throw PolicyError("unknown rule kind \"" + kind + "\"");
    }
  } catch (const json::exception& e) {
    throw PolicyError(std::string("rule: ") + e.what());
  }
  return r;
}

double CompilerPolicy::threshold_for(const std::string& label) const {
  if (threshold_mode == ThresholdMode::kPerLabel) {
    if (auto it = thresholds.find(label); it != thresholds.end()) return it->second;
  }
  return threshold;
}

void CompilerPolicy::validate(const LabelVocabulary& vocab) const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(threshold)) throw PolicyError("threshold must lie in [0,1]");
  for (const auto& [label, t] : thresholds) {
    if (!in_unit(t)) throw PolicyError("threshold for \"" + label + "\" must lie in [0,1]");
    if (!vocab.contains(label)) throw PolicyError("threshold for unknown label \"" + label + "\"");
  }
  if (reliability_min_recall && !in_unit(*reliability_min_recall)) {
    throw PolicyError("reliability_min_recall must lie in [0,1]");
  }
  if (max_tags < 1) throw PolicyError("max_tags must be at least 1");
  for (const auto& r : rules) {
    if (r.a == r.b) throw PolicyError("rule relates \"" + r.a + "\" to itself");
    for (const auto* label : {&r.a, &r.b}) {
      if (!vocab.contains(*label)) throw PolicyError("rule names unknown label \"" + *label + "\"");
    }
  }
}

json CompilerPolicy::to_json() const {
  json j = {{"threshold_mode", threshold_mode == ThresholdMode::kFixed ? "fixed" : "per_label"},
            {"threshold", threshold},
            {"thresholds", thresholds},
            {"max_tags", max_tags},
            {"base_label_fallback", base_label_fallback}};
  j["reliability_min_recall"] = reliability_min_recall ? json(*reliability_min_recall) : json();
  json rs = json::array();
  for (const auto& r : rules) rs.push_back(r.to_json());
  j["rules"] = rs;
  return j;
}

CompilerPolicy CompilerPolicy::from_json(const json& j, const LabelVocabulary& vocab) {
  if (!j.is_object()) throw PolicyError("policy must be a JSON object");
  CompilerPolicy p;
  try {
    const auto mode = j.value("threshold_mode", std::string("fixed"));
    if (mode == "fixed") {
      p.threshold_mode = ThresholdMode::kFixed;
    } else if (mode == "per_label") {
      p.threshold_mode = ThresholdMode::kPerLabel;
    } else {
      throw PolicyError("threshold_mode must be fixed or per_label");
    }
    const auto& t = j.contains("thresholds") ? j["thresholds"] : json();
    if (t.is_number()) {
      p.threshold = t.get<double>();
    } else if (t.is_object()) {
      p.thresholds = t.get<std::map<std::string, double>>();
    }
    if (j.contains("threshold")) p.threshold = j["threshold"].get<double>();
    if (auto it = j.find("reliability_min_recall"); it != j.end() && !it->is_null()) {
      p.reliability_min_recall = it->get<double>();
    }
    if (j.contains("max_tags")) {
      const auto m = j["max_tags"].get<long long>();
      if (m < 1) throw PolicyError("max_tags must be at least 1");
      p.max_tags = static_cast<std::size_t>(m);
    }
    p.base_label_fallback = j.value("base_label_fallback", true);
    if (j.contains("rules")) {
      for (const auto& r : j["rules"]) p.rules.push_back(Rule::from_json(r));
    }
  } catch (const json::exception& e) {
    throw PolicyError(std::string("policy: ") + e.what());
  }
  p.validate(vocab);
  return p;
}

CompilerPolicy CompilerPolicy::load_file(const std::string& path, const LabelVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw PolicyError("cannot open policy file " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw PolicyError("policy file " + path + " is not valid JSON");
  return from_json(j, vocab);
}

json TagList::to_json() const {
  if (!ok()) return {{"id", citation_id}, {"error", error}};
  json prov = json::object();
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& p = provenance[i];
    json entry = {{"score", p.score}, {"source", p.source}};
    entry["threshold"] = p.threshold ? json(*p.threshold) : json();
    if (!p.actions.empty()) entry["actions"] = p.actions;
    prov[tags[i]] = entry;
  }
  return {{"id", citation_id}, {"tags", tags}, {"provenance", prov}};
}

TagList compile_tags(const ScoreVector& scores, const CompilerPolicy& policy,
                     const LabelVocabulary& vocab, std::span<const ScorerDescriptor> descriptors) {
  TagList out;
  out.citation_id = scores.citation_id;
  if (!scores.ok()) {
    out.error = scores.error;
    return out;
  }

  CandidateMap kept;
  for (const auto& [label, score] : scores.scores) {
    if (!vocab.contains(label)) {
      throw DataError("citation " + scores.citation_id + ": score for unknown label \"" + label +
                      "\"");
    }
    if (policy.reliability_min_recall && !descriptors.empty()) {
      bool unreliable = false;
      for (const auto& d : descriptors) {
        if (auto m = d.metrics_for(label); m && m->recall < *policy.reliability_min_recall) {
          unreliable = true;
          break;
        }
      }
      if (unreliable) continue;
    }
    const double t = policy.threshold_for(label);
    if (score < t) continue;
    kept.emplace(label, TagProvenance{score, t, "score", {}});
  }

  if (!policy.rules.empty()) {
    // IMPLIES can re-introduce an excluded label, so iterate to a fixed point
    // (bounded), then settle any remaining conflicts with EXCLUDES alone.
    for (std::size_t pass = 0; pass <= policy.rules.size(); ++pass) {
      if (!apply_rules_once(policy.rules, kept, scores, false)) break;
    }
    while (apply_rules_once(policy.rules, kept, scores, true)) {
    }
  }

  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [label, prov] : kept) ranked.emplace_back(vocab.rank(label), label);
  std::sort(ranked.begin(), ranked.end());
  if (ranked.size() > policy.max_tags) ranked.resize(policy.max_tags);
  for (auto& [rank, label] : ranked) {
    out.provenance.push_back(std::move(kept[label]));
    out.tags.push_back(std::move(label));
  }

  if (out.tags.empty() && policy.base_label_fallback) {
    out.tags.push_back(vocab.base_label());
    out.provenance.push_back({score_of(scores, vocab.base_label()), std::nullopt, "fallback", {}});
  }
  return out;
}

ThresholdTuning tune_thresholds(std::span<const ScoreVector> scores, std::span<const Citation> gold,
                                const TuningObjective& objective) {
  if (scores.size() != gold.size()) {
    throw AlignmentError("tuning needs one gold record per score vector (" +
                         std::to_string(scores.size()) + " vs " + std::to_string(gold.size()) + ")");
  }
  std::set<std::string> labels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].citation_id != gold[i].id) {
      throw AlignmentError("score vector " + scores[i].citation_id + " is aligned with gold " +
                           gold[i].id);
    }
    for (const auto& [label, s] : scores[i].scores) labels.insert(label);
  }

  ThresholdTuning result;
  for (const auto& label : labels) {
    // (score, positive) for every citation that has a score for this label.
    std::vector<std::pair<double, bool>> points;
    std::size_t total_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      auto it = scores[i].scores.find(label);
      if (it == scores[i].scores.end()) continue;
      const bool pos = gold[i].labels.count(label) != 0;
      points.emplace_back(it->second, pos);
      total_pos += pos;
    }
    if (total_pos == 0) {
      result.warnings.push_back("label \"" + label + "\" has no positive example; threshold omitted");
      continue;
    }

    // Walk candidates from high to low, accumulating the points at or above.
    std::sort(points.begin(), points.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::set<double> candidate_set{0.0, 1.0};
    for (const auto& p : points) candidate_set.insert(p.first);
    std::vector<double> candidates(candidate_set.rbegin(), candidate_set.rend());

    std::size_t tp = 0, fp = 0, k = 0;
    std::optional<double> best_t;
    double best_value = -1.0;
    for (double t : candidates) {
      while (k < points.size() && points[k].first >= t) {
        (points[k].second ? tp : fp) += 1;
        ++k;
      }
      const Prf m = prf_from_counts(tp, fp, total_pos - tp);
      double value;
      if (objective.kind == TuningObjective::Kind::kMaxF1) {
        value = m.f1;
      } else {
        if (m.recall < objective.min_recall) continue;
        value = m.precision;
      }
      // Descending sweep: ">=" lets a lower threshold win ties.
      if (value >= best_value) {
        best_value = value;
        best_t = t;
      }
    }
    if (best_t) {
      result.thresholds[label] = *best_t;
    } else {
      result.warnings.push_back("label \"" + label + "\": no threshold reaches the recall target");
    }
  }
  return result;
}

}  // namespace pttag
