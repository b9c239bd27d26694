#include <doctest.h>

#include <algorithm>

#include "pttag/errors.hpp"
#include "pttag/tag_compiler.hpp"
#include "support.hpp"

using namespace pttag;
using namespace pttag::testing;

namespace {

// Prevalence order of the largest corpus label counts.
const LabelVocabulary& vocab() {
  static const LabelVocabulary v({{"Journal Article", 5050200},
                                  {"Review", 636047},
                                  {"Case Reports", 315324},
                                  {"Letter", 155390},
                                  {"Editorial", 100000},
                                  {"Systematic Review", 90000},
                                  {"Meta-Analysis", 80000}},
                                 {});
  return v;
}

ScoreVector sv(std::map<std::string, double> scores, std::string id = "c1") {
  return {std::move(id), std::move(scores), {}};
}

}  // namespace

TEST_SUITE("tag_compiler") {

TEST_CASE("threshold, truncation and fallback examples") {
  CompilerPolicy p;
  CHECK(compile_tags(sv({{"Review", 0.95}, {"Letter", 0.20}}), p, vocab()).tags ==
        std::vector<std::string>{"Review"});

  p.max_tags = 2;
  CHECK(compile_tags(sv({{"Journal Article", 0.9}, {"Review", 0.8}, {"Letter", 0.7}}), p, vocab()).tags ==
        std::vector<std::string>{"Journal Article", "Review"});

  const auto fallback = compile_tags(sv({{"Review", 0.1}, {"Letter", 0.2}}), p, vocab());
  CHECK(fallback.tags == std::vector<std::string>{"Journal Article"});
  CHECK(fallback.provenance[0].source == "fallback");

  p.base_label_fallback = false;
  CHECK(compile_tags(sv({{"Review", 0.1}}), p, vocab()).tags.empty());
}

TEST_CASE("EXCLUDES keeps the higher score") {
  CompilerPolicy p;
  p.rules = {Rule::excludes("Letter", "Editorial")};
  const auto t = compile_tags(sv({{"Letter", 0.8}, {"Editorial", 0.6}}), p, vocab());
  CHECK(t.tags == std::vector<std::string>{"Letter"});
  CHECK(t.provenance[0].actions == std::vector<std::string>{"excluded Editorial"});

  p.rules = {Rule::excludes("Letter", "Editorial", Rule::Keep::kB)};
  CHECK(compile_tags(sv({{"Letter", 0.8}, {"Editorial", 0.6}}), p, vocab()).tags ==
        std::vector<std::string>{"Editorial"});
}

TEST_CASE("IMPLIES adds the consequent with rule provenance") {
  CompilerPolicy p;
  p.rules = {Rule::implies("Meta-Analysis", "Systematic Review")};
  const auto t = compile_tags(sv({{"Meta-Analysis", 0.7}, {"Systematic Review", 0.2}}), p, vocab());
  CHECK(t.tags == std::vector<std::string>{"Systematic Review", "Meta-Analysis"});
  CHECK(t.provenance[0].source == "rule");
  CHECK(t.provenance[0].score == 0.2);
  CHECK_FALSE(t.provenance[0].threshold);
  CHECK(t.provenance[1].source == "score");
  CHECK(*t.provenance[1].threshold == 0.5);
}

TEST_CASE("IMPLIES cannot smuggle in an excluded pair") {
  CompilerPolicy p;
  p.rules = {Rule::excludes("Review", "Systematic Review", Rule::Keep::kA),
             Rule::implies("Meta-Analysis", "Systematic Review")};
  const auto t = compile_tags(sv({{"Review", 0.9}, {"Meta-Analysis", 0.9}}), p, vocab());
  const bool both = std::count(t.tags.begin(), t.tags.end(), "Review") &&
                    std::count(t.tags.begin(), t.tags.end(), "Systematic Review");
  CHECK_FALSE(both);
}

TEST_CASE("reliability filter drops labels with low validation recall") {
  CompilerPolicy p;
  p.reliability_min_recall = 0.7;
  const std::vector<ScorerDescriptor> d{
      {"r", ScorerKind::kBinary, {"Review"}, std::map<std::string, Prf>{{"Review", {0.9, 0.6, 0.72}}}},
      {"l", ScorerKind::kBinary, {"Letter"}, std::map<std::string, Prf>{{"Letter", {0.9, 0.8, 0.85}}}}};
  CHECK(compile_tags(sv({{"Review", 0.9}, {"Letter", 0.9}}), p, vocab(), d).tags ==
        std::vector<std::string>{"Letter"});
  // without descriptors the filter is vacuous
  CHECK(compile_tags(sv({{"Review", 0.9}, {"Letter", 0.9}}), p, vocab()).tags.size() == 2);
}

TEST_CASE("per-label thresholds fall back to the fixed threshold") {
  CompilerPolicy p;
  p.threshold_mode = ThresholdMode::kPerLabel;
  p.thresholds = {{"Review", 0.95}};
  p.threshold = 0.3;
  CHECK(compile_tags(sv({{"Review", 0.9}, {"Letter", 0.4}}), p, vocab()).tags ==
        std::vector<std::string>{"Letter"});
}

TEST_CASE("policy loading and validation") {
  const auto p = CompilerPolicy::from_json(nlohmann::json::parse(R"({
      "threshold_mode": "fixed", "thresholds": 0.6, "max_tags": 3,
      "rules": [{"kind": "EXCLUDES", "a": "Letter", "b": "Editorial", "keep": "a"},
                {"kind": "IMPLIES", "a": "Meta-Analysis", "b": "Systematic Review"}],
      "base_label_fallback": false})"), vocab());
  CHECK(p.threshold == 0.6);
  CHECK(p.max_tags == 3);
  CHECK(p.rules.size() == 2);
  CHECK_FALSE(p.base_label_fallback);
  CHECK(CompilerPolicy::from_json(p.to_json(), vocab()).to_json() == p.to_json());

  auto bad = [&](const char* text) {
    CHECK_THROWS_AS(CompilerPolicy::from_json(nlohmann::json::parse(text), vocab()), PolicyError);
  };
  bad(R"({"rules": [{"kind": "EXCLUDES", "a": "Letter", "b": "Nonexistent"}]})");
  bad(R"({"rules": [{"kind": "IMPLIES", "a": "Letter", "b": "Letter"}]})");
  bad(R"({"rules": [{"kind": "REQUIRES", "a": "Letter", "b": "Review"}]})");
  bad(R"({"max_tags": 0})");
  bad(R"({"thresholds": 1.5})");
  bad(R"({"reliability_min_recall": -0.1})");
  bad(R"({"threshold_mode": "dynamic"})");
}

TEST_CASE("raising a fixed threshold never adds a tag") {
  CompilerPolicy p;
  p.max_tags = 7;
  p.base_label_fallback = false;
  p.rules = {Rule::excludes("Letter", "Editorial"), Rule::excludes("Review", "Systematic Review")};
  Rng rng(17);
  const auto labels = vocab().labels();
  for (int i = 0; i < 2000; ++i) {
    std::map<std::string, double> s;
    for (const auto& l : labels) s[l] = rng.uniform_real();
    const double lo = rng.uniform_real(), hi = lo + (1.0 - lo) * rng.uniform_real();
    p.threshold = lo;
    const auto low = compile_tags(sv(s), p, vocab()).tags;
    p.threshold = hi;
    for (const auto& t : compile_tags(sv(s), p, vocab()).tags) {
      CHECK(std::find(low.begin(), low.end(), t) != low.end());
    }
  }
}

TEST_CASE("errors pass through and unknown labels are rejected") {
  CompilerPolicy p;
  ScoreVector failed{"x", {}, "backend said no"};
  const auto t = compile_tags(failed, p, vocab());
  CHECK_FALSE(t.ok());
  CHECK(t.tags.empty());
  CHECK(t.to_json() == nlohmann::json{{"id", "x"}, {"error", "backend said no"}});
  CHECK_THROWS_AS(compile_tags(sv({{"Bogus", 0.9}}), p, vocab()), DataError);
}

TEST_CASE("threshold tuning on a 4-citation toy") {
  // (0.9,+) (0.7,-) (0.6,+) (0.2,-)
  const std::vector<ScoreVector> scores{sv({{"A", 0.9}}, "1"), sv({{"A", 0.7}}, "2"),
                                        sv({{"A", 0.6}}, "3"), sv({{"A", 0.2}}, "4")};
  const std::vector<Citation> gold{cite("1", {"A"}), cite("2"), cite("3", {"A"}), cite("4")};

  // Oracle: every candidate threshold, scored directly.
  struct Cand { double t, p, r, f1; };
  std::vector<Cand> cands;
  for (double t : {0.0, 0.2, 0.6, 0.7, 0.9, 1.0}) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const bool pred = scores[i].scores.at("A") >= t, g = gold[i].labels.count("A") > 0;
      tp += pred && g;
      fp += pred && !g;
      fn += !pred && g;
    }
    const double pr = ratio_or_zero(tp, tp + fp), rc = ratio_or_zero(tp, tp + fn);
    cands.push_back({t, pr, rc, ratio_or_zero(2 * pr * rc, pr + rc)});
  }
  Cand best_f1 = cands[0];
  for (const auto& c : cands) if (c.f1 > best_f1.f1) best_f1 = c;
  CHECK(best_f1.t == 0.6);
  CHECK(best_f1.f1 == doctest::Approx(0.8));

  const auto f1 = tune_thresholds(scores, gold, TuningObjective::max_f1());
  CHECK(f1.thresholds.at("A") == best_f1.t);

  // recall >= 0.9: best precision among qualifying thresholds, lowest on ties
  Cand best_p{-1, -1, 0, 0};
  for (const auto& c : cands) {
    if (c.r >= 0.9 && (c.p > best_p.p || (c.p == best_p.p && c.t < best_p.t))) best_p = c;
  }
  const auto rec = tune_thresholds(scores, gold, TuningObjective::recall_at_least(0.9));
  CHECK(rec.thresholds.at("A") == best_p.t);
  CHECK(best_p.t == 0.6);
}

TEST_CASE("tuning on separated scores picks the lowest perfect threshold") {
  std::vector<ScoreVector> scores;
  std::vector<Citation> gold;
  for (int i = 0; i < 10; ++i) {
    const bool pos = i < 4;
    scores.push_back(sv({{"A", pos ? 0.9 : 0.1}, {"B", 0.5}}, std::to_string(i)));
    gold.push_back(cite(std::to_string(i), pos ? LabelSet{"A"} : LabelSet{}));
  }
  const auto r = tune_thresholds(scores, gold, TuningObjective::max_f1());
  CHECK(r.thresholds.at("A") == 0.9);  // lowest candidate above 0.1
  CHECK_FALSE(r.thresholds.count("B"));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("B") != std::string::npos);

  gold[0].id = "zz";
  CHECK_THROWS_AS(tune_thresholds(scores, gold, TuningObjective::max_f1()), AlignmentError);
}

}  // TEST_SUITE
