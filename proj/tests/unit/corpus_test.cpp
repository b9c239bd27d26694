#include <doctest.h>

#include <sstream>

#include "pttag/corpus.hpp"
#include "pttag/errors.hpp"
#include "support.hpp"

using namespace pttag;
using namespace pttag::testing;

TEST_SUITE("corpus") {

TEST_CASE("parse a complete record") {
  const auto c = parse_citation_record(
      R"({"id":"1","journal_id":"J01","title":"T","abstract":"A","labels":["Review"]})");
  CHECK(c == Citation{"1", "J01", "T", "A", {"Review"}});
}

TEST_CASE("absent abstract and labels default to empty") {
  const auto c = parse_citation_record(R"({"id":"2","journal_id":"J01","title":"T"})");
  CHECK(c.abstract.empty());
  CHECK(c.labels.empty());
}

TEST_CASE("missing journal_id is a schema error naming the field") {
  try {
    parse_citation_record(R"({"id":"3","title":"T"})");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "journal_id");
  }
  CHECK_THROWS_AS(parse_citation_record(R"({"id":"","journal_id":"J","title":"T"})"), SchemaError);
}

TEST_CASE("malformed JSON reports the line number") {
  std::istringstream in("{\"id\":\"1\",\"journal_id\":\"J\",\"title\":\"T\"}\n\n{oops\n");
  try {
    read_corpus(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("duplicate ids are rejected") {
  std::istringstream in("{\"id\":\"1\",\"journal_id\":\"J\",\"title\":\"T\"}\n"
                        "{\"id\":\"1\",\"journal_id\":\"J\",\"title\":\"U\"}\n");
  CHECK_THROWS_AS(read_corpus(in), ParseError);
}

TEST_CASE("write and read round-trip") {
  const Corpus corpus{cite("a", {"Review", "Letter"}, "Title", "Abs"), cite("b")};
  std::stringstream s;
  write_corpus(s, corpus);
  CHECK(read_corpus(s) == corpus);
}

TEST_CASE("vocabulary is ordered by count, ties by name") {
  const LabelVocabulary v({{"B", 5}, {"Journal Article", 10}, {"A", 5}}, {"X"});
  CHECK(v.labels() == std::vector<std::string>{"Journal Article", "A", "B"});
  CHECK(v.rank("B") == 2);
  CHECK(v.is_excluded("X"));
  CHECK_FALSE(v.contains("X"));
  CHECK_THROWS_AS(LabelVocabulary({{"A", 1}}, {}), ConfigError);  // no base label
  CHECK_THROWS_AS(LabelVocabulary({{"Journal Article", 1}, {"A", 1}}, {"A"}), ConfigError);
  CHECK_THROWS_AS(LabelVocabulary({{"Journal Article", 1}, {"Journal Article", 2}}, {}), ConfigError);
  CHECK(LabelVocabulary::from_json(v.to_json()).labels() == v.labels());
}

TEST_CASE("stats over small label sets") {
  const auto vocab = vocab_of({"Journal Article", "A", "B"});
  const Corpus corpus{cite("1", {"A"}), cite("2", {"A", "B"}), cite("3", {"B"})};
  const auto s = compute_corpus_stats(corpus, vocab);
  CHECK(s.per_label_count.at("A") == 2);
  CHECK(s.per_label_count.at("B") == 2);
  CHECK(s.tags_per_citation_histogram == std::map<std::size_t, std::uint64_t>{{1, 2}, {2, 1}});
  CHECK(s.total_citations == 3);

  const auto empty = compute_corpus_stats({}, vocab);
  CHECK(empty.total_citations == 0);
  for (const auto& [l, n] : empty.per_label_count) CHECK(n == 0);

  CHECK_THROWS_WITH_AS(compute_corpus_stats({cite("9", {"Zzz"})}, vocab),
                       doctest::Contains("Zzz"), DataError);
}

TEST_CASE("scaled corpus replaying the two largest label counts") {
  // 5,050,200 base-label and 1,664,856 support-tag citations at 1:10000,
  // rounding toward zero.
  const std::uint64_t base = 5050200 / 10000, support = 1664856 / 10000;
  const std::string support_tag = "Research Support, Non-U.S. Gov't";
  const LabelVocabulary vocab({{"Journal Article", 5050200}, {support_tag, 1664856}}, {});
  Corpus corpus;
  for (std::uint64_t i = 0; i < base; ++i) {
    LabelSet labels{"Journal Article"};
    if (i < support) labels.insert(support_tag);
    corpus.push_back(cite("c" + std::to_string(i), labels));
  }
  const auto s = compute_corpus_stats(corpus, vocab);
  CHECK(s.per_label_count.at("Journal Article") == 505);
  CHECK(s.per_label_count.at(support_tag) == 166);
}

TEST_CASE("histogram mass equals label occurrences, in any corpus order") {
  const auto vocab = partition_vocab();
  Corpus corpus = partition_corpus(5, 2000);
  const auto s = compute_corpus_stats(corpus, vocab);
  std::uint64_t mass = 0, occurrences = 0;
  for (const auto& [k, n] : s.tags_per_citation_histogram) mass += k * n;
  for (const auto& [l, n] : s.per_label_count) occurrences += n;
  CHECK(mass == occurrences);
  Rng rng(1);
  rng.shuffle(std::span(corpus));
  CHECK(compute_corpus_stats(corpus, vocab) == s);

  CorpusStats halves = compute_corpus_stats(Corpus(corpus.begin(), corpus.begin() + 10), vocab);
  halves += compute_corpus_stats(Corpus(corpus.begin() + 10, corpus.end()), vocab);
  CHECK(halves == s);
}

TEST_CASE("phi coefficient examples") {
  const auto vocab = vocab_of({"Journal Article", "A", "B", "C"});
  auto phi = [&](const Corpus& c, const std::string& x, const std::string& y) {
    const auto m = compute_label_correlations(c, vocab);
    return m.at(vocab.rank(x), vocab.rank(y));
  };
  // identical indicators
  CHECK(phi({cite("1", {"A", "B"}), cite("2"), cite("3", {"A", "B"})}, "A", "B") == doctest::Approx(1.0));
  // A on {1,2}, B on {3,4}
  CHECK(phi({cite("1", {"A"}), cite("2", {"A"}), cite("3", {"B"}), cite("4", {"B"})}, "A", "B") ==
        doctest::Approx(-1.0));
  // A on {1,2}, B on {2,3}
  CHECK(phi({cite("1", {"A"}), cite("2", {"A", "B"}), cite("3", {"B"}), cite("4")}, "A", "B") ==
        doctest::Approx(0.0));
}

TEST_CASE("correlation matrix is symmetric, bounded, zero for constant labels") {
  const auto vocab = partition_vocab();
  const auto m = compute_label_correlations(partition_corpus(3, 1000), vocab);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      CHECK(m.at(i, j) == m.at(j, i));
      CHECK(m.at(i, j) >= -1.0);
      CHECK(m.at(i, j) <= 1.0);
    }
    CHECK(m.at(i, i) == doctest::Approx(1.0));
  }
  const auto small = vocab_of({"Journal Article", "A", "B"});
  const auto z = compute_label_correlations({cite("1", {"A"}), cite("2", {"A", "B"})}, small);
  CHECK(z.at(1, 1) == 0.0);  // A everywhere
  CHECK(z.at(0, 0) == 0.0);  // base label nowhere
  CHECK(z.at(1, 2) == 0.0);
}

TEST_CASE("normalization drops excluded and redundant base labels") {
  const std::string support = "Research Support, N.I.H., Intramural";
  const auto vocab = vocab_of({"Journal Article", "Review"}, {support});
  const Corpus in{cite("1", {"Journal Article", "Review"}), cite("2", {"Journal Article"}),
                  cite("3", {"Journal Article", support})};
  const auto out = normalize_corpus(in, vocab);
  CHECK(out[0].labels == LabelSet{"Review"});
  CHECK(out[1].labels == LabelSet{"Journal Article"});
  CHECK(out[2].labels == LabelSet{"Journal Article"});
  CHECK(out[2].id == "3");
}

TEST_CASE("normalization is idempotent and leaves no base label beside another") {
  const auto vocab = partition_vocab();
  Corpus corpus = partition_corpus(11, 1000);
  for (std::size_t i = 0; i < corpus.size(); i += 3) corpus[i].labels.insert("Journal Article");
  const auto once = normalize_corpus(corpus, vocab);
  CHECK(normalize_corpus(once, vocab) == once);
  for (const auto& c : once) {
    if (c.labels.count("Journal Article")) CHECK(c.labels.size() == 1);
  }
}

}  // TEST_SUITE
