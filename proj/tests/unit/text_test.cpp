#include <doctest.h>

#include "pttag/errors.hpp"
#include "pttag/input_assembler.hpp"
#include "pttag/rng.hpp"
#include "pttag/text_normalizer.hpp"
#include "support.hpp"

using namespace pttag;
using namespace pttag::testing;

namespace {

std::string random_messy_text(Rng& rng) {
  static const std::vector<std::string> pieces{
      "word", " ", "  ", "<b>", "</b>", "<i>", "\xC2\xA9", "\xC2\xB1", "\xE2\x80\x94", "\xC3\xA9",
      "p < .05", "<", ">", "x<y", "\t", "\xE2\x84\xA2", "\xCE\xBC" "g", "<sup>2</sup>", "\n", "a-b",
      "\xE2\x80\x9C" "q" "\xE2\x80\x9D", "<<b>>", "<br/>", "\xF0\x9F\x98\x80"};
  std::string s;
  const auto n = rng.uniform_index(12);
  for (std::size_t i = 0; i < n; ++i) s += pieces[rng.uniform_index(pieces.size())];
  return s;
}

}  // namespace

TEST_SUITE("text_normalizer") {

TEST_CASE("symbol and tag examples") {
  const auto m = SymbolMap::defaults();
  CHECK(normalize_text("\xC2\xA9 2020 Elsevier", m) == "(c) 2020 Elsevier");
  CHECK(normalize_text("<b>Effect</b> of X \xC2\xB1 2", m) == "Effect of X +/- 2");
  CHECK(normalize_text("Results: p < .05!", m) == "Results: p < .05!");
}

TEST_CASE("unknown non-ASCII becomes a space, never glues words") {
  const auto m = SymbolMap::defaults();
  CHECK(normalize_text("caf\xC3\xA9 au lait", m) == "caf au lait");
  CHECK(normalize_text("alpha\xE2\x80\x8Bomega", m) == "alpha omega");
  CHECK(normalize_text("  many   \t spaces \n", m) == "many spaces");
  CHECK(normalize_text("10\xC2\xB0" "C", m) == "10 deg C");
}

TEST_CASE("custom symbol maps") {
  const auto m = SymbolMap::from_json(nlohmann::json::parse(R"([["é","e"],["ét","ET"]])"));
  CHECK(normalize_text("\xC3\xA9t\xC3\xA9", m) == "ete");  // first listed pattern wins
  CHECK_THROWS_AS(SymbolMap(std::vector<SymbolSubstitution>{{"", "x"}}), ConfigError);
  CHECK_THROWS_AS(SymbolMap(std::vector<SymbolSubstitution>{{"a", "\xC3\xA9"}}), ConfigError);
}

TEST_CASE("output is printable ASCII and normalization is idempotent") {
  const auto m = SymbolMap::defaults();
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::string raw = random_messy_text(rng);
    const std::string once = normalize_text(raw, m);
    CAPTURE(raw);
    for (unsigned char c : once) CHECK((c >= 0x20 && c < 0x7F));
    CHECK(once.find("  ") == std::string::npos);
    CHECK(normalize_text(once, m) == once);
  }
  CHECK(normalize_text("Plain ASCII text, unchanged.", m) == "Plain ASCII text, unchanged.");
}

}  // TEST_SUITE

TEST_SUITE("input_assembler") {

TEST_CASE("ample budget keeps everything") {
  const WhitespaceTokenizer tok;
  const auto in = assemble_input(cite("1", {}, "Gene therapy advances", "We review..."
                                      , "J123"), tok);
  CHECK(in.text == "J123<1>Gene therapy advances<2>We review...");
  CHECK_FALSE(in.truncated);
  CHECK(in.citation_id == "1");
  const auto no_abs = assemble_input(cite("2", {}, "Gene therapy advances", "", "J123"), tok);
  CHECK(no_abs.text == "J123<1>Gene therapy advances<2>");
  CHECK_FALSE(no_abs.truncated);
}

TEST_CASE("abstract prefix matches exhaustive enumeration") {
  const WhitespaceTokenizer tok;
  const std::vector<std::string> words{"a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"};
  std::string abstract;
  for (const auto& w : words) abstract += (abstract.empty() ? "" : " ") + w;
  const Citation c = cite("1", {}, "two words", abstract, "J1");
  for (std::size_t budget = 2; budget <= 14; ++budget) {
    // Oracle: the most abstract words whose assembled text fits.
    std::size_t best = 0;
    for (std::size_t k = 0; k <= words.size(); ++k) {
      std::string prefix;
      for (std::size_t i = 0; i < k; ++i) prefix += (i ? " " : "") + words[i];
      if (tok.count_tokens("J1<1>two words<2>" + prefix) <= budget) best = k;
    }
    std::string expected = "J1<1>two words<2>";
    for (std::size_t i = 0; i < best; ++i) expected += (i ? " " : "") + words[i];
    const auto in = assemble_input(c, tok, budget);
    CAPTURE(budget);
    CHECK(in.text == expected);
    CHECK(in.token_count <= budget);
    CHECK(in.truncated == (best < words.size()));
  }
  const auto six = assemble_input(c, tok, 6);
  // markers glue to their neighbours: "J1<1>two" and "words<2>a0" are one token each
  CHECK(six.text == "J1<1>two words<2>a0 a1 a2 a3 a4");
  CHECK(six.truncated);
}

TEST_CASE("title truncated only when it cannot fit, abstract then dropped") {
  const WhitespaceTokenizer tok;
  const Citation c = cite("1", {}, "one two three four five", "abs tract", "J1");
  const auto in = assemble_input(c, tok, 3);
  CHECK(in.text == "J1<1>one two three<2>");
  CHECK(in.truncated);
  const auto fields = split_input_text(in.text);
  CHECK(fields.journal_id == "J1");
  CHECK(fields.title == "one two three");
  CHECK(fields.abstract.empty());
}

TEST_CASE("budget smaller than the fixed fields") {
  const WhitespaceTokenizer tok;
  CHECK_THROWS_AS(assemble_input(cite("1", {}, "T", "", "J1"), tok, 0), BudgetTooSmallError);
}

TEST_CASE("budget, monotonicity and title-first properties over random citations") {
  const WhitespaceTokenizer tok;
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    auto words = [&](std::size_t n) {
      std::string s;
      for (std::size_t k = 0; k < n; ++k) s += (k ? " " : "") + std::string("w") + std::to_string(rng.uniform_index(50));
      return s;
    };
    const Citation c = cite("r", {}, words(1 + rng.uniform_index(8)), words(rng.uniform_index(40)), "J9");
    std::size_t prev_abstract = 0;
    for (std::size_t budget = 1; budget <= 50; ++budget) {
      const auto in = assemble_input(c, tok, budget);
      CHECK(in.token_count <= budget);
      CHECK(in.token_count == tok.count_tokens(in.text));
      const auto f = split_input_text(in.text);
      CHECK(in.text.find("<1>") == in.text.rfind("<1>"));
      CHECK(in.text.find("<2>") == in.text.rfind("<2>"));
      if (!f.abstract.empty()) CHECK(f.title == c.title);
      CHECK(f.abstract.size() >= prev_abstract);
      prev_abstract = f.abstract.size();
    }
  }
}

TEST_CASE("tokenizer contract") {
  const WhitespaceTokenizer tok;
  const std::string t = "  alpha beta\tgamma  ";
  CHECK(tok.count_tokens(t) == 3);
  CHECK(tok.prefix_tokens(t, 3) == t);
  CHECK(tok.count_tokens(tok.prefix_tokens(t, 2)) == 2);
  CHECK(tok.count_tokens(tok.prefix_tokens(t, 0)) == 0);
}

}  // TEST_SUITE
