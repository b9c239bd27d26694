#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pttag/corpus.hpp"

namespace pttag {

inline constexpr std::string_view kTitleSeparator = "<1>";
inline constexpr std::string_view kAbstractSeparator = "<2>";
inline constexpr std::size_t kDefaultTokenBudget = 512;

struct ModelInput {
  std::string citation_id;
  std::string text;
  std::size_t token_count = 0;
  bool truncated = false;

  bool operator==(const ModelInput&) const = default;
  nlohmann::json to_json() const;
};

// Implementations must be safe for concurrent const use.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count_tokens(std::string_view text) const = 0;
  // Longest prefix holding at most n tokens, cut at a token boundary.
  // Returns text unchanged when n >= count_tokens(text).
  virtual std::string_view prefix_tokens(std::string_view text, std::size_t n) const = 0;
};

// Tokens are maximal runs of non-whitespace, so separators glued to words
// count as part of them.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::size_t count_tokens(std::string_view text) const override;
  std::string_view prefix_tokens(std::string_view text, std::size_t n) const override;
};

// Builds "journal<1>title<2>abstract" within the token budget, keeping the
// journal id and title whole when they fit and filling the rest with the
// start of the abstract.
ModelInput assemble_input(const Citation& citation, const Tokenizer& tokenizer,
                          std::size_t budget = kDefaultTokenBudget);

// Field views of an assembled text; missing separators leave fields empty.
struct InputFields {
  std::string_view journal_id;
  std::string_view title;
  std::string_view abstract;
};
InputFields split_input_text(std::string_view text);

}  // namespace pttag
