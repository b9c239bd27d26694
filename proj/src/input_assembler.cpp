#include "pttag/input_assembler.hpp"

#include "pttag/errors.hpp"

namespace pttag {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string join(std::string_view journal, std::string_view title, std::string_view abstract) {
  std::string s;
  s.reserve(journal.size() + title.size() + abstract.size() + 6);
  s.append(journal).append(kTitleSeparator).append(title).append(kAbstractSeparator).append(abstract);
  return s;
}

// Largest n in [0, hi] with fits(n) true, given fits is monotone and fits(0).
template <typename Fits>
std::size_t largest_fitting(std::size_t hi, Fits fits) {
  std::size_t lo = 0;
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo + 1) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

}  // namespace

nlohmann::json ModelInput::to_json() const {
  return {{"id", citation_id}, {"text", text}, {"truncated", truncated}};
}

std::size_t WhitespaceTokenizer::count_tokens(std::string_view text) const {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

std::string_view WhitespaceTokenizer::prefix_tokens(std::string_view text, std::size_t n) const {
  if (n >= count_tokens(text)) return text;
  std::size_t seen = 0;
  bool in_token = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_space(text[i])) {
      if (in_token && seen == n) return text.substr(0, i);
      in_token = false;
    } else if (!in_token) {
      if (seen == n) return text.substr(0, i);
      in_token = true;
      ++seen;
    }
  }
  return text;
}

ModelInput assemble_input(const Citation& citation, const Tokenizer& tokenizer,
                          std::size_t budget) {
  const std::string_view journal = citation.journal_id;
  const std::string_view title = citation.title;
  const std::string_view abstract = citation.abstract;

  const std::size_t minimum = tokenizer.count_tokens(join(journal, "", ""));
  if (budget < minimum) {
    throw BudgetTooSmallError("citation " + citation.id + ": token budget " +
                              std::to_string(budget) + " is below the minimum of " +
                              std::to_string(minimum));
  }

  ModelInput out;
  out.citation_id = citation.id;
  std::string fixed = join(journal, title, "");
  if (tokenizer.count_tokens(fixed) <= budget) {
    const std::size_t abstract_tokens = tokenizer.count_tokens(abstract);
    auto fits = [&](std::size_t n) {
      return tokenizer.count_tokens(fixed + std::string(tokenizer.prefix_tokens(abstract, n))) <=
             budget;
    };
    const std::size_t keep = largest_fitting(abstract_tokens, fits);
    const std::string_view kept = tokenizer.prefix_tokens(abstract, keep);
    out.text = fixed + std::string(kept);
    out.truncated = kept.size() < abstract.size();
  } else {
    auto fits = [&](std::size_t n) {
      return tokenizer.count_tokens(join(journal, tokenizer.prefix_tokens(title, n), "")) <=
             budget;
    };
    const std::size_t keep = largest_fitting(tokenizer.count_tokens(title), fits);
    out.text = join(journal, tokenizer.prefix_tokens(title, keep), "");
    out.truncated = true;
  }
  out.token_count = tokenizer.count_tokens(out.text);
  return out;
}

InputFields split_input_text(std::string_view text) {
  InputFields f;
  const auto first = text.find(kTitleSeparator);
  if (first == std::string_view::npos) {
    f.title = text;
    return f;
  }
  f.journal_id = text.substr(0, first);
  const auto rest = text.substr(first + kTitleSeparator.size());
  const auto second = rest.find(kAbstractSeparator);
  if (second == std::string_view::npos) {
    f.title = rest;
    return f;
  }
  f.title = rest.substr(0, second);
  f.abstract = rest.substr(second + kAbstractSeparator.size());
  return f;
}

}  // namespace pttag
