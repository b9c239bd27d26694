#include "pttag/text_normalizer.hpp"

#include <fstream>

#include "pttag/errors.hpp"

namespace pttag {

namespace {

constexpr std::size_t kMaxTagBody = 64;

bool is_ascii_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Length of the tag starting at text[pos], or 0 when there is none.
std::size_t tag_length(std::string_view text, std::size_t pos) {
  if (text[pos] != '<') return 0;
  std::size_t i = pos + 1;
  if (i < text.size() && text[i] == '/') ++i;
  if (i >= text.size() || !is_ascii_letter(text[i])) return 0;
  ++i;
  for (std::size_t body = 0; i < text.size() && body <= kMaxTagBody; ++i, ++body) {
    if (text[i] == '>') return i + 1 - pos;
  }
  return 0;
}

std::string strip_tags(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (std::size_t n = tag_length(text, i)) {
      i += n;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

std::string substitute_symbols(std::string_view text, const SymbolMap& map) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    bool matched = false;
    for (const auto& [pattern, replacement] : map.entries()) {
      if (text.substr(i, pattern.size()) == pattern) {
        out += replacement;
        i += pattern.size();
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(text[i++]);
  }
  return out;
}

std::size_t utf8_sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;  // stray continuation or invalid lead byte
}

// Non-ASCII code points and control characters become one space each, then
// whitespace runs collapse and the ends are trimmed.
std::string to_spaced_ascii(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    bool space = false;
    if (c >= 0x80) {
      std::size_t n = utf8_sequence_length(c);
      std::size_t j = 1;
      while (j < n && i + j < text.size() &&
             (static_cast<unsigned char>(text[i + j]) & 0xC0) == 0x80) {
        ++j;
      }
      i += j;
      space = true;
    } else {
      ++i;
      space = c <= 0x20 || c == 0x7F;
    }
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

bool printable_ascii(std::string_view s) {
  for (char c : s) {
    if (c < 0x20 || c > 0x7E) return false;
  }
  return true;
}

}  // namespace

SymbolMap::SymbolMap(std::vector<SymbolSubstitution> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.pattern.empty()) throw ConfigError("symbol map: empty pattern");
    if (!printable_ascii(e.replacement)) {
      throw ConfigError("symbol map: replacement for \"" + e.pattern +
                        "\" is not printable ASCII");
    }
  }
}

SymbolMap SymbolMap::defaults() {
  return SymbolMap({
      {"©", "(c)"},
      {"®", "(R)"},
      {"™", "(TM)"},
      {"±", "+/-"},
      {"°", " deg "},
      {"µ", "u"},  // micro sign
      {"μ", "u"},  // greek mu
      {"×", "x"},
      {"–", "-"},
      {"—", "-"},
      {"‘", "'"},
      {"’", "'"},
      {"“", "\""},
      {"”", "\""},
      {"\xC2\xA0", " "},  // no-break space
  });
}

SymbolMap SymbolMap::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("symbol map: expected an array of pairs");
  std::vector<SymbolSubstitution> entries;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
      throw ConfigError("symbol map: each entry must be [pattern, replacement]");
    }
    entries.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
  }
  return SymbolMap(std::move(entries));
}

SymbolMap SymbolMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open symbol map " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("symbol map " + path + " is not valid JSON");
  return from_json(j);
}

std::string normalize_text(std::string_view raw, const SymbolMap& map) {
  std::string text = to_spaced_ascii(substitute_symbols(strip_tags(raw), map));
  // A substitution can complete a tag ("<µm>" -> "<um>"); repeat until
  // nothing changes so the result is a fixed point.
  for (;;) {
    std::string again = to_spaced_ascii(strip_tags(text));
    if (again == text) return text;
    text = std::move(again);
  }
}

}  // namespace pttag
