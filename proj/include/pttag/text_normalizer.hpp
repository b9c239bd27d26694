#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pttag {

struct SymbolSubstitution {
  std::string pattern;      // literal UTF-8
  std::string replacement;  // printable ASCII
};

// Literal substitutions applied left to right; at each position the first
// pattern in list order that matches wins.
class SymbolMap {
 public:
  SymbolMap() = default;
  // Throws ConfigError on empty patterns or non-printable replacements.
  explicit SymbolMap(std::vector<SymbolSubstitution> entries);

  const std::vector<SymbolSubstitution>& entries() const noexcept { return entries_; }

  // Built-in table: (c), (R), (TM), +/-, deg, u, x, dashes, straight quotes.
  static SymbolMap defaults();
  // JSON array of [pattern, replacement] pairs.
  static SymbolMap from_json(const nlohmann::json& j);
  static SymbolMap load_file(const std::string& path);

 private:
  std::vector<SymbolSubstitution> entries_;
};

// Strips HTML-like tags, maps known symbols to ASCII, turns every other
// non-ASCII character into a space, collapses whitespace and trims.
std::string normalize_text(std::string_view raw, const SymbolMap& map);

}  // namespace pttag
