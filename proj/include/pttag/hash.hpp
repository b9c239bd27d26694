#pragma once

#include <cstdint>
#include <string_view>

namespace pttag {

// 64-bit FNV-1a; stable across platforms, used for feature hashing.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pttag
