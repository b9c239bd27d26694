#pragma once

#include <cstdint>

namespace pttag {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const Prf&) const = default;
};

// Zero denominators give 0.
inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double f1_score(double precision, double recall) {
  return safe_ratio(2.0 * precision * recall, precision + recall);
}

inline Prf prf_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  Prf m;
  m.precision = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  m.recall = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

}  // namespace pttag
