#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "l4/error.hpp"

namespace l4 {

// Dynamic time warping with a 0/1 local cost (0 when the symbols are equal).
// Full dynamic program without a warping band; the path may step right,
// down, or diagonally. Throws Error(kEmptySequence) if either side is empty.
template <typename T>
double dtw_distance(std::span<const T> a, std::span<const T> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptySequence, "dtw of an empty sequence");
  const std::size_t m = b.size();
  // Two rolling rows of the accumulated-cost table.
  std::vector<double> prev(m), curr(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double cost = a[i] == b[j] ? 0.0 : 1.0;
      double best;
      if (i == 0 && j == 0) best = 0.0;
      else if (i == 0) best = curr[j - 1];
      else if (j == 0) best = prev[j];
      else best = std::min({prev[j - 1], prev[j], curr[j - 1]});
      curr[j] = cost + best;
    }
    std::swap(prev, curr);
  }
  return prev[m - 1];
}

template <typename T>
double dtw_distance(const std::vector<T>& a, const std::vector<T>& b) {
  return dtw_distance(std::span<const T>(a), std::span<const T>(b));
}

// 1 - dtw / max(|a|, |b|), clamped to [0, 1].
template <typename T>
double sequence_similarity(std::span<const T> a, std::span<const T> b) {
  const double d = dtw_distance(a, b);
  const double len = static_cast<double>(std::max(a.size(), b.size()));
  return std::clamp(1.0 - d / len, 0.0, 1.0);
}

template <typename T>
double sequence_similarity(const std::vector<T>& a, const std::vector<T>& b) {
  return sequence_similarity(std::span<const T>(a), std::span<const T>(b));
}

}  // namespace l4
