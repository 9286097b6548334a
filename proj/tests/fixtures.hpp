#pragma once

// Generators and reference oracles shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "l4/synth.hpp"

namespace l4::testing {

using Symbols = std::vector<char>;

// Every sequence of length 1..max_len over {A, B, C}.
inline std::vector<Symbols> all_sequences(std::size_t max_len) {
  std::vector<Symbols> out;
  std::vector<Symbols> frontier = {{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Symbols> next;
    for (const auto& s : frontier) {
      for (char c : {'A', 'B', 'C'}) {
        auto t = s;
        t.push_back(c);
        next.push_back(std::move(t));
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// Minimal alignment cost found by listing every monotone path from (0,0) to
// (n-1,m-1) with right, down and diagonal steps. Paths are kept as cell
// bitmasks per shape, so sequences are limited to 8 symbols.
class AlignmentOracle {
 public:
  double cost(const Symbols& a, const Symbols& b) {
    const auto& paths = paths_for(a.size(), b.size());
    std::uint64_t mismatch = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (a[i] != b[j]) mismatch |= std::uint64_t{1} << (i * 8 + j);
      }
    }
    int best = 1 << 30;
    for (std::uint64_t p : paths) best = std::min(best, std::popcount(p & mismatch));
    return best;
  }

 private:
  const std::vector<std::uint64_t>& paths_for(std::size_t n, std::size_t m) {
    auto& paths = cache_[{n, m}];
    if (paths.empty()) walk(n, m, 0, 0, 0, paths);
    return paths;
  }

  static void walk(std::size_t n, std::size_t m, std::size_t i, std::size_t j, std::uint64_t mask,
                   std::vector<std::uint64_t>& out) {
    mask |= std::uint64_t{1} << (i * 8 + j);
    if (i + 1 == n && j + 1 == m) {
      out.push_back(mask);
      return;
    }
    if (i + 1 < n) walk(n, m, i + 1, j, mask, out);
    if (j + 1 < m) walk(n, m, i, j + 1, mask, out);
    if (i + 1 < n && j + 1 < m) walk(n, m, i + 1, j + 1, mask, out);
  }

  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::uint64_t>> cache_;
};

// Fuzzed log messages: dialect shapes mixed with random token soup.
inline std::vector<std::string> fuzz_lines(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> words = {"alpha", "beta", "gamma", "node", "rank_3", "step",
                                          "error", "ok", "timeout", "=", "send", "recv"};
  const auto samples = synth::dialect_samples();
  std::vector<std::string> out;
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<std::size_t> pick_word(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_sample(0, samples.size() - 1);
  std::uniform_int_distribution<int> len(1, 9);
  std::uniform_int_distribution<int> num(0, 99999);
  for (std::size_t i = 0; i < n; ++i) {
    if (kind(rng) < 2) {
      out.push_back(samples[pick_sample(rng)]);
      continue;
    }
    std::string line;
    for (int t = len(rng); t > 0; --t) {
      if (!line.empty()) line += ' ';
      line += (num(rng) % 3 == 0) ? std::to_string(num(rng)) : words[pick_word(rng)];
    }
    out.push_back(line);
  }
  return out;
}

}  // namespace l4::testing
