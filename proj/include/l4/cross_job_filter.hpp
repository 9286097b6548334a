#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "l4/drain.hpp"

namespace l4 {

// Template signatures seen in historical successful jobs, each with the
// number of distinct jobs that logged it.
struct NormalEventPool {
  std::map<std::string, std::size_t> signatures;
  std::size_t total_jobs = 0;

  // presence_count / total_jobs, or 0 for unseen signatures.
  double presence(const std::string& signature) const;
  bool is_frequent(const std::string& signature, double presence_fraction) const;

  void save(const std::filesystem::path& path) const;
  static NormalEventPool load(const std::filesystem::path& path);

  friend bool operator==(const NormalEventPool&, const NormalEventPool&) = default;
};

// Throws Error(kEmptyHistory) for an empty list.
NormalEventPool build_pool(const std::vector<ParsedBundle>& successful);

struct FilterStats {
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  bool applied = false;
};

inline constexpr double kDefaultPresenceFraction = 0.5;

// Drops records whose signature is present in at least `presence_fraction`
// of the pooled jobs. Surviving records keep their order.
ParsedBundle filter(const ParsedBundle& failed, const NormalEventPool& pool,
                    double presence_fraction = kDefaultPresenceFraction,
                    FilterStats* stats = nullptr);

}  // namespace l4
