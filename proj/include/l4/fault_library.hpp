#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "l4/drain.hpp"
#include "l4/text_pattern.hpp"

namespace l4 {

enum class FaultCategory {
  kNetwork,
  kAccelerator,
  kNode,
  kStorage,
  kConfig,
  kProgramBug,
  kIncompatibility,
  kMisoperation,
  kFramework,
  kPlatform,
};

std::string_view to_string(FaultCategory category);
FaultCategory parse_fault_category(std::string_view name);

enum class MatchMode { kAll, kAny };

std::string_view to_string(MatchMode mode);
MatchMode parse_match_mode(std::string_view name);

struct FaultPattern {
  std::string pattern_id;
  std::string name;
  FaultCategory category = FaultCategory::kNetwork;
  std::vector<TextPattern> signature_events;  // substring or "re:" regex over template text
  MatchMode match_mode = MatchMode::kAny;
  std::string root_cause;
  std::string remediation;

  // Throws Error(kValidationError) on an empty id or signature list.
  void validate() const;

  friend bool operator==(const FaultPattern&, const FaultPattern&) = default;
};

class FaultLibrary {
 public:
  FaultLibrary() = default;

  // Throws Error(kDuplicateId) or Error(kValidationError).
  void add(FaultPattern pattern);

  const std::vector<FaultPattern>& patterns() const noexcept { return patterns_; }
  bool empty() const noexcept { return patterns_.empty(); }
  std::size_t size() const noexcept { return patterns_.size(); }

  // One YAML document per pattern, in insertion order.
  std::string to_yaml() const;
  static FaultLibrary from_yaml(std::string_view text);

  // A missing file loads as an empty library.
  static FaultLibrary load(const std::filesystem::path& path);
  // Writes a temporary file next to `path` and renames it into place.
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const FaultLibrary&, const FaultLibrary&) = default;

 private:
  std::vector<FaultPattern> patterns_;
};

// Loads the library at `path`, adds the pattern and persists atomically.
FaultLibrary add_pattern(const std::filesystem::path& path, FaultPattern pattern);

struct MatchResult {
  std::string pattern_id;
  // First matching record per (signature pattern, node).
  std::vector<RecordRef> matched_events;
  std::vector<std::string> matched_signatures;  // template signatures that fired
  double confidence = 0.0;                      // matched / total signature patterns
};

// Runs on unfiltered parsed logs. Results are ordered by confidence
// (descending) then pattern_id.
std::vector<MatchResult> match(const ParsedBundle& bundle, const FaultLibrary& library);

}  // namespace l4
