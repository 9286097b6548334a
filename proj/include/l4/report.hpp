#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "l4/cross_job_filter.hpp"
#include "l4/drain.hpp"
#include "l4/fault_library.hpp"
#include "l4/spatial.hpp"
#include "l4/temporal.hpp"

namespace l4 {

inline constexpr int kReportSchemaVersion = 1;

enum class EvidenceSource { kSpatial, kTemporal, kLibrary };

std::string_view to_string(EvidenceSource source);
EvidenceSource parse_evidence_source(std::string_view name);

struct LibraryFinding {
  std::string pattern_id;
  std::string name;
  std::string category;
  double confidence = 0.0;
  std::vector<std::string> matched_signatures;
  std::vector<RecordRef> matched_events;
  std::string root_cause;
  std::string remediation;

  friend bool operator==(const LibraryFinding&, const LibraryFinding&) = default;
};

struct SuspiciousNode {
  std::string node_id;
  double score = 0.0;
  std::size_t rank = 0;
  struct Event {
    std::string signature;
    double deviation = 0.0;
    std::int64_t count = 0;
    double median = 0.0;

    friend bool operator==(const Event&, const Event&) = default;
  };
  std::vector<Event> events;

  friend bool operator==(const SuspiciousNode&, const SuspiciousNode&) = default;
};

struct StageFinding {
  Stage stage = Stage::kEnvInit;
  std::vector<RecordRef> evidence;

  friend bool operator==(const StageFinding&, const StageFinding&) = default;
};

struct FlaggedIteration {
  std::size_t iteration = 0;
  std::string node_id;
  double similarity = 0.0;
  double population_mean = 0.0;
  double population_stddev = 0.0;
  std::vector<std::string> deviating_events;  // signatures
  std::vector<std::string> missing_events;

  friend bool operator==(const FlaggedIteration&, const FlaggedIteration&) = default;
};

struct FailureEvent {
  std::string signature;
  std::vector<EvidenceSource> sources;  // sorted, unique
  RecordRef example;

  friend bool operator==(const FailureEvent&, const FailureEvent&) = default;
};

struct DiagnosisReport {
  int schema = kReportSchemaVersion;
  std::string job_id;
  std::vector<LibraryFinding> library_matches;
  std::vector<NodeAnomalyScore> node_ranking;  // every scored node
  std::vector<SuspiciousNode> suspicious_nodes;
  std::optional<StageFinding> failing_stage;
  std::vector<FlaggedIteration> flagged_iterations;
  std::vector<FailureEvent> failure_indicating_events;
  FilterStats filter_stats;
  std::vector<std::string> notes;
  bool no_findings = true;

  std::string to_json() const;
  static DiagnosisReport from_json(std::string_view text);
  // Human summary: at most 20 events, 8 nodes and 5 iterations.
  std::string to_text() const;

  std::vector<std::string> event_signatures() const;

  friend bool operator==(const DiagnosisReport&, const DiagnosisReport&);
};

struct SpatialOutcome {
  std::vector<NodeAnomalyScore> ranking;
  std::vector<NodeAnomalyScore> recommended;
  std::map<std::string, std::vector<EventDeviation>> attributions;
};

struct AssemblyInput {
  const ParsedBundle* bundle = nullptr;  // unfiltered
  const FaultLibrary* library = nullptr;
  std::vector<MatchResult> matches;
  SpatialOutcome spatial;
  TemporalResult temporal;
  FilterStats filter_stats;
  std::vector<std::string> notes;
};

// Merges analyzer outputs. Events are deduplicated by signature with their
// sources merged, then ranked by number of sources (descending), earliest
// example and signature.
DiagnosisReport assemble(const AssemblyInput& input);

}  // namespace l4
