#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l4/drain.hpp"
#include "l4/text_pattern.hpp"

namespace l4 {

enum class Stage { kEnvInit, kDataLoad, kModelInit, kIterTrain, kCheckpoint, kTeardown };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct StageRule {
  Stage stage = Stage::kEnvInit;
  std::vector<TextPattern> boundary_patterns;
  int priority = 0;  // larger wins when several rules match one record
};

// Rules for the built-in synthetic log dialect.
std::vector<StageRule> default_stage_rules();

// Rule file: one "STAGE | pattern | priority" per line, '#' comments.
// Lines naming the same stage add patterns to one rule.
std::vector<StageRule> parse_stage_rules(std::string_view text);
std::vector<StageRule> load_stage_rules(const std::filesystem::path& path);

// Throws Error(kValidationError) on empty patterns, duplicate priorities or
// a missing ITER_TRAIN rule.
void validate_stage_rules(const std::vector<StageRule>& rules);

// Half-open record range [begin, end) within one node's stream.
struct StageSpan {
  Stage stage = Stage::kEnvInit;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const StageSpan&, const StageSpan&) = default;
};

struct StageSegmentation {
  std::map<std::string, std::vector<StageSpan>> spans;
  // Nodes that never reach ITER_TRAIN (the NoIterativeStage warning).
  std::vector<std::string> nodes_without_iterative_stage;

  bool iterative_stage_found() const;
  Stage stage_of(const std::string& node_id, std::size_t record_index) const;
  // Latest stage every node has reached.
  std::optional<Stage> common_latest_stage() const;
};

// Each node's stream is cut at boundary records into spans labeled by the
// last matched boundary; a boundary for the current stage does not cut.
StageSegmentation segment_stages(const ParsedBundle& bundle, const std::vector<StageRule>& rules);

// Decides which templates mark the start of a training iteration. The
// default accepts templates where one of the tokens step/iteration/iter is
// directly followed or preceded by a wildcard.
class IterationMarker {
 public:
  IterationMarker() = default;
  explicit IterationMarker(TextPattern pattern) : pattern_(std::move(pattern)) {}

  bool matches(const LogTemplate& tmpl) const;

 private:
  std::optional<TextPattern> pattern_;
};

struct IterationSequence {
  std::size_t iteration_index = 0;
  std::string node_id;
  std::vector<EventId> events;
  std::vector<std::size_t> records;  // indices into the node's stream
};

// Splits records at every marker; records before the first marker are not
// part of any iteration. `record_indices` gives each record's index in the
// node stream. Throws Error(kNoIterationMarkers) when no marker occurs.
std::vector<IterationSequence> segment_iterations(std::string_view node_id,
                                                  std::span<const ParsedRecord> records,
                                                  std::span<const std::size_t> record_indices,
                                                  const std::function<bool(EventId)>& is_marker);

struct IterationVerdict {
  std::size_t iteration_index = 0;
  std::string node_id;
  double similarity = 1.0;
  bool flagged = false;
  double population_mean = 0.0;
  double population_stddev = 0.0;
  // Events in this iteration that no iteration of the window logged, in
  // order of first occurrence.
  std::vector<EventId> deviating_events;
  // Events the window logged that this iteration lacks.
  std::vector<EventId> missing_events;
  std::vector<std::size_t> records;  // the iteration's indices in the node stream
};

inline constexpr std::size_t kDefaultWindow = 10;

// For i >= window the similarity is the mean similarity to the previous
// `window` iterations and is flagged when it falls strictly below
// mean - 3 sigma of all similarities computed so far (population sigma,
// including the current one). Earlier iterations compare against whatever
// history exists and are never flagged.
std::vector<IterationVerdict> windowed_verdicts(const std::vector<IterationSequence>& sequences,
                                                std::size_t window = kDefaultWindow);

struct TemporalParams {
  std::vector<StageRule> rules = default_stage_rules();
  IterationMarker marker;
  std::size_t window = kDefaultWindow;
  std::size_t jobs = 1;
};

struct TemporalResult {
  StageSegmentation stages;
  std::map<std::string, std::vector<IterationVerdict>> verdicts;  // per node
  std::vector<IterationVerdict> flagged;  // sorted by (iteration, node)
  std::vector<std::size_t> flagged_iterations;  // union across nodes
  std::vector<std::string> warnings;
};

// Per-node stage segmentation, iteration splitting and windowed verdicts on
// the unfiltered parsed bundle.
TemporalResult analyze_temporal(const ParsedBundle& bundle, const TemporalParams& params);

}  // namespace l4
