#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "l4/drain.hpp"
#include "l4/pipeline.hpp"
#include "l4/report.hpp"
#include "l4/synth.hpp"

namespace l4 {

struct EventScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set comparison of signatures. Two empty sets score 1; otherwise an empty
// side scores 0.
EventScores evaluate_events(const std::vector<std::string>& predicted,
                            const std::vector<std::string>& truth);
EventScores evaluate_events(const DiagnosisReport& report, const synth::GroundTruth& truth);

// Fraction of cases whose ranking has a faulty node within its first k
// entries. Throws Error(kLengthMismatch) for empty or unequal lists.
double evaluate_topk(const std::vector<std::vector<std::string>>& rankings,
                     const std::vector<std::vector<std::string>>& faulty_nodes, std::size_t k);
double evaluate_topk(const std::vector<DiagnosisReport>& reports,
                     const std::vector<synth::GroundTruth>& truths, std::size_t k);

enum class BaselineMethod { kErrorTime, kErrorCount };

// ERROR_TIME: ascending first ERROR timestamp, nodes without errors last.
// ERROR_COUNT: descending ERROR record count. Ties by node id.
std::vector<std::string> baseline_rank(const ParsedBundle& bundle, BaselineMethod method);

// Signatures of every template logged at ERROR level.
std::vector<std::string> level_only_detector(const ParsedBundle& bundle);
// The quarter of templates (rounded up) with the fewest occurrences, ties
// by signature.
std::vector<std::string> frequency_only_detector(const ParsedBundle& bundle);

// 1-based position of the first faulty node in `ranking`, if present.
std::optional<std::size_t> best_rank(const std::vector<std::string>& ranking,
                                     const std::vector<std::string>& faulty_nodes);

struct CaseResult {
  std::string name;
  std::string fault_type;
  bool hardware = false;
  std::size_t node_count = 0;
  EventScores pipeline;
  EventScores level_only;
  EventScores frequency_only;
  std::optional<std::size_t> faulty_rank;
  std::optional<std::size_t> error_time_rank;
  std::optional<std::size_t> error_count_rank;
  std::optional<std::size_t> flagged_iteration;  // earliest
  std::optional<std::size_t> onset;
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  std::size_t fault_signatures_removed = 0;  // injected signatures the filter dropped
  std::size_t history_flags = 0;             // flagged iterations on the successful runs
  double seconds = 0.0;
};

// Evaluates <case_dir>/failed against its truth.json with every
// <case_dir>/history_* directory as successful history.
CaseResult evaluate_case(const std::filesystem::path& case_dir, const RunConfig& config);

// Every case_* directory under `root`, in name order.
std::vector<CaseResult> evaluate_corpus(const std::filesystem::path& root, const RunConfig& config);

struct CorpusSummary {
  std::size_t cases = 0;
  EventScores pipeline;  // macro averages
  EventScores level_only;
  EventScores frequency_only;
  std::size_t hardware_cases = 0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top8 = 0.0;
  double error_time_top1 = 0.0;
  double error_count_top1 = 0.0;
  double filter_removed_fraction = 0.0;  // mean over cases
  std::size_t fault_signatures_removed = 0;
  std::size_t temporal_cases = 0;  // NETWORK and HANG
  double temporal_onset_accuracy = 0.0;
  std::size_t history_flags = 0;
  double seconds = 0.0;
};

CorpusSummary summarize(const std::vector<CaseResult>& results);

// Tab-separated per-case table with a fixed header, followed by a blank line
// and "metric<TAB>value" rows of the summary.
std::string format_results(const std::vector<CaseResult>& results, const CorpusSummary& summary);

// Writes the standard benchmark corpus (seeds [first, first + count)).
void write_corpus(const std::filesystem::path& root, std::uint64_t first, std::size_t count,
                  std::size_t history_jobs = 2, std::size_t jobs = 1);

}  // namespace l4
