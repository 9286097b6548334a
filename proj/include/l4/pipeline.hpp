#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "l4/cross_job_filter.hpp"
#include "l4/drain.hpp"
#include "l4/fault_library.hpp"
#include "l4/log_model.hpp"
#include "l4/report.hpp"
#include "l4/spatial.hpp"
#include "l4/temporal.hpp"

namespace l4 {

struct RunConfig {
  std::filesystem::path failed_job;
  std::vector<std::filesystem::path> history;
  std::optional<std::filesystem::path> library;

  LayoutSpec layout;
  std::string header_format = "iso";
  DrainConfig drain;
  std::optional<std::filesystem::path> mask_file;

  double presence_fraction = kDefaultPresenceFraction;

  std::size_t tree_count = 100;
  std::size_t subsample_size = 0;
  std::size_t top_k = kDefaultTopKNodes;
  double anomaly_threshold = kDefaultAnomalyThreshold;
  std::size_t top_events = kDefaultTopEvents;

  std::optional<std::filesystem::path> stage_rules;
  std::optional<std::string> iteration_marker;
  std::size_t window = kDefaultWindow;

  std::uint64_t seed = 0;
  std::size_t jobs = 0;  // 0: available parallelism

  std::optional<std::filesystem::path> out;
  std::string format = "json";

  // Throws Error(kInvalidArgument).
  void validate() const;
};

// Overrides fields of `base` with the keys present in a YAML file.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

// Value of L4_SEED when set and numeric, otherwise `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback = 0);

// Everything the analyzers need once logs are parsed.
struct AnalysisContext {
  const ParsedBundle* failed = nullptr;
  const std::vector<ParsedBundle>* history = nullptr;  // may be empty
  const FaultLibrary* library = nullptr;               // may be null
};

// Library match, cross-job filter, spatial and temporal analysis, report.
DiagnosisReport analyze(const AnalysisContext& context, const RunConfig& config);

ParsedBundle load_and_parse(const std::filesystem::path& job, const RunConfig& config);

// Full run from paths. Module errors are rethrown with the phase name
// prefixed to the message and their code kept.
DiagnosisReport diagnose(const RunConfig& config);

}  // namespace l4
