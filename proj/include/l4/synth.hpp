#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "l4/temporal.hpp"

namespace l4::synth {

enum class FaultType { kNetwork, kAccelerator, kNodeCrash, kStorage, kConfig, kHang };

std::string_view to_string(FaultType type);
FaultType parse_fault_type(std::string_view name);
// Network, accelerator, node and storage faults.
bool is_hardware(FaultType type);

struct NoiseProfile {
  // Chance that each entry of the rare one-off vocabulary shows up in a job.
  double rare_event_probability = 0.9;
  // Each node logs a fixed number of benign profiler errors per iteration,
  // drawn once per node from [0, max].
  std::size_t max_benign_errors_per_iteration = 3;
  // Per-node chance of a benign "index file missing" error while loading data.
  double index_error_probability = 0.3;
};

struct StagePlan {
  std::size_t data_shards = 4;
  bool resume_from_checkpoint = true;
  bool final_checkpoint = true;
};

struct WorkloadSpec {
  std::size_t node_count = 16;
  std::size_t iterations = 40;
  std::size_t events_per_iteration = 8;  // core events per healthy iteration, >= 7
  StagePlan stage_plan;
  NoiseProfile noise;
  std::uint64_t seed = 0;

  // Throws Error(kInvalidSpec).
  void validate() const;
};

struct FaultInjection {
  FaultType type = FaultType::kNetwork;
  std::vector<std::size_t> target_nodes;  // node indices
  std::size_t onset_iteration = 0;        // ignored by STORAGE and CONFIG
  std::size_t neighbor_count = 7;         // NETWORK: nodes that see related errors
  std::size_t variant = 0;                // CONFIG: which misconfiguration

  void validate(const WorkloadSpec& spec) const;
};

struct GroundTruth {
  std::string fault_type;  // empty for successful runs
  std::vector<std::string> faulty_nodes;
  std::vector<std::string> failure_indicating_signatures;  // sorted
  std::optional<std::size_t> faulty_iteration;
  std::optional<Stage> failing_stage;
  // Nodes that logged injected records, faulty or neighbor.
  std::vector<std::string> affected_nodes;

  std::string to_json() const;
  static GroundTruth from_json(std::string_view text);
  static GroundTruth load(const std::filesystem::path& path);
};

struct RenderedJob {
  std::map<std::string, std::string> files;  // node id -> log text
  GroundTruth truth;
};

std::string node_name(std::size_t index, std::size_t node_count);

// Builds every node's log text in memory.
RenderedJob render_job(const WorkloadSpec& spec, const std::optional<FaultInjection>& injection);

// Writes `<node>.log` per node into `out_dir` (created if needed) and, for
// failed jobs, `truth.json` beside them.
GroundTruth generate(const WorkloadSpec& spec, const FaultInjection& injection,
                     const std::filesystem::path& out_dir);
void generate_success(const WorkloadSpec& spec, const std::filesystem::path& out_dir);

// Structured-text (YAML) forms used by the CLI.
WorkloadSpec load_workload_spec(const std::filesystem::path& path);
FaultInjection load_fault_injection(const std::filesystem::path& path);
std::string to_yaml(const WorkloadSpec& spec);
std::string to_yaml(const FaultInjection& injection);

// Signature a message of the built-in dialect parses to under the default masks.
std::string expected_signature(std::string_view message);

// Every message shape of the built-in dialect, rendered once, for parser tests.
std::vector<std::string> dialect_samples();

// A benchmark case: one failed job plus successful runs with the same settings.
struct CorpusCase {
  std::string name;
  WorkloadSpec spec;
  FaultInjection injection;
  std::vector<WorkloadSpec> history;
};

CorpusCase make_case(std::uint64_t seed, std::size_t history_jobs = 2);

// Writes <root>/<case>/failed, <root>/<case>/history_<i>.
void write_case(const CorpusCase& c, const std::filesystem::path& root);

}  // namespace l4::synth
