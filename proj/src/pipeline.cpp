#include "l4/pipeline.hpp"

#include <cstdlib>
#include <utility>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "l4/error.hpp"
#include "l4/parallel.hpp"

namespace l4 {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (failed_job.empty()) throw Error(ErrorCode::kInvalidArgument, "failed job path is required");
  if (!(presence_fraction > 0.0 && presence_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "presence fraction must be in (0,1]");
  }
  if (tree_count == 0) throw Error(ErrorCode::kInvalidArgument, "tree count must be positive");
  if (window == 0) throw Error(ErrorCode::kInvalidArgument, "window must be positive");
  if (format != "json" && format != "text") {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown format '{}'", format));
  }
  drain.validate();
}

namespace {

template <typename T>
void override_from(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

template <typename T>
void override_from(const YAML::Node& node, const char* key, std::optional<T>& out) {
  if (node[key]) out = node[key].as<std::string>();
}

}  // namespace

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  YAML::Node y;
  try {
    y = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot open config {}", path.string()));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kValidationError, fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!y || y.IsNull()) return base;
  try {
    if (y["failed_job"]) base.failed_job = y["failed_job"].as<std::string>();
    if (y["history"]) {
      base.history.clear();
      for (const auto& h : y["history"]) base.history.emplace_back(h.as<std::string>());
    }
    override_from(y, "library", base.library);
    if (y["layout"]) base.layout.layout = parse_layout(y["layout"].as<std::string>());
    override_from(y, "extension", base.layout.extension);
    override_from(y, "header_format", base.header_format);
    if (const auto d = y["drain"]) {
      override_from(d, "depth", base.drain.depth);
      override_from(d, "similarity_threshold", base.drain.similarity_threshold);
      override_from(d, "max_children", base.drain.max_children);
    }
    override_from(y, "mask_file", base.mask_file);
    override_from(y, "presence_fraction", base.presence_fraction);
    if (const auto s = y["spatial"]) {
      override_from(s, "tree_count", base.tree_count);
      override_from(s, "subsample_size", base.subsample_size);
      override_from(s, "top_k", base.top_k);
      override_from(s, "threshold", base.anomaly_threshold);
      override_from(s, "top_events", base.top_events);
    }
    if (const auto t = y["temporal"]) {
      override_from(t, "stage_rules", base.stage_rules);
      override_from(t, "iteration_marker", base.iteration_marker);
      override_from(t, "window", base.window);
    }
    override_from(y, "seed", base.seed);
    override_from(y, "jobs", base.jobs);
    override_from(y, "out", base.out);
    override_from(y, "format", base.format);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kValidationError, fmt::format("{}: {}", path.string(), e.what()));
  }
  return base;
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* value = std::getenv("L4_SEED");
  if (value == nullptr || *value == '\0') return fallback;
  char* end = nullptr;
  const auto parsed = std::strtoull(value, &end, 10);
  if (end == nullptr || *end != '\0') return fallback;
  return parsed;
}

namespace {

template <typename Fn>
auto in_phase(std::string_view phase, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", phase, e.detail()));
  }
}

std::size_t effective_jobs(const RunConfig& config) {
  return config.jobs == 0 ? default_parallelism() : config.jobs;
}

}  // namespace

ParsedBundle load_and_parse(const fs::path& job, const RunConfig& config) {
  const auto format = HeaderFormat::from_name(config.header_format);
  const auto raw = read_job_bundle(job, config.layout, format, effective_jobs(config));
  const Masker masker = config.mask_file ? Masker::from_file(*config.mask_file) : Masker();
  return parse_bundle(raw, config.drain, masker);
}

DiagnosisReport analyze(const AnalysisContext& context, const RunConfig& config) {
  if (context.failed == nullptr) throw Error(ErrorCode::kInvalidArgument, "no failed job");
  const ParsedBundle& failed = *context.failed;
  const std::size_t jobs = effective_jobs(config);

  AssemblyInput input;
  input.bundle = &failed;
  input.library = context.library;

  if (context.library && !context.library->empty()) {
    input.matches = in_phase("library match", [&] { return match(failed, *context.library); });
  }

  // Cross-job filter; without history the parsed logs are used as they are.
  ParsedBundle filtered;
  const ParsedBundle* spatial_input = &failed;
  if (context.history && !context.history->empty()) {
    in_phase("cross-job filter", [&] {
      const auto pool = build_pool(*context.history);
      filtered = filter(failed, pool, config.presence_fraction, &input.filter_stats);
    });
    spatial_input = &filtered;
  } else {
    input.filter_stats.records_in = failed.record_count();
    input.filter_stats.records_out = input.filter_stats.records_in;
    input.filter_stats.applied = false;
    input.notes.push_back("no successful history given; cross-job filter skipped");
  }

  in_phase("spatial analysis", [&] {
    const auto matrix = vectorize(*spatial_input);
    IsolationForestParams params;
    params.tree_count = config.tree_count;
    params.subsample_size = config.subsample_size;
    params.seed = config.seed;
    params.jobs = jobs;
    try {
      input.spatial.ranking = score_nodes(matrix.vectors, params);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooFewNodes) throw;
      input.notes.push_back(fmt::format("spatial analysis skipped: {}", e.detail()));
      return;
    }
    input.spatial.recommended =
        recommend_nodes(input.spatial.ranking, config.top_k, config.anomaly_threshold);
    input.spatial.attributions =
        attribute_events(matrix, input.spatial.recommended, config.top_events);
    if (input.spatial.recommended.size() > 1) {
      input.notes.push_back(
          "several nodes recommended; nodes that communicate with a faulty node often log related "
          "errors and can rank high without being the root cause");
    }
  });

  input.temporal = in_phase("temporal analysis", [&] {
    TemporalParams params;
    if (config.stage_rules) params.rules = load_stage_rules(*config.stage_rules);
    if (config.iteration_marker) params.marker = IterationMarker(TextPattern(*config.iteration_marker));
    params.window = config.window;
    params.jobs = jobs;
    return analyze_temporal(failed, params);
  });

  return assemble(input);
}

DiagnosisReport diagnose(const RunConfig& config) {
  config.validate();
  const auto failed = in_phase("parse", [&] { return load_and_parse(config.failed_job, config); });
  std::vector<ParsedBundle> history;
  in_phase("parse history", [&] {
    for (const auto& h : config.history) history.push_back(load_and_parse(h, config));
  });
  std::optional<FaultLibrary> library;
  if (config.library) {
    library = in_phase("library load", [&] { return FaultLibrary::load(*config.library); });
  }
  AnalysisContext context{&failed, &history, library ? &*library : nullptr};
  return analyze(context, config);
}

}  // namespace l4
