// l4diag: failure diagnosis for distributed training jobs from their logs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "l4/drain.hpp"
#include "l4/error.hpp"
#include "l4/evaluate.hpp"
#include "l4/fault_library.hpp"
#include "l4/pipeline.hpp"
#include "l4/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOperational = 2;

// Flags shared by the commands that read job logs.
struct CommonFlags {
  std::optional<std::string> config;
  std::string layout = "auto";
  std::string header_format = "iso";
  std::string mask_file;
  std::size_t depth = 4;
  double similarity_threshold = 0.4;
  std::size_t max_children = 100;
  std::size_t jobs = 0;
  std::uint64_t seed = 0;

  CLI::Option* layout_opt = nullptr;
  CLI::Option* header_opt = nullptr;
  CLI::Option* mask_opt = nullptr;
  CLI::Option* depth_opt = nullptr;
  CLI::Option* st_opt = nullptr;
  CLI::Option* children_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "YAML file overriding defaults");
    layout_opt = app.add_option("--layout", layout, "auto | file-per-node | dir-per-node");
    header_opt = app.add_option("--header,--header-format", header_format,
                                "iso | bracketed | framework | regex with (?<ts>) and (?<msg>)");
    mask_opt = app.add_option("--masks,--mask-file", mask_file, "extra masking rules, one per line");
    depth_opt = app.add_option("--drain-depth,--depth", depth, "parse tree depth");
    st_opt = app.add_option("--drain-threshold,--similarity-threshold", similarity_threshold, "template merge threshold");
    children_opt = app.add_option("--max-children", max_children, "children per tree node");
    jobs_opt = app.add_option("--jobs", jobs, "worker threads (0: all cores)");
    seed_opt = app.add_option("--seed", seed, "random seed (falls back to L4_SEED)");
  }

  // Defaults, then the config file, then flags given on the command line.
  l4::RunConfig resolve() const {
    l4::RunConfig cfg;
    bool seed_from_file = false;
    if (config) {
      cfg = l4::load_run_config(*config, cfg);
      std::ifstream in(*config);
      std::string line;
      while (std::getline(in, line)) seed_from_file |= line.rfind("seed:", 0) == 0;
    }
    if (layout_opt->count()) cfg.layout.layout = l4::parse_layout(layout);
    if (header_opt->count()) cfg.header_format = header_format;
    if (mask_opt->count()) cfg.mask_file = fs::path(mask_file);
    if (depth_opt->count()) cfg.drain.depth = depth;
    if (st_opt->count()) cfg.drain.similarity_threshold = similarity_threshold;
    if (children_opt->count()) cfg.drain.max_children = max_children;
    if (jobs_opt->count()) cfg.jobs = jobs;
    if (seed_opt->count()) {
      cfg.seed = seed;
    } else if (!seed_from_file) {
      cfg.seed = l4::seed_from_env(cfg.seed);
    }
    return cfg;
  }
};

void write_output(const std::optional<fs::path>& out, const std::string& text) {
  if (!out) {
    std::cout << text;
    return;
  }
  std::ofstream f(*out, std::ios::binary | std::ios::trunc);
  if (!f) throw l4::Error(l4::ErrorCode::kIoError, fmt::format("cannot write {}", out->string()));
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagnose failed distributed training jobs from their logs"};
  app.require_subcommand(1);

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "diagnose one failed job");
  CommonFlags diag_flags;
  diag_flags.attach(*diagnose);
  std::string failed_job;
  std::vector<std::string> history;
  std::string library_path;
  double presence_fraction = l4::kDefaultPresenceFraction;
  std::size_t trees = 100;
  std::size_t subsample = 0;
  std::size_t top_k = l4::kDefaultTopKNodes;
  double threshold = l4::kDefaultAnomalyThreshold;
  std::size_t top_events = l4::kDefaultTopEvents;
  std::string stage_rules;
  std::string iteration_marker;
  std::size_t window = l4::kDefaultWindow;
  std::string out_path;
  std::string format = "json";
  auto* failed_opt = diagnose->add_option("job", failed_job, "failed job directory");
  auto* history_opt = diagnose->add_option("--history", history, "successful run directories");
  auto* library_opt = diagnose->add_option("--library", library_path, "fault library file");
  auto* presence_opt =
      diagnose->add_option("--presence-fraction", presence_fraction, "history presence to drop an event");
  auto* trees_opt = diagnose->add_option("--iforest-trees,--trees", trees, "isolation trees");
  auto* subsample_opt = diagnose->add_option("--iforest-subsample,--subsample", subsample, "rows per tree (0: min(256, nodes))");
  auto* topk_opt = diagnose->add_option("--top-k-nodes,--top-k", top_k, "most nodes to recommend");
  auto* threshold_opt = diagnose->add_option("--anomaly-threshold,--threshold", threshold, "anomaly score cut-off");
  auto* top_events_opt = diagnose->add_option("--top-events", top_events, "events listed per node");
  auto* rules_opt = diagnose->add_option("--stage-rules", stage_rules, "stage rule file");
  auto* marker_opt = diagnose->add_option("--iter-marker,--iteration-marker", iteration_marker,
                                          "pattern for the iteration start template");
  auto* window_opt = diagnose->add_option("--window", window, "iterations compared against");
  auto* out_opt = diagnose->add_option("--out", out_path, "report file (default stdout)");
  auto* format_opt = diagnose->add_option("--format", format, "json | text")
                         ->check(CLI::IsMember({"json", "text"}));

  // parse
  auto* parse = app.add_subcommand("parse", "print parsed records as JSON lines");
  CommonFlags parse_flags;
  parse_flags.attach(*parse);
  std::string parse_job;
  std::string parse_out;
  parse->add_option("job", parse_job, "job directory")->required();
  parse->add_option("--out", parse_out, "output file (default stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic job generation");
  synth->require_subcommand(1);
  auto* generate = synth->add_subcommand("generate", "generate one failed job");
  std::string spec_path;
  std::string fault_path;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  generate->add_option("--spec", spec_path, "workload spec (YAML)");
  generate->add_option("--fault", fault_path, "fault injection (YAML)")->required();
  auto* synth_seed_opt = generate->add_option("--seed", synth_seed, "seed (overrides the spec)");
  generate->add_option("--out", synth_out, "output directory")->required();

  auto* success = synth->add_subcommand("success", "generate one successful job");
  std::string success_spec;
  std::uint64_t success_seed = 0;
  std::string success_out;
  success->add_option("--spec", success_spec, "workload spec (YAML)");
  auto* success_seed_opt = success->add_option("--seed", success_seed, "seed (overrides the spec)");
  success->add_option("--out", success_out, "output directory")->required();

  auto* corpus = synth->add_subcommand("corpus", "generate the benchmark corpus");
  std::string corpus_out;
  std::uint64_t corpus_first = 0;
  std::size_t corpus_count = 50;
  std::size_t corpus_history = 2;
  std::size_t corpus_jobs = 0;
  corpus->add_option("--out", corpus_out, "corpus root")->required();
  corpus->add_option("--first-seed", corpus_first, "first case seed");
  corpus->add_option("--count", corpus_count, "number of cases");
  corpus->add_option("--history", corpus_history, "successful runs per case");
  corpus->add_option("--jobs", corpus_jobs, "worker threads (0: all cores)");

  // library
  auto* library = app.add_subcommand("library", "manage the fault library");
  library->require_subcommand(1);
  std::string lib_file = "faults.yaml";
  library->add_option("--library", lib_file, "library file")->capture_default_str();
  auto* lib_add = library->add_subcommand("add", "add a confirmed fault pattern");
  l4::FaultPattern new_pattern;
  std::vector<std::string> new_signatures;
  std::string new_category;
  std::string new_mode = "ANY";
  lib_add->add_option("--id", new_pattern.pattern_id, "pattern id")->required();
  lib_add->add_option("--name", new_pattern.name, "short name");
  lib_add->add_option("--category", new_category, "fault category")->required();
  lib_add->add_option("--signature", new_signatures,
                      "template substring, or regex prefixed with re:")->required();
  lib_add->add_option("--mode", new_mode, "ALL | ANY")->check(CLI::IsMember({"ALL", "ANY"}));
  lib_add->add_option("--root-cause", new_pattern.root_cause, "root cause");
  lib_add->add_option("--remediation", new_pattern.remediation, "remediation");
  auto* lib_list = library->add_subcommand("list", "list patterns");
  auto* lib_match = library->add_subcommand("match", "match a job against the library");
  CommonFlags match_flags;
  match_flags.attach(*lib_match);
  std::string match_job;
  lib_match->add_option("job", match_job, "job directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate the pipeline over a corpus");
  CommonFlags eval_flags;
  eval_flags.attach(*eval);
  std::string eval_corpus;
  std::string eval_out;
  eval->add_option("corpus", eval_corpus, "corpus root with case_* directories")->required();
  eval->add_option("--out", eval_out, "table file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*diagnose) {
      auto cfg = diag_flags.resolve();
      if (failed_opt->count()) cfg.failed_job = failed_job;
      if (history_opt->count()) cfg.history.assign(history.begin(), history.end());
      if (library_opt->count()) cfg.library = fs::path(library_path);
      if (presence_opt->count()) cfg.presence_fraction = presence_fraction;
      if (trees_opt->count()) cfg.tree_count = trees;
      if (subsample_opt->count()) cfg.subsample_size = subsample;
      if (topk_opt->count()) cfg.top_k = top_k;
      if (threshold_opt->count()) cfg.anomaly_threshold = threshold;
      if (top_events_opt->count()) cfg.top_events = top_events;
      if (rules_opt->count()) cfg.stage_rules = fs::path(stage_rules);
      if (marker_opt->count()) cfg.iteration_marker = iteration_marker;
      if (window_opt->count()) cfg.window = window;
      if (out_opt->count()) cfg.out = fs::path(out_path);
      if (format_opt->count()) cfg.format = format;
      const auto report = l4::diagnose(cfg);
      write_output(cfg.out, cfg.format == "text" ? report.to_text() : report.to_json());
      return 0;
    }
    if (*parse) {
      const auto cfg = parse_flags.resolve();
      const auto bundle = l4::load_and_parse(parse_job, cfg);
      if (parse_out.empty()) {
        l4::write_json_lines(bundle, std::cout);
      } else {
        std::ofstream f(parse_out, std::ios::binary | std::ios::trunc);
        if (!f) throw l4::Error(l4::ErrorCode::kIoError, fmt::format("cannot write {}", parse_out));
        l4::write_json_lines(bundle, f);
      }
      return 0;
    }
    if (*generate) {
      auto spec = spec_path.empty() ? l4::synth::WorkloadSpec{} : l4::synth::load_workload_spec(spec_path);
      if (synth_seed_opt->count()) {
        spec.seed = synth_seed;
      } else if (spec_path.empty()) {
        spec.seed = l4::seed_from_env(spec.seed);
      }
      const auto fault = l4::synth::load_fault_injection(fault_path);
      const auto truth = l4::synth::generate(spec, fault, synth_out);
      fmt::print("wrote {} node logs to {} ({} fault on {})\n", spec.node_count, synth_out,
                 truth.fault_type, fmt::join(truth.faulty_nodes, ","));
      return 0;
    }
    if (*success) {
      auto spec = success_spec.empty() ? l4::synth::WorkloadSpec{} : l4::synth::load_workload_spec(success_spec);
      if (success_seed_opt->count()) {
        spec.seed = success_seed;
      } else if (success_spec.empty()) {
        spec.seed = l4::seed_from_env(spec.seed);
      }
      l4::synth::generate_success(spec, success_out);
      fmt::print("wrote {} node logs to {}\n", spec.node_count, success_out);
      return 0;
    }
    if (*corpus) {
      l4::write_corpus(corpus_out, corpus_first, corpus_count, corpus_history, corpus_jobs);
      fmt::print("wrote {} cases to {}\n", corpus_count, corpus_out);
      return 0;
    }
    if (*lib_add) {
      new_pattern.category = l4::parse_fault_category(new_category);
      new_pattern.match_mode = l4::parse_match_mode(new_mode);
      for (const auto& s : new_signatures) new_pattern.signature_events.emplace_back(s);
      const auto lib = l4::add_pattern(lib_file, new_pattern);
      fmt::print("{} now holds {} pattern(s)\n", lib_file, lib.size());
      return 0;
    }
    if (*lib_list) {
      const auto lib = l4::FaultLibrary::load(lib_file);
      for (const auto& p : lib.patterns()) {
        std::vector<std::string> sigs;
        for (const auto& s : p.signature_events) sigs.push_back(s.source());
        fmt::print("{}\t{}\t{}\t{}\t{}\n", p.pattern_id, to_string(p.category), to_string(p.match_mode),
                   p.name, fmt::join(sigs, " | "));
      }
      return 0;
    }
    if (*lib_match) {
      const auto cfg = match_flags.resolve();
      const auto lib = l4::FaultLibrary::load(lib_file);
      const auto bundle = l4::load_and_parse(match_job, cfg);
      const auto results = l4::match(bundle, lib);
      for (const auto& r : results) {
        fmt::print("{}\t{:.2f}\t{}\n", r.pattern_id, r.confidence, fmt::join(r.matched_signatures, " | "));
      }
      if (results.empty()) fmt::print("no known fault pattern matched\n");
      return 0;
    }
    if (*eval) {
      const auto cfg = eval_flags.resolve();
      const auto results = l4::evaluate_corpus(eval_corpus, cfg);
      const auto text = l4::format_results(results, l4::summarize(results));
      write_output(eval_out.empty() ? std::nullopt : std::optional<fs::path>(eval_out), text);
      return 0;
    }
  } catch (const l4::Error& e) {
    fmt::print(stderr, "l4diag: {}\n", e.what());
    return kExitOperational;
  } catch (const std::exception& e) {
    fmt::print(stderr, "l4diag: {}\n", e.what());
    return kExitOperational;
  }
  return 0;
}
