#include "l4/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "l4/cross_job_filter.hpp"
#include "l4/error.hpp"
#include "l4/parallel.hpp"

namespace l4 {

namespace fs = std::filesystem;

EventScores evaluate_events(const std::vector<std::string>& predicted,
                            const std::vector<std::string>& truth) {
  const std::set<std::string> p(predicted.begin(), predicted.end());
  const std::set<std::string> t(truth.begin(), truth.end());
  if (p.empty() && t.empty()) return {1.0, 1.0, 1.0};
  std::size_t hits = 0;
  for (const auto& s : p) hits += t.count(s);
  EventScores out;
  out.precision = p.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(p.size());
  out.recall = t.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(t.size());
  const double sum = out.precision + out.recall;
  out.f1 = sum > 0.0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

EventScores evaluate_events(const DiagnosisReport& report, const synth::GroundTruth& truth) {
  return evaluate_events(report.event_signatures(), truth.failure_indicating_signatures);
}

std::optional<std::size_t> best_rank(const std::vector<std::string>& ranking,
                                     const std::vector<std::string>& faulty_nodes) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (std::find(faulty_nodes.begin(), faulty_nodes.end(), ranking[i]) != faulty_nodes.end()) {
      return i + 1;
    }
  }
  return std::nullopt;
}

double evaluate_topk(const std::vector<std::vector<std::string>>& rankings,
                     const std::vector<std::vector<std::string>>& faulty_nodes, std::size_t k) {
  if (rankings.empty() || rankings.size() != faulty_nodes.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} rankings for {} truths", rankings.size(), faulty_nodes.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const auto r = best_rank(rankings[i], faulty_nodes[i]);
    if (r && *r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double evaluate_topk(const std::vector<DiagnosisReport>& reports,
                     const std::vector<synth::GroundTruth>& truths, std::size_t k) {
  std::vector<std::vector<std::string>> rankings;
  std::vector<std::vector<std::string>> faulty;
  for (const auto& r : reports) {
    std::vector<std::string> ids;
    for (const auto& n : r.node_ranking) ids.push_back(n.node_id);
    rankings.push_back(std::move(ids));
  }
  for (const auto& t : truths) faulty.push_back(t.faulty_nodes);
  return evaluate_topk(rankings, faulty, k);
}

std::vector<std::string> baseline_rank(const ParsedBundle& bundle, BaselineMethod method) {
  struct Entry {
    std::string node;
    TimestampMs first_error = std::numeric_limits<TimestampMs>::max();
    std::size_t errors = 0;
  };
  std::vector<Entry> entries;
  for (const auto& [node_id, records] : bundle.nodes) {
    Entry e{node_id};
    for (const auto& r : records) {
      if (r.level != Level::kError) continue;
      ++e.errors;
      e.first_error = std::min(e.first_error, r.timestamp);
    }
    entries.push_back(std::move(e));
  }
  // Entries arrive in node_id order, so a stable sort keeps that as the tie rule.
  if (method == BaselineMethod::kErrorTime) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.first_error < b.first_error; });
  } else {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.errors > b.errors; });
  }
  std::vector<std::string> out;
  for (auto& e : entries) out.push_back(std::move(e.node));
  return out;
}

std::vector<std::string> level_only_detector(const ParsedBundle& bundle) {
  std::set<std::string> out;
  for (const auto& [_, records] : bundle.nodes) {
    for (const auto& r : records) {
      if (r.level == Level::kError) out.insert(bundle.signature(r.event_id));
    }
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> frequency_only_detector(const ParsedBundle& bundle) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [_, records] : bundle.nodes) {
    for (const auto& r : records) ++counts[bundle.signature(r.event_id)];
  }
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& [sig, n] : counts) order.emplace_back(n, sig);
  std::sort(order.begin(), order.end());
  const std::size_t take = (order.size() + 3) / 4;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(order[i].second);
  return out;
}

namespace {

std::vector<std::string> ranking_ids(const DiagnosisReport& report) {
  std::vector<std::string> ids;
  for (const auto& n : report.node_ranking) ids.push_back(n.node_id);
  return ids;
}

}  // namespace

CaseResult evaluate_case(const fs::path& case_dir, const RunConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  CaseResult out;
  out.name = case_dir.filename().string();
  const auto truth = synth::GroundTruth::load(case_dir / "failed" / "truth.json");
  out.fault_type = truth.fault_type;
  out.hardware = synth::is_hardware(synth::parse_fault_type(truth.fault_type));
  out.onset = truth.faulty_iteration;

  const auto failed = load_and_parse(case_dir / "failed", config);
  out.node_count = failed.nodes.size();
  std::vector<fs::path> history_dirs;
  for (const auto& entry : fs::directory_iterator(case_dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("history_", 0) == 0) {
      history_dirs.push_back(entry.path());
    }
  }
  std::sort(history_dirs.begin(), history_dirs.end());
  std::vector<ParsedBundle> history;
  for (const auto& h : history_dirs) history.push_back(load_and_parse(h, config));

  const AnalysisContext context{&failed, &history, nullptr};
  const auto report = analyze(context, config);

  out.pipeline = evaluate_events(report, truth);
  out.level_only = evaluate_events(level_only_detector(failed), truth.failure_indicating_signatures);
  out.frequency_only =
      evaluate_events(frequency_only_detector(failed), truth.failure_indicating_signatures);
  out.faulty_rank = best_rank(ranking_ids(report), truth.faulty_nodes);
  out.error_time_rank = best_rank(baseline_rank(failed, BaselineMethod::kErrorTime), truth.faulty_nodes);
  out.error_count_rank =
      best_rank(baseline_rank(failed, BaselineMethod::kErrorCount), truth.faulty_nodes);
  for (const auto& f : report.flagged_iterations) {
    if (!out.flagged_iteration || f.iteration < *out.flagged_iteration) out.flagged_iteration = f.iteration;
  }
  out.records_in = report.filter_stats.records_in;
  out.records_out = report.filter_stats.records_out;

  if (!history.empty()) {
    const auto filtered = filter(failed, build_pool(history), config.presence_fraction);
    std::set<std::string> before;
    std::set<std::string> after;
    for (const auto& [_, records] : failed.nodes) {
      for (const auto& r : records) before.insert(failed.signature(r.event_id));
    }
    for (const auto& [_, records] : filtered.nodes) {
      for (const auto& r : records) after.insert(filtered.signature(r.event_id));
    }
    for (const auto& sig : truth.failure_indicating_signatures) {
      if (before.count(sig) && !after.count(sig)) ++out.fault_signatures_removed;
    }
  }

  TemporalParams tparams;
  if (config.stage_rules) tparams.rules = load_stage_rules(*config.stage_rules);
  if (config.iteration_marker) tparams.marker = IterationMarker(TextPattern(*config.iteration_marker));
  tparams.window = config.window;
  tparams.jobs = config.jobs == 0 ? default_parallelism() : config.jobs;
  for (const auto& h : history) out.history_flags += analyze_temporal(h, tparams).flagged.size();

  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<CaseResult> evaluate_corpus(const fs::path& root, const RunConfig& config) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::kIoError, fmt::format("corpus directory {} not found", root.string()));
  }
  std::vector<fs::path> cases;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("case_", 0) == 0) {
      cases.push_back(entry.path());
    }
  }
  std::sort(cases.begin(), cases.end());
  if (cases.empty()) {
    throw Error(ErrorCode::kIoError, fmt::format("no case_* directories under {}", root.string()));
  }
  // Parallelism goes across cases; each case runs single-threaded.
  RunConfig per_case = config;
  per_case.jobs = 1;
  std::vector<CaseResult> results(cases.size());
  parallel_for(cases.size(), config.jobs,
               [&](std::size_t i) { results[i] = evaluate_case(cases[i], per_case); });
  return results;
}

CorpusSummary summarize(const std::vector<CaseResult>& results) {
  CorpusSummary s;
  s.cases = results.size();
  if (results.empty()) return s;
  const auto n = static_cast<double>(results.size());
  std::size_t hw_top1 = 0, hw_top5 = 0, hw_top8 = 0, et_top1 = 0, ec_top1 = 0, onset_hits = 0;
  for (const auto& r : results) {
    s.pipeline.precision += r.pipeline.precision / n;
    s.pipeline.recall += r.pipeline.recall / n;
    s.pipeline.f1 += r.pipeline.f1 / n;
    s.level_only.precision += r.level_only.precision / n;
    s.level_only.recall += r.level_only.recall / n;
    s.level_only.f1 += r.level_only.f1 / n;
    s.frequency_only.precision += r.frequency_only.precision / n;
    s.frequency_only.recall += r.frequency_only.recall / n;
    s.frequency_only.f1 += r.frequency_only.f1 / n;
    if (r.records_in > 0) {
      s.filter_removed_fraction +=
          (1.0 - static_cast<double>(r.records_out) / static_cast<double>(r.records_in)) / n;
    }
    s.fault_signatures_removed += r.fault_signatures_removed;
    s.history_flags += r.history_flags;
    s.seconds += r.seconds;
    const auto within = [](const std::optional<std::size_t>& rank, std::size_t k) {
      return rank && *rank <= k;
    };
    if (r.hardware) {
      ++s.hardware_cases;
      hw_top1 += within(r.faulty_rank, 1);
      hw_top5 += within(r.faulty_rank, 5);
      hw_top8 += within(r.faulty_rank, 8);
      et_top1 += within(r.error_time_rank, 1);
      ec_top1 += within(r.error_count_rank, 1);
    }
    if ((r.fault_type == "NETWORK" || r.fault_type == "HANG") && r.onset && *r.onset >= 25) {
      ++s.temporal_cases;
      if (r.flagged_iteration &&
          (*r.flagged_iteration + 1 >= *r.onset && *r.flagged_iteration <= *r.onset + 1)) {
        ++onset_hits;
      }
    }
  }
  if (s.hardware_cases > 0) {
    const auto h = static_cast<double>(s.hardware_cases);
    s.top1 = static_cast<double>(hw_top1) / h;
    s.top5 = static_cast<double>(hw_top5) / h;
    s.top8 = static_cast<double>(hw_top8) / h;
    s.error_time_top1 = static_cast<double>(et_top1) / h;
    s.error_count_top1 = static_cast<double>(ec_top1) / h;
  }
  if (s.temporal_cases > 0) {
    s.temporal_onset_accuracy =
        static_cast<double>(onset_hits) / static_cast<double>(s.temporal_cases);
  }
  return s;
}

namespace {

std::string opt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "-"; }

}  // namespace

std::string format_results(const std::vector<CaseResult>& results, const CorpusSummary& s) {
  std::string out =
      "case\tfault_type\tnodes\thardware\tprecision\trecall\tf1\tfaulty_rank\terror_time_rank\t"
      "error_count_rank\tflagged_iteration\tonset\tlevel_precision\tlevel_recall\t"
      "frequency_precision\tfrequency_recall\trecords_in\trecords_out\tfault_signatures_removed\t"
      "history_flags\n";
  for (const auto& r : results) {
    out += fmt::format(
        "{}\t{}\t{}\t{}\t{:.4f}\t{:.4f}\t{:.4f}\t{}\t{}\t{}\t{}\t{}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t"
        "{}\t{}\t{}\t{}\n",
        r.name, r.fault_type, r.node_count, r.hardware ? 1 : 0, r.pipeline.precision,
        r.pipeline.recall, r.pipeline.f1, opt(r.faulty_rank), opt(r.error_time_rank),
        opt(r.error_count_rank), opt(r.flagged_iteration), opt(r.onset), r.level_only.precision,
        r.level_only.recall, r.frequency_only.precision, r.frequency_only.recall, r.records_in,
        r.records_out, r.fault_signatures_removed, r.history_flags);
  }
  out += "\nmetric\tvalue\n";
  const auto row = [&](std::string_view name, double v) { out += fmt::format("{}\t{:.4f}\n", name, v); };
  const auto count = [&](std::string_view name, std::size_t v) { out += fmt::format("{}\t{}\n", name, v); };
  count("cases", s.cases);
  row("event_precision", s.pipeline.precision);
  row("event_recall", s.pipeline.recall);
  row("event_f1", s.pipeline.f1);
  count("hardware_cases", s.hardware_cases);
  row("top1", s.top1);
  row("top5", s.top5);
  row("top8", s.top8);
  row("error_time_top1", s.error_time_top1);
  row("error_count_top1", s.error_count_top1);
  row("filter_removed_fraction", s.filter_removed_fraction);
  count("fault_signatures_removed", s.fault_signatures_removed);
  count("temporal_cases", s.temporal_cases);
  row("temporal_onset_accuracy", s.temporal_onset_accuracy);
  count("history_flags", s.history_flags);
  row("level_only_precision", s.level_only.precision);
  row("level_only_recall", s.level_only.recall);
  row("level_only_f1", s.level_only.f1);
  row("frequency_only_precision", s.frequency_only.precision);
  row("frequency_only_recall", s.frequency_only.recall);
  row("frequency_only_f1", s.frequency_only.f1);
  return out;
}

void write_corpus(const fs::path& root, std::uint64_t first, std::size_t count,
                  std::size_t history_jobs, std::size_t jobs) {
  parallel_for(count, jobs, [&](std::size_t i) {
    synth::write_case(synth::make_case(first + i, history_jobs), root);
  });
}

}  // namespace l4
