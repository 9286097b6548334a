#include "l4/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "l4/dtw.hpp"
#include "l4/error.hpp"
#include "l4/parallel.hpp"

namespace l4 {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kEnvInit: return "ENV_INIT";
    case Stage::kDataLoad: return "DATA_LOAD";
    case Stage::kModelInit: return "MODEL_INIT";
    case Stage::kIterTrain: return "ITER_TRAIN";
    case Stage::kCheckpoint: return "CHECKPOINT";
    case Stage::kTeardown: return "TEARDOWN";
  }
  return "ENV_INIT";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::kEnvInit, Stage::kDataLoad, Stage::kModelInit, Stage::kIterTrain,
                  Stage::kCheckpoint, Stage::kTeardown}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::kValidationError, fmt::format("unknown stage '{}'", name));
}

std::vector<StageRule> default_stage_rules() {
  return {
      {Stage::kEnvInit, {TextPattern("Initializing distributed environment")}, 10},
      {Stage::kDataLoad, {TextPattern("Start loading dataset from")}, 20},
      {Stage::kModelInit, {TextPattern("Start building model")}, 30},
      {Stage::kIterTrain, {TextPattern("Start training loop")}, 40},
      {Stage::kCheckpoint, {TextPattern("Saving final checkpoint")}, 50},
      {Stage::kTeardown, {TextPattern("Training finished, shutting down")}, 60},
  };
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<StageRule> parse_stage_rules(std::string_view text) {
  std::vector<StageRule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto first = body.find('|');
    const auto last = body.rfind('|');
    if (first == std::string_view::npos || first == last) {
      throw Error(ErrorCode::kValidationError,
                  fmt::format("rule line {}: expected 'STAGE | pattern | priority'", line_no));
    }
    const Stage stage = parse_stage(trim(body.substr(0, first)));
    const std::string pattern(trim(body.substr(first + 1, last - first - 1)));
    const std::string prio(trim(body.substr(last + 1)));
    int priority = 0;
    try {
      std::size_t used = 0;
      priority = std::stoi(prio, &used);
      if (used != prio.size()) throw std::invalid_argument(prio);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kValidationError,
                  fmt::format("rule line {}: bad priority '{}'", line_no, prio));
    }
    auto it = std::find_if(rules.begin(), rules.end(),
                           [&](const StageRule& r) { return r.stage == stage; });
    if (it == rules.end()) {
      rules.push_back({stage, {TextPattern(pattern)}, priority});
    } else {
      if (it->priority != priority) {
        throw Error(ErrorCode::kValidationError,
                    fmt::format("rule line {}: stage {} already has priority {}", line_no,
                                to_string(stage), it->priority));
      }
      it->boundary_patterns.emplace_back(pattern);
    }
  }
  validate_stage_rules(rules);
  return rules;
}

std::vector<StageRule> load_stage_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open rule file {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_stage_rules(ss.str());
}

void validate_stage_rules(const std::vector<StageRule>& rules) {
  std::set<int> priorities;
  bool has_iter = false;
  for (const auto& r : rules) {
    if (r.boundary_patterns.empty()) {
      throw Error(ErrorCode::kValidationError,
                  fmt::format("stage rule {} has no patterns", to_string(r.stage)));
    }
    if (!priorities.insert(r.priority).second) {
      throw Error(ErrorCode::kValidationError,
                  fmt::format("duplicate stage rule priority {}", r.priority));
    }
    has_iter = has_iter || r.stage == Stage::kIterTrain;
  }
  if (!has_iter) throw Error(ErrorCode::kValidationError, "stage rules must cover ITER_TRAIN");
}

bool StageSegmentation::iterative_stage_found() const {
  return nodes_without_iterative_stage.size() < spans.size();
}

Stage StageSegmentation::stage_of(const std::string& node_id, std::size_t record_index) const {
  const auto& node_spans = spans.at(node_id);
  for (const auto& s : node_spans) {
    if (record_index >= s.begin && record_index < s.end) return s.stage;
  }
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("record {} of node {} outside every stage span", record_index, node_id));
}

std::optional<Stage> StageSegmentation::common_latest_stage() const {
  std::optional<Stage> common;
  for (const auto& [_, node_spans] : spans) {
    Stage latest = Stage::kEnvInit;
    for (const auto& s : node_spans) latest = std::max(latest, s.stage);
    common = common ? std::min(*common, latest) : latest;
  }
  return common;
}

StageSegmentation segment_stages(const ParsedBundle& bundle, const std::vector<StageRule>& rules) {
  validate_stage_rules(rules);
  // Resolve each template once: the highest-priority matching rule, if any.
  std::vector<std::optional<Stage>> boundary(bundle.signatures.size());
  for (std::size_t id = 0; id < bundle.signatures.size(); ++id) {
    const StageRule* best = nullptr;
    for (const auto& rule : rules) {
      const bool hit = std::any_of(rule.boundary_patterns.begin(), rule.boundary_patterns.end(),
                                   [&](const TextPattern& p) { return p.matches(bundle.signatures[id]); });
      if (hit && (best == nullptr || rule.priority > best->priority)) best = &rule;
    }
    if (best) boundary[id] = best->stage;
  }

  StageSegmentation seg;
  for (const auto& [node_id, records] : bundle.nodes) {
    auto& node_spans = seg.spans[node_id];
    Stage current = Stage::kEnvInit;
    std::size_t begin = 0;
    bool reached_iter = false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& b = boundary[records[i].event_id];
      if (!b || *b == current) continue;
      if (i > begin) node_spans.push_back({current, begin, i});
      current = *b;
      begin = i;
      reached_iter = reached_iter || current == Stage::kIterTrain;
    }
    if (records.size() > begin || node_spans.empty()) {
      node_spans.push_back({current, begin, records.size()});
    }
    if (!reached_iter) seg.nodes_without_iterative_stage.push_back(node_id);
  }
  return seg;
}

bool IterationMarker::matches(const LogTemplate& tmpl) const {
  if (pattern_) return pattern_->matches(tmpl.signature());
  const auto& t = tmpl.tokens;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != "step" && t[i] != "iteration" && t[i] != "iter") continue;
    if ((i + 1 < t.size() && t[i + 1] == kWildcard) || (i > 0 && t[i - 1] == kWildcard)) {
      return true;
    }
  }
  return false;
}

std::vector<IterationSequence> segment_iterations(std::string_view node_id,
                                                  std::span<const ParsedRecord> records,
                                                  std::span<const std::size_t> record_indices,
                                                  const std::function<bool(EventId)>& is_marker) {
  std::vector<IterationSequence> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (is_marker(records[i].event_id)) {
      out.push_back({out.size(), std::string(node_id), {}, {}});
    }
    if (out.empty()) continue;
    out.back().events.push_back(records[i].event_id);
    out.back().records.push_back(i < record_indices.size() ? record_indices[i] : i);
  }
  if (out.empty()) {
    throw Error(ErrorCode::kNoIterationMarkers,
                fmt::format("no iteration marker in the training span of {}", node_id));
  }
  return out;
}

std::vector<IterationVerdict> windowed_verdicts(const std::vector<IterationSequence>& sequences,
                                                std::size_t window) {
  if (window == 0) throw Error(ErrorCode::kInvalidArgument, "window must be positive");
  std::vector<IterationVerdict> out;
  out.reserve(sequences.size());
  // Welford accumulators over the similarities of iterations >= window.
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& current = sequences[i];
    IterationVerdict v;
    v.iteration_index = current.iteration_index;
    v.node_id = current.node_id;
    v.records = current.records;
    const std::size_t first = i >= window ? i - window : 0;
    if (i > first && !current.events.empty()) {
      double total = 0.0;
      std::size_t compared = 0;
      for (std::size_t j = first; j < i; ++j) {
        if (sequences[j].events.empty()) continue;
        total += sequence_similarity(current.events, sequences[j].events);
        ++compared;
      }
      v.similarity = compared ? total / static_cast<double>(compared) : 1.0;

      std::unordered_set<EventId> window_events;
      std::vector<EventId> window_order;
      for (std::size_t j = first; j < i; ++j) {
        for (EventId e : sequences[j].events) {
          if (window_events.insert(e).second) window_order.push_back(e);
        }
      }
      std::unordered_set<EventId> current_events;
      for (EventId e : current.events) {
        if (current_events.insert(e).second && !window_events.count(e)) {
          v.deviating_events.push_back(e);
        }
      }
      for (EventId e : window_order) {
        if (!current_events.count(e)) v.missing_events.push_back(e);
      }
    }
    if (i >= window) {
      ++n;
      const double delta = v.similarity - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (v.similarity - mean);
      const double sigma = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
      v.population_mean = mean;
      v.population_stddev = sigma;
      v.flagged = v.similarity < mean - 3.0 * sigma;
    }
    out.push_back(std::move(v));
  }
  return out;
}

TemporalResult analyze_temporal(const ParsedBundle& bundle, const TemporalParams& params) {
  TemporalResult result;
  result.stages = segment_stages(bundle, params.rules);
  if (!result.stages.iterative_stage_found()) {
    result.warnings.push_back("NoIterativeStage: no node reached ITER_TRAIN; iteration analysis skipped");
  } else if (!result.stages.nodes_without_iterative_stage.empty()) {
    result.warnings.push_back(fmt::format("NoIterativeStage: {} node(s) never reached ITER_TRAIN",
                                          result.stages.nodes_without_iterative_stage.size()));
  }

  std::vector<bool> marker(bundle.templates.size());
  for (std::size_t id = 0; id < bundle.templates.size(); ++id) {
    marker[id] = params.marker.matches(bundle.templates[id]);
  }
  const auto is_marker = [&](EventId id) { return static_cast<bool>(marker[id]); };

  std::vector<const std::string*> node_ids;
  for (const auto& [node_id, _] : bundle.nodes) node_ids.push_back(&node_id);
  std::vector<std::vector<IterationVerdict>> per_node(node_ids.size());
  std::vector<std::string> node_warnings(node_ids.size());

  parallel_for(node_ids.size(), params.jobs, [&](std::size_t k) {
    const std::string& node_id = *node_ids[k];
    const auto& records = bundle.nodes.at(node_id);
    std::vector<ParsedRecord> span_records;
    std::vector<std::size_t> span_indices;
    for (const auto& s : result.stages.spans.at(node_id)) {
      if (s.stage != Stage::kIterTrain) continue;
      for (std::size_t i = s.begin; i < s.end; ++i) {
        span_records.push_back(records[i]);
        span_indices.push_back(i);
      }
    }
    if (span_records.empty()) return;
    try {
      const auto sequences = segment_iterations(node_id, span_records, span_indices, is_marker);
      per_node[k] = windowed_verdicts(sequences, params.window);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoIterationMarkers) throw;
      node_warnings[k] = e.what();
    }
  });

  for (std::size_t k = 0; k < node_ids.size(); ++k) {
    if (!node_warnings[k].empty()) result.warnings.push_back(node_warnings[k]);
    for (const auto& v : per_node[k]) {
      if (v.flagged) result.flagged.push_back(v);
    }
    result.verdicts[*node_ids[k]] = std::move(per_node[k]);
  }
  std::sort(result.flagged.begin(), result.flagged.end(), [](const auto& a, const auto& b) {
    if (a.iteration_index != b.iteration_index) return a.iteration_index < b.iteration_index;
    return a.node_id < b.node_id;
  });
  for (const auto& v : result.flagged) {
    if (result.flagged_iterations.empty() || result.flagged_iterations.back() != v.iteration_index) {
      result.flagged_iterations.push_back(v.iteration_index);
    }
  }
  return result;
}

}  // namespace l4
