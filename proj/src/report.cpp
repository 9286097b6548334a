#include "l4/report.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "l4/error.hpp"

namespace l4 {

using nlohmann::json;

std::string_view to_string(EvidenceSource source) {
  switch (source) {
    case EvidenceSource::kSpatial: return "SPATIAL";
    case EvidenceSource::kTemporal: return "TEMPORAL";
    case EvidenceSource::kLibrary: return "LIBRARY";
  }
  return "SPATIAL";
}

EvidenceSource parse_evidence_source(std::string_view name) {
  for (auto s : {EvidenceSource::kSpatial, EvidenceSource::kTemporal, EvidenceSource::kLibrary}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::kValidationError, fmt::format("unknown evidence source '{}'", name));
}

std::vector<std::string> DiagnosisReport::event_signatures() const {
  std::vector<std::string> out;
  out.reserve(failure_indicating_events.size());
  for (const auto& e : failure_indicating_events) out.push_back(e.signature);
  return out;
}

bool operator==(const DiagnosisReport& a, const DiagnosisReport& b) {
  return std::tie(a.schema, a.job_id, a.library_matches, a.node_ranking, a.suspicious_nodes,
                  a.failing_stage, a.flagged_iterations, a.failure_indicating_events, a.notes,
                  a.no_findings) ==
             std::tie(b.schema, b.job_id, b.library_matches, b.node_ranking, b.suspicious_nodes,
                      b.failing_stage, b.flagged_iterations, b.failure_indicating_events, b.notes,
                      b.no_findings) &&
         a.filter_stats.records_in == b.filter_stats.records_in &&
         a.filter_stats.records_out == b.filter_stats.records_out &&
         a.filter_stats.applied == b.filter_stats.applied;
}

namespace {

// First record of each event id on each node.
class FirstOccurrence {
 public:
  explicit FirstOccurrence(const ParsedBundle& bundle) : bundle_(bundle) {
    for (const auto& [node_id, records] : bundle.nodes) {
      auto& firsts = by_node_[node_id];
      for (std::size_t i = 0; i < records.size(); ++i) firsts.emplace(records[i].event_id, i);
    }
    for (std::size_t id = 0; id < bundle.signatures.size(); ++id) {
      by_signature_.emplace(bundle.signatures[id], static_cast<EventId>(id));
    }
  }

  std::optional<EventId> id_of(const std::string& signature) const {
    const auto it = by_signature_.find(signature);
    if (it == by_signature_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<RecordRef> on_node(const std::string& node_id, EventId id) const {
    const auto n = by_node_.find(node_id);
    if (n == by_node_.end()) return std::nullopt;
    const auto it = n->second.find(id);
    if (it == n->second.end()) return std::nullopt;
    return make_ref(node_id, bundle_.nodes.at(node_id), it->second);
  }

  // Earliest occurrence anywhere, ties by node id.
  std::optional<RecordRef> anywhere(EventId id) const {
    std::optional<RecordRef> best;
    for (const auto& [node_id, _] : by_node_) {
      auto ref = on_node(node_id, id);
      if (ref && (!best || ref->timestamp < best->timestamp)) best = std::move(ref);
    }
    return best;
  }

 private:
  const ParsedBundle& bundle_;
  std::map<std::string, std::map<EventId, std::size_t>> by_node_;
  std::map<std::string, EventId> by_signature_;
};

struct EventAccumulator {
  std::set<EvidenceSource> sources;
  std::optional<RecordRef> example;
};

void note_event(std::map<std::string, EventAccumulator>& events, const std::string& signature,
                EvidenceSource source, std::optional<RecordRef> example) {
  auto& acc = events[signature];
  acc.sources.insert(source);
  if (example && (!acc.example || example->timestamp < acc.example->timestamp)) {
    acc.example = std::move(example);
  }
}

json ref_to_json(const RecordRef& r) {
  return {{"node", r.node_id}, {"record", r.record_index}, {"line", r.source_line},
          {"ts_ms", r.timestamp}};
}

RecordRef ref_from_json(const json& j) {
  return {j.at("node").get<std::string>(), j.at("record").get<std::size_t>(),
          j.at("line").get<std::size_t>(), j.at("ts_ms").get<TimestampMs>()};
}

json refs_to_json(const std::vector<RecordRef>& refs) {
  json out = json::array();
  for (const auto& r : refs) out.push_back(ref_to_json(r));
  return out;
}

std::vector<RecordRef> refs_from_json(const json& j) {
  std::vector<RecordRef> out;
  for (const auto& r : j) out.push_back(ref_from_json(r));
  return out;
}

}  // namespace

DiagnosisReport assemble(const AssemblyInput& input) {
  if (input.bundle == nullptr) throw Error(ErrorCode::kInvalidArgument, "assemble needs a bundle");
  const ParsedBundle& bundle = *input.bundle;
  const FirstOccurrence first(bundle);

  DiagnosisReport report;
  report.job_id = bundle.job_id;
  report.filter_stats = input.filter_stats;
  report.notes = input.notes;
  report.notes.insert(report.notes.end(), input.temporal.warnings.begin(),
                      input.temporal.warnings.end());
  report.node_ranking = input.spatial.ranking;

  std::map<std::string, EventAccumulator> events;
  std::vector<RecordRef> stage_candidates;

  for (const auto& m : input.matches) {
    LibraryFinding f;
    f.pattern_id = m.pattern_id;
    f.confidence = m.confidence;
    f.matched_signatures = m.matched_signatures;
    f.matched_events = m.matched_events;
    if (input.library) {
      for (const auto& p : input.library->patterns()) {
        if (p.pattern_id != m.pattern_id) continue;
        f.name = p.name;
        f.category = std::string(to_string(p.category));
        f.root_cause = p.root_cause;
        f.remediation = p.remediation;
      }
    }
    for (const auto& sig : m.matched_signatures) {
      std::optional<RecordRef> example;
      for (const auto& ref : m.matched_events) {
        const auto& rec = bundle.nodes.at(ref.node_id).at(ref.record_index);
        if (bundle.signature(rec.event_id) != sig) continue;
        if (!example || ref.timestamp < example->timestamp) example = ref;
      }
      if (!example) {
        if (const auto id = first.id_of(sig)) example = first.anywhere(*id);
      }
      note_event(events, sig, EvidenceSource::kLibrary, example);
    }
    stage_candidates.insert(stage_candidates.end(), m.matched_events.begin(),
                            m.matched_events.end());
    report.library_matches.push_back(std::move(f));
  }

  for (const auto& node : input.spatial.recommended) {
    SuspiciousNode s;
    s.node_id = node.node_id;
    s.score = node.score;
    s.rank = node.rank;
    const auto it = input.spatial.attributions.find(node.node_id);
    if (it != input.spatial.attributions.end()) {
      for (const auto& d : it->second) {
        s.events.push_back({d.signature, d.deviation, d.count, d.median});
        std::optional<RecordRef> example;
        if (const auto id = first.id_of(d.signature)) {
          example = first.on_node(node.node_id, *id);
          if (!example) example = first.anywhere(*id);
        }
        if (example) stage_candidates.push_back(*example);
        note_event(events, d.signature, EvidenceSource::kSpatial, example);
      }
    }
    report.suspicious_nodes.push_back(std::move(s));
  }

  for (const auto& v : input.temporal.flagged) {
    FlaggedIteration f;
    f.iteration = v.iteration_index;
    f.node_id = v.node_id;
    f.similarity = v.similarity;
    f.population_mean = v.population_mean;
    f.population_stddev = v.population_stddev;
    const auto& records = bundle.nodes.at(v.node_id);
    for (EventId e : v.deviating_events) {
      f.deviating_events.push_back(bundle.signature(e));
      std::optional<RecordRef> example;
      for (std::size_t idx : v.records) {
        if (records[idx].event_id == e) {
          example = make_ref(v.node_id, records, idx);
          break;
        }
      }
      note_event(events, bundle.signature(e), EvidenceSource::kTemporal, example);
    }
    for (EventId e : v.missing_events) f.missing_events.push_back(bundle.signature(e));
    report.flagged_iterations.push_back(std::move(f));
  }
  if (!input.temporal.flagged.empty()) {
    // The first flagged iteration counts as evidence from its first record.
    const auto& v = input.temporal.flagged.front();
    if (!v.records.empty()) {
      stage_candidates.push_back(make_ref(v.node_id, bundle.nodes.at(v.node_id), v.records.front()));
    }
  }

  for (auto& [sig, acc] : events) {
    if (!acc.example) continue;  // cannot cite a record; not reportable
    FailureEvent e;
    e.signature = sig;
    e.sources.assign(acc.sources.begin(), acc.sources.end());
    e.example = *acc.example;
    report.failure_indicating_events.push_back(std::move(e));
  }
  std::sort(report.failure_indicating_events.begin(), report.failure_indicating_events.end(),
            [](const FailureEvent& a, const FailureEvent& b) {
              if (a.sources.size() != b.sources.size()) return a.sources.size() > b.sources.size();
              if (a.example.timestamp != b.example.timestamp) {
                return a.example.timestamp < b.example.timestamp;
              }
              return a.signature < b.signature;
            });

  if (!stage_candidates.empty() && !input.temporal.stages.spans.empty()) {
    const auto& seg = input.temporal.stages;
    const auto common = seg.common_latest_stage();
    TimestampMs earliest = std::numeric_limits<TimestampMs>::max();
    for (const auto& r : stage_candidates) earliest = std::min(earliest, r.timestamp);
    std::optional<Stage> chosen;
    for (const auto& r : stage_candidates) {
      if (r.timestamp != earliest) continue;
      const Stage s = seg.stage_of(r.node_id, r.record_index);
      // Prefer the stage closest to the latest one every node reached.
      const auto distance = [&](Stage x) {
        return common ? std::abs(static_cast<int>(x) - static_cast<int>(*common)) : 0;
      };
      if (!chosen || distance(s) < distance(*chosen) ||
          (distance(s) == distance(*chosen) && s > *chosen)) {
        chosen = s;
      }
    }
    StageFinding finding;
    finding.stage = *chosen;
    std::sort(stage_candidates.begin(), stage_candidates.end(),
              [](const RecordRef& a, const RecordRef& b) {
                return std::tie(a.timestamp, a.node_id, a.record_index) <
                       std::tie(b.timestamp, b.node_id, b.record_index);
              });
    for (const auto& r : stage_candidates) {
      if (finding.evidence.size() >= 5) break;
      if (seg.stage_of(r.node_id, r.record_index) != finding.stage) continue;
      if (!finding.evidence.empty() && finding.evidence.back() == r) continue;
      finding.evidence.push_back(r);
    }
    report.failing_stage = std::move(finding);
  }

  report.no_findings = report.library_matches.empty() && report.suspicious_nodes.empty() &&
                       report.flagged_iterations.empty() &&
                       report.failure_indicating_events.empty();
  if (report.no_findings) report.notes.push_back("no failure-indicating pattern found");
  return report;
}

std::string DiagnosisReport::to_json() const {
  json j;
  j["schema"] = schema;
  j["job_id"] = job_id;
  j["no_findings"] = no_findings;

  json lib = json::array();
  for (const auto& m : library_matches) {
    lib.push_back({{"pattern_id", m.pattern_id},
                   {"name", m.name},
                   {"category", m.category},
                   {"confidence", m.confidence},
                   {"matched_signatures", m.matched_signatures},
                   {"matched_events", refs_to_json(m.matched_events)},
                   {"root_cause", m.root_cause},
                   {"remediation", m.remediation}});
  }
  j["library_matches"] = lib;

  json ranking = json::array();
  for (const auto& n : node_ranking) {
    ranking.push_back({{"node", n.node_id}, {"score", n.score}, {"rank", n.rank}});
  }
  j["node_ranking"] = ranking;

  json nodes = json::array();
  for (const auto& n : suspicious_nodes) {
    json evs = json::array();
    for (const auto& e : n.events) {
      evs.push_back({{"signature", e.signature},
                     {"deviation", e.deviation},
                     {"count", e.count},
                     {"median", e.median}});
    }
    nodes.push_back({{"node", n.node_id}, {"score", n.score}, {"rank", n.rank}, {"events", evs}});
  }
  j["suspicious_nodes"] = nodes;

  if (failing_stage) {
    j["failing_stage"] = {{"stage", std::string(to_string(failing_stage->stage))},
                          {"evidence", refs_to_json(failing_stage->evidence)}};
  } else {
    j["failing_stage"] = nullptr;
  }

  json iters = json::array();
  for (const auto& f : flagged_iterations) {
    iters.push_back({{"iteration", f.iteration},
                     {"node", f.node_id},
                     {"similarity", f.similarity},
                     {"population_mean", f.population_mean},
                     {"population_stddev", f.population_stddev},
                     {"deviating_events", f.deviating_events},
                     {"missing_events", f.missing_events}});
  }
  j["flagged_iterations"] = iters;

  json evs = json::array();
  for (const auto& e : failure_indicating_events) {
    json sources = json::array();
    for (auto s : e.sources) sources.push_back(std::string(to_string(s)));
    evs.push_back({{"signature", e.signature}, {"sources", sources}, {"example", ref_to_json(e.example)}});
  }
  j["failure_indicating_events"] = evs;

  j["filter_stats"] = {{"records_in", filter_stats.records_in},
                       {"records_out", filter_stats.records_out},
                       {"applied", filter_stats.applied}};
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

DiagnosisReport DiagnosisReport::from_json(std::string_view text) {
  DiagnosisReport r;
  try {
    const json j = json::parse(text);
    r.schema = j.at("schema").get<int>();
    if (r.schema != kReportSchemaVersion) {
      throw Error(ErrorCode::kValidationError, fmt::format("unsupported report schema {}", r.schema));
    }
    r.job_id = j.at("job_id").get<std::string>();
    r.no_findings = j.at("no_findings").get<bool>();
    for (const auto& m : j.at("library_matches")) {
      LibraryFinding f;
      f.pattern_id = m.at("pattern_id").get<std::string>();
      f.name = m.at("name").get<std::string>();
      f.category = m.at("category").get<std::string>();
      f.confidence = m.at("confidence").get<double>();
      f.matched_signatures = m.at("matched_signatures").get<std::vector<std::string>>();
      f.matched_events = refs_from_json(m.at("matched_events"));
      f.root_cause = m.at("root_cause").get<std::string>();
      f.remediation = m.at("remediation").get<std::string>();
      r.library_matches.push_back(std::move(f));
    }
    for (const auto& n : j.at("node_ranking")) {
      r.node_ranking.push_back({n.at("node").get<std::string>(), n.at("score").get<double>(),
                                n.at("rank").get<std::size_t>()});
    }
    for (const auto& n : j.at("suspicious_nodes")) {
      SuspiciousNode s;
      s.node_id = n.at("node").get<std::string>();
      s.score = n.at("score").get<double>();
      s.rank = n.at("rank").get<std::size_t>();
      for (const auto& e : n.at("events")) {
        s.events.push_back({e.at("signature").get<std::string>(), e.at("deviation").get<double>(),
                            e.at("count").get<std::int64_t>(), e.at("median").get<double>()});
      }
      r.suspicious_nodes.push_back(std::move(s));
    }
    if (!j.at("failing_stage").is_null()) {
      const auto& s = j.at("failing_stage");
      r.failing_stage = StageFinding{parse_stage(s.at("stage").get<std::string>()),
                                     refs_from_json(s.at("evidence"))};
    }
    for (const auto& f : j.at("flagged_iterations")) {
      FlaggedIteration it;
      it.iteration = f.at("iteration").get<std::size_t>();
      it.node_id = f.at("node").get<std::string>();
      it.similarity = f.at("similarity").get<double>();
      it.population_mean = f.at("population_mean").get<double>();
      it.population_stddev = f.at("population_stddev").get<double>();
      it.deviating_events = f.at("deviating_events").get<std::vector<std::string>>();
      it.missing_events = f.at("missing_events").get<std::vector<std::string>>();
      r.flagged_iterations.push_back(std::move(it));
    }
    for (const auto& e : j.at("failure_indicating_events")) {
      FailureEvent ev;
      ev.signature = e.at("signature").get<std::string>();
      for (const auto& s : e.at("sources")) ev.sources.push_back(parse_evidence_source(s.get<std::string>()));
      ev.example = ref_from_json(e.at("example"));
      r.failure_indicating_events.push_back(std::move(ev));
    }
    const auto& fs = j.at("filter_stats");
    r.filter_stats.records_in = fs.at("records_in").get<std::size_t>();
    r.filter_stats.records_out = fs.at("records_out").get<std::size_t>();
    r.filter_stats.applied = fs.at("applied").get<bool>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidationError, fmt::format("malformed report: {}", e.what()));
  }
  return r;
}

std::string DiagnosisReport::to_text() const {
  constexpr std::size_t kMaxEvents = 20;
  constexpr std::size_t kMaxNodes = 8;
  constexpr std::size_t kMaxIterations = 5;

  std::string out = fmt::format("Diagnosis for job {}\n", job_id);
  if (no_findings) out += "No failure-indicating pattern found.\n";

  if (!library_matches.empty()) {
    out += "\nKnown fault patterns:\n";
    for (const auto& m : library_matches) {
      out += fmt::format("  {} ({}, {}) confidence {:.2f}\n", m.pattern_id, m.name, m.category,
                         m.confidence);
      if (!m.root_cause.empty()) out += fmt::format("    root cause: {}\n", m.root_cause);
      if (!m.remediation.empty()) out += fmt::format("    remediation: {}\n", m.remediation);
    }
  }

  if (failing_stage) {
    out += fmt::format("\nFailing stage: {}\n", to_string(failing_stage->stage));
  }

  if (!suspicious_nodes.empty()) {
    out += "\nSuspicious nodes:\n";
    for (std::size_t i = 0; i < suspicious_nodes.size() && i < kMaxNodes; ++i) {
      const auto& n = suspicious_nodes[i];
      out += fmt::format("  #{} {} score {:.3f}\n", n.rank, n.node_id, n.score);
      for (std::size_t k = 0; k < n.events.size() && k < 3; ++k) {
        out += fmt::format("      {} (count {}, median {:g})\n", n.events[k].signature,
                           n.events[k].count, n.events[k].median);
      }
    }
    if (suspicious_nodes.size() > kMaxNodes) {
      out += fmt::format("  ... {} more\n", suspicious_nodes.size() - kMaxNodes);
    }
  }

  if (!flagged_iterations.empty()) {
    out += "\nFlagged iterations:\n";
    for (std::size_t i = 0; i < flagged_iterations.size() && i < kMaxIterations; ++i) {
      const auto& f = flagged_iterations[i];
      out += fmt::format("  iteration {} on {}: similarity {:.3f} (mean {:.3f}, sd {:.3f})\n",
                         f.iteration, f.node_id, f.similarity, f.population_mean,
                         f.population_stddev);
    }
    if (flagged_iterations.size() > kMaxIterations) {
      out += fmt::format("  ... {} more\n", flagged_iterations.size() - kMaxIterations);
    }
  }

  if (!failure_indicating_events.empty()) {
    out += "\nFailure-indicating events:\n";
    for (std::size_t i = 0; i < failure_indicating_events.size() && i < kMaxEvents; ++i) {
      const auto& e = failure_indicating_events[i];
      std::string sources;
      for (auto s : e.sources) {
        if (!sources.empty()) sources += ',';
        sources += to_string(s);
      }
      out += fmt::format("  [{}] {}\n      e.g. {} line {}\n", sources, e.signature,
                         e.example.node_id, e.example.source_line);
    }
    if (failure_indicating_events.size() > kMaxEvents) {
      out += fmt::format("  ... {} more\n", failure_indicating_events.size() - kMaxEvents);
    }
  }

  out += fmt::format("\nCross-job filter: {} -> {} records{}\n", filter_stats.records_in,
                     filter_stats.records_out, filter_stats.applied ? "" : " (no history, skipped)");
  for (const auto& n : notes) out += fmt::format("note: {}\n", n);
  return out;
}

}  // namespace l4
