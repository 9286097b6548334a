#include <doctest.h>

#include <nlohmann/json.hpp>

#include "l4/drain.hpp"
#include "l4/error.hpp"
#include "l4/report.hpp"

using namespace l4;

namespace {

// Two nodes; each logs a stage boundary, a training start, then work. Node
// n1 additionally logs a link failure inside the training stage.
ParsedBundle job() {
  JobBundle b;
  b.job_id = "job-42";
  const std::vector<std::string> common = {"Initializing distributed environment", "Start training loop",
                                           "iteration 1 done", "iteration 2 done"};
  for (const char* node : {"n0", "n1"}) {
    auto& recs = b.nodes[node];
    TimestampMs t = 1000;
    for (const auto& m : common) recs.push_back({node, t += 10, Level::kInfo, m, recs.size() + 1});
  }
  b.nodes["n1"].push_back({"n1", 1035, Level::kError, "NIC port link down", 5});
  b.nodes["n1"].push_back({"n1", 1036, Level::kError, "error cqe status", 6});
  return parse_bundle(b);
}

EventId id_of(const ParsedBundle& b, const std::string& sig) {
  for (std::size_t i = 0; i < b.signatures.size(); ++i) {
    if (b.signatures[i] == sig) return static_cast<EventId>(i);
  }
  FAIL("no such signature: " << sig);
  return 0;
}

AssemblyInput base(const ParsedBundle& b) {
  AssemblyInput in;
  in.bundle = &b;
  in.temporal.stages = segment_stages(b, default_stage_rules());
  in.filter_stats = {b.record_count(), b.record_count(), false};
  return in;
}

}  // namespace

TEST_CASE("assemble: spatial findings only") {
  const auto b = job();
  auto in = base(b);
  in.spatial.ranking = {{"n1", 0.8, 1}, {"n0", 0.4, 2}};
  in.spatial.recommended = {{"n1", 0.8, 1}};
  in.spatial.attributions["n1"] = {{"NIC port link down", 1.0, 1, 0.5}};
  const auto r = assemble(in);
  CHECK(r.job_id == "job-42");
  CHECK_FALSE(r.no_findings);
  REQUIRE(r.failing_stage.has_value());
  CHECK(r.failing_stage->stage == Stage::kIterTrain);
  REQUIRE(r.failing_stage->evidence.size() == 1);
  CHECK(r.failing_stage->evidence[0].source_line == 5);
  REQUIRE(r.suspicious_nodes.size() == 1);
  CHECK(r.suspicious_nodes[0].events[0].signature == "NIC port link down");
  REQUIRE(r.failure_indicating_events.size() == 1);
  CHECK(r.failure_indicating_events[0].sources == std::vector<EvidenceSource>{EvidenceSource::kSpatial});
  CHECK(r.failure_indicating_events[0].example.node_id == "n1");
  CHECK(r.node_ranking.size() == 2);
}

TEST_CASE("assemble: library match carries root cause and remediation verbatim") {
  const auto b = job();
  FaultLibrary lib;
  FaultPattern p;
  p.pattern_id = "roce-cqe";
  p.name = "RoCE completion error";
  p.signature_events = {TextPattern("error cqe status")};
  p.root_cause = "Optical module on the RoCE link degraded:\n  check port 3";
  p.remediation = "Swap the module; re-run with --resume";
  lib.add(p);
  auto in = base(b);
  in.library = &lib;
  in.matches = match(b, lib);
  const auto r = assemble(in);
  REQUIRE(r.library_matches.size() == 1);
  CHECK(r.library_matches[0].root_cause == p.root_cause);
  CHECK(r.library_matches[0].remediation == p.remediation);
  CHECK(r.library_matches[0].category == "NETWORK");
  CHECK(r.library_matches[0].name == p.name);
  REQUIRE(r.failure_indicating_events.size() == 1);
  CHECK(r.failure_indicating_events[0].signature == "error cqe status");
  CHECK(r.failure_indicating_events[0].sources == std::vector<EvidenceSource>{EvidenceSource::kLibrary});
  CHECK(r.failing_stage->stage == Stage::kIterTrain);
  CHECK_FALSE(r.no_findings);
}

TEST_CASE("assemble: no findings") {
  const auto b = job();
  const auto r = assemble(base(b));
  CHECK(r.no_findings);
  CHECK(r.library_matches.empty());
  CHECK(r.suspicious_nodes.empty());
  CHECK(r.flagged_iterations.empty());
  CHECK(r.failure_indicating_events.empty());
  CHECK_FALSE(r.failing_stage.has_value());
  REQUIRE_FALSE(r.notes.empty());
  CHECK(r.notes.back() == "no failure-indicating pattern found");
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("no_findings") == true);
  CHECK(j.at("schema") == 1);
}

TEST_CASE("assemble: sources merge across analyzers and rank events") {
  const auto b = job();
  FaultLibrary lib;
  FaultPattern p;
  p.pattern_id = "cqe";
  p.signature_events = {TextPattern("error cqe status")};
  lib.add(p);
  auto in = base(b);
  in.library = &lib;
  in.matches = match(b, lib);
  in.spatial.recommended = {{"n1", 0.9, 1}};
  in.spatial.attributions["n1"] = {{"NIC port link down", 1.0, 1, 0.0}, {"error cqe status", 1.0, 1, 0.0}};
  IterationVerdict v;
  v.iteration_index = 1;
  v.node_id = "n1";
  v.similarity = 0.5;
  v.flagged = true;
  v.deviating_events = {id_of(b, "NIC port link down")};
  v.records = {3, 4, 5};
  in.temporal.flagged = {v};
  const auto r = assemble(in);
  REQUIRE(r.failure_indicating_events.size() == 2);
  // Both events have two sources; the earlier example wins the tie.
  CHECK(r.failure_indicating_events[0].signature == "NIC port link down");
  CHECK(r.failure_indicating_events[0].sources ==
        std::vector<EvidenceSource>{EvidenceSource::kSpatial, EvidenceSource::kTemporal});
  CHECK(r.failure_indicating_events[1].sources ==
        std::vector<EvidenceSource>{EvidenceSource::kSpatial, EvidenceSource::kLibrary});
  REQUIRE(r.flagged_iterations.size() == 1);
  CHECK(r.flagged_iterations[0].deviating_events == std::vector<std::string>{"NIC port link down"});

  // Every event cites a record that exists in the bundle and has the signature.
  for (const auto& e : r.failure_indicating_events) {
    const auto& recs = b.nodes.at(e.example.node_id);
    REQUIRE(e.example.record_index < recs.size());
    CHECK(b.signature(recs[e.example.record_index].event_id) == e.signature);
    CHECK(recs[e.example.record_index].source_line == e.example.source_line);
  }
  // Union invariant: every analyzer-cited signature appears in the event list.
  const auto sigs = r.event_signatures();
  for (const char* s : {"NIC port link down", "error cqe status"}) {
    CHECK(std::find(sigs.begin(), sigs.end(), s) != sigs.end());
  }

  SUBCASE("deterministic and round-trips through JSON") {
    const auto again = assemble(in);
    CHECK(again == r);
    CHECK(again.to_json() == r.to_json());
    const auto back = DiagnosisReport::from_json(r.to_json());
    CHECK(back == r);
    CHECK(back.to_json() == r.to_json());
  }
  SUBCASE("text form") {
    const auto text = r.to_text();
    CHECK(text.find("job-42") != std::string::npos);
    CHECK(text.find("NIC port link down") != std::string::npos);
    CHECK(text.find("ITER_TRAIN") != std::string::npos);
  }
}

TEST_CASE("report: text form truncates long sections") {
  DiagnosisReport r;
  r.job_id = "big";
  r.no_findings = false;
  for (int i = 0; i < 30; ++i) {
    r.failure_indicating_events.push_back(
        {"event number " + std::to_string(100 + i), {EvidenceSource::kSpatial}, {"n", 0, 1, 0}});
  }
  const auto text = r.to_text();
  CHECK(text.find("event number 119") != std::string::npos);
  CHECK(text.find("event number 120") == std::string::npos);
}

TEST_CASE("report: malformed JSON is rejected") {
  CHECK_THROWS_AS(DiagnosisReport::from_json("{not json"), Error);
  CHECK_THROWS_AS(DiagnosisReport::from_json(R"({"schema": 2})"), Error);
  CHECK(parse_evidence_source("TEMPORAL") == EvidenceSource::kTemporal);
  CHECK(to_string(EvidenceSource::kLibrary) == "LIBRARY");
}
