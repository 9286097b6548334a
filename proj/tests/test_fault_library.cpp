#include <doctest.h>

#include "l4/drain.hpp"
#include "l4/error.hpp"
#include "l4/fault_library.hpp"
#include "support.hpp"

using namespace l4;
using l4::testing::TempDir;

namespace {

ParsedBundle parsed(const std::map<std::string, std::vector<std::string>>& messages) {
  JobBundle job;
  job.job_id = "job";
  for (const auto& [node, lines] : messages) {
    auto& recs = job.nodes[node];
    for (std::size_t i = 0; i < lines.size(); ++i) {
      recs.push_back({node, static_cast<TimestampMs>(1000 + i), Level::kError, lines[i], i + 1});
    }
  }
  return parse_bundle(job);
}

FaultPattern pattern(std::string id, std::vector<std::string> sigs, MatchMode mode = MatchMode::kAny) {
  FaultPattern p;
  p.pattern_id = std::move(id);
  p.name = "pattern " + p.pattern_id;
  p.category = FaultCategory::kNetwork;
  for (auto& s : sigs) p.signature_events.emplace_back(std::move(s));
  p.match_mode = mode;
  p.root_cause = "RoCE link flapping";
  p.remediation = "replace the optical module";
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an l4::Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("match: cqe signature with full confidence") {
  const auto b = parsed({{"rank_07", {"step 1 done", "ROCE(,hccp_service.bin):error cqe status."}},
                         {"rank_08", {"step 1 done"}}});
  FaultLibrary lib;
  lib.add(pattern("roce-cqe", {"error cqe status"}));
  const auto m = match(b, lib);
  REQUIRE(m.size() == 1);
  CHECK(m[0].pattern_id == "roce-cqe");
  CHECK(m[0].confidence == 1.0);
  REQUIRE(m[0].matched_events.size() == 1);
  CHECK(m[0].matched_events[0].node_id == "rank_07");
  CHECK(m[0].matched_events[0].source_line == 2);
  CHECK(m[0].matched_signatures.size() == 1);
}

TEST_CASE("match: ALL needs every signature, ANY reports a fraction") {
  const auto b = parsed({{"n0", {"link down on port 3", "heartbeat ok"}}});
  FaultLibrary lib;
  lib.add(pattern("all", {"link down", "error cqe status"}, MatchMode::kAll));
  lib.add(pattern("any", {"link down", "error cqe status"}, MatchMode::kAny));
  lib.add(pattern("regex", {"re:^link down on port <\\*>$"}, MatchMode::kAll));
  const auto m = match(b, lib);
  REQUIRE(m.size() == 2);
  CHECK(m[0].pattern_id == "regex");
  CHECK(m[0].confidence == 1.0);
  CHECK(m[1].pattern_id == "any");
  CHECK(m[1].confidence == 0.5);
  CHECK(match(b, FaultLibrary{}).empty());
}

TEST_CASE("match: adding an unrelated pattern leaves existing matches alone") {
  const auto b = parsed({{"n0", {"error cqe status", "disk full"}}, {"n1", {"error cqe status"}}});
  FaultLibrary lib;
  lib.add(pattern("cqe", {"error cqe status"}));
  const auto before = match(b, lib);
  lib.add(pattern("ecc", {"ECC uncorrectable"}));
  const auto after = match(b, lib);
  REQUIRE(after.size() == before.size());
  CHECK(after[0].pattern_id == before[0].pattern_id);
  CHECK(after[0].matched_events == before[0].matched_events);
  CHECK(after[0].matched_events.size() == 2);  // one per node
}

TEST_CASE("library: add, duplicate id and validation") {
  FaultLibrary lib;
  lib.add(pattern("a", {"x"}));
  CHECK(lib.size() == 1);
  lib.add(pattern("b", {"y"}));
  CHECK(lib.size() == 2);
  CHECK(code_of([&] { lib.add(pattern("a", {"z"})); }) == ErrorCode::kDuplicateId);
  CHECK(code_of([&] { lib.add(pattern("c", {})); }) == ErrorCode::kValidationError);
  CHECK(code_of([&] { lib.add(pattern("", {"x"})); }) == ErrorCode::kValidationError);
  CHECK(lib.size() == 2);
}

TEST_CASE("library: persistence round-trips bit-exactly") {
  TempDir dir;
  const auto path = dir / "faults.yaml";
  auto p = pattern("roce-cqe", {"error cqe status", "re:link (down|flap) \\d+"}, MatchMode::kAll);
  p.root_cause = "multi-line\nroot cause: with \"quotes\" and # hash";
  p.category = FaultCategory::kIncompatibility;
  add_pattern(path, p);
  add_pattern(path, pattern("second", {"ECC"}));
  CHECK(code_of([&] { add_pattern(path, pattern("second", {"ECC"})); }) == ErrorCode::kDuplicateId);

  const auto text = l4::testing::read_file(path);
  const auto loaded = FaultLibrary::load(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.patterns()[0] == p);
  CHECK(loaded.patterns()[0].signature_events[1].is_regex());
  loaded.save(dir / "copy.yaml");
  CHECK(l4::testing::read_file(dir / "copy.yaml") == text);
  CHECK(FaultLibrary::from_yaml(text) == loaded);
  CHECK(FaultLibrary::load(dir / "missing.yaml").empty());
}

TEST_CASE("library: enum names") {
  CHECK(to_string(FaultCategory::kProgramBug) == "PROGRAM_BUG");
  CHECK(parse_fault_category("NODE") == FaultCategory::kNode);
  CHECK(parse_match_mode("ALL") == MatchMode::kAll);
  CHECK_THROWS_AS(parse_fault_category("DISK"), Error);
}
