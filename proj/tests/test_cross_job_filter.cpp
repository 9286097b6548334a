#include <doctest.h>

#include <random>

#include "l4/cross_job_filter.hpp"
#include "l4/error.hpp"
#include "support.hpp"

using namespace l4;

namespace {

// A parsed bundle whose single node logs the given signatures in order.
ParsedBundle bundle_of(const std::vector<std::string>& sigs, const std::string& node = "n0") {
  ParsedBundle b;
  b.job_id = "job";
  std::map<std::string, EventId> ids;
  for (const auto& s : sigs) {
    if (ids.emplace(s, static_cast<EventId>(b.signatures.size())).second) {
      b.signatures.push_back(s);
      b.templates.push_back({ids[s], {s}, 0});
    }
  }
  auto& recs = b.nodes[node];
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    ParsedRecord r;
    r.node_id = node;
    r.timestamp = static_cast<TimestampMs>(i);
    r.source_line = i + 1;
    r.message = sigs[i];
    r.event_id = ids[sigs[i]];
    ++b.templates[r.event_id].occurrence_count;
    recs.push_back(r);
  }
  return b;
}

std::vector<std::string> sigs_of(const ParsedBundle& b) {
  std::vector<std::string> out;
  for (const auto& [_, recs] : b.nodes) {
    for (const auto& r : recs) out.push_back(b.signature(r.event_id));
  }
  return out;
}

}  // namespace

TEST_CASE("build_pool: presence counts per job") {
  const auto pool = build_pool({bundle_of({"A", "B", "A"}), bundle_of({"B", "C"})});
  CHECK(pool.total_jobs == 2);
  CHECK(pool.signatures == std::map<std::string, std::size_t>{{"A", 1}, {"B", 2}, {"C", 1}});
  const auto single = build_pool({bundle_of({"A"})});
  CHECK(single.total_jobs == 1);
  CHECK(single.signatures.at("A") == 1);
  try {
    build_pool({});
    FAIL("expected EmptyHistory");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyHistory);
  }
}

TEST_CASE("filter: frequent events removed, order kept") {
  NormalEventPool pool;
  pool.total_jobs = 2;
  pool.signatures = {{"A", 2}, {"B", 2}};
  const auto failed = bundle_of({"A", "C", "B", "D"});
  FilterStats stats;
  const auto out = filter(failed, pool, 0.5, &stats);
  CHECK(sigs_of(out) == std::vector<std::string>{"C", "D"});
  CHECK(stats.records_in == 4);
  CHECK(stats.records_out == 2);
  CHECK(stats.applied);
  CHECK(sigs_of(failed).size() == 4);  // input untouched
}

TEST_CASE("filter: presence exactly at the fraction is removed") {
  NormalEventPool pool;
  pool.total_jobs = 2;
  pool.signatures = {{"A", 1}};
  CHECK(sigs_of(filter(bundle_of({"A", "B"}), pool, 0.5)) == std::vector<std::string>{"B"});
  CHECK(sigs_of(filter(bundle_of({"A", "B"}), pool, 0.51)) == std::vector<std::string>{"A", "B"});
  CHECK_THROWS_AS(filter(bundle_of({"A"}), pool, 0.0), Error);
}

TEST_CASE("pool: JSON round trip") {
  l4::testing::TempDir dir;
  const auto pool = build_pool({bundle_of({"A", "B"}), bundle_of({"B", "x \"quoted\""})});
  pool.save(dir / "pool.json");
  CHECK(NormalEventPool::load(dir / "pool.json") == pool);
  CHECK_THROWS_AS(NormalEventPool::load(dir / "none.json"), Error);
}

TEST_CASE("filter properties: subsequence and threshold monotonicity") {
  std::mt19937_64 rng(9);
  const std::vector<std::string> alphabet = {"A", "B", "C", "D", "E", "F", "G", "H"};
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<int> jobs(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto random_stream = [&] {
      std::vector<std::string> s;
      for (int i = len(rng); i > 0; --i) s.push_back(alphabet[pick(rng)]);
      return s;
    };
    std::vector<ParsedBundle> history;
    for (int j = jobs(rng); j > 0; --j) history.push_back(bundle_of(random_stream()));
    const auto pool = build_pool(history);
    const auto failed_sigs = random_stream();
    const auto failed = bundle_of(failed_sigs);

    std::size_t previous = 0;
    for (double f : {0.1, 0.2, 0.25, 0.34, 0.5, 0.6, 0.75, 0.8, 1.0}) {
      const auto out = sigs_of(filter(failed, pool, f));
      // Subsequence of the input.
      std::size_t k = 0;
      for (const auto& s : failed_sigs) {
        if (k < out.size() && out[k] == s) ++k;
      }
      CHECK(k == out.size());
      // A higher fraction never removes more.
      CHECK(out.size() >= previous);
      previous = out.size();
      // Deterministic.
      CHECK(sigs_of(filter(failed, pool, f)) == out);
    }
  }
}
