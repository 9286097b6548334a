#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "l4/error.hpp"
#include "l4/isolation_forest.hpp"
#include "l4/spatial.hpp"

using namespace l4;

namespace {

ParsedBundle bundle_from(const std::map<std::string, std::vector<std::string>>& streams) {
  ParsedBundle b;
  std::map<std::string, EventId> ids;
  for (const auto& [node, sigs] : streams) {
    auto& recs = b.nodes[node];
    for (const auto& s : sigs) {
      auto [it, added] = ids.emplace(s, static_cast<EventId>(b.signatures.size()));
      if (added) {
        b.signatures.push_back(s);
        b.templates.push_back({it->second, {s}, 0});
      }
      ParsedRecord r;
      r.node_id = node;
      r.event_id = it->second;
      recs.push_back(r);
    }
  }
  return b;
}

std::string node_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%02d", i);
  return buf;
}

std::vector<EventCountVector> planted(std::uint64_t noise_seed, std::size_t outlier) {
  std::mt19937_64 rng(noise_seed);
  std::uniform_int_distribution<int> noise(0, 2);
  std::vector<EventCountVector> v;
  for (int i = 0; i < 32; ++i) {
    std::vector<std::int64_t> counts = {100, 40, 12, 7, 3};
    for (auto& c : counts) c += noise(rng);
    v.push_back({node_name(i), counts});
  }
  v[outlier].counts[1] *= 1000;
  return v;
}

}  // namespace

TEST_CASE("vectorize: counts over the sorted signature union") {
  const auto m = vectorize(bundle_from({{"node0", {"A", "A", "B"}}, {"node1", {"B"}}, {"node2", {}}}));
  CHECK(m.signatures == std::vector<std::string>{"A", "B"});
  REQUIRE(m.vectors.size() == 3);
  CHECK(m.vectors[0].node_id == "node0");
  CHECK(m.vectors[0].counts == std::vector<std::int64_t>{2, 1});
  CHECK(m.vectors[1].counts == std::vector<std::int64_t>{0, 1});
  CHECK(m.vectors[2].counts == std::vector<std::int64_t>{0, 0});
  const auto single = vectorize(bundle_from({{"only", {"A"}}}));
  CHECK(single.vectors.size() == 1);
  CHECK_THROWS_AS(score_nodes(single.vectors, {}), Error);
}

TEST_CASE("average_path_length") {
  CHECK(average_path_length(1) == 0.0);
  // Independently evaluated: 2 * (ln 1 + 0.5772156649) - 1.
  CHECK(average_path_length(2) == doctest::Approx(0.15443132980306573).epsilon(1e-12));
  // 2 * (ln 255 + gamma) - 2 * 255 / 256, evaluated outside this code base.
  CHECK(average_path_length(256) == doctest::Approx(10.244770920119917).epsilon(1e-12));
  try {
    average_path_length(0);
    FAIL("expected DomainError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomainError);
  }
}

TEST_CASE("isolation forest: score formula, depth limit, reproducibility") {
  FeatureMatrix data(40, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t c = 0; c < 3; ++c) data.at(r, c) = g(rng);
  }
  IsolationForestParams p;
  p.seed = 77;
  const auto f = IsolationForest::fit(data, p);
  CHECK(f.tree_count() == 100);
  CHECK(f.subsample_size() == 40);
  CHECK(f.depth_limit() == 6);  // ceil(log2 40)
  CHECK(f.max_depth() <= f.depth_limit());
  const double c = average_path_length(40);
  for (std::size_t r = 0; r < 40; ++r) {
    const double e = f.mean_path_length(data.row(r));
    CHECK(f.score(data.row(r)) == doctest::Approx(std::pow(2.0, -e / c)));
    CHECK(f.score(data.row(r)) > 0.0);
    CHECK(f.score(data.row(r)) < 1.0);
  }
  // A path length equal to the normalizer is the 0.5 fixed point.
  CHECK(std::pow(2.0, -c / c) == 0.5);

  p.jobs = 4;
  const auto g2 = IsolationForest::fit(data, p);
  for (std::size_t r = 0; r < 40; ++r) CHECK(g2.score(data.row(r)) == f.score(data.row(r)));
  p.subsample_size = 16;
  const auto small = IsolationForest::fit(data, p);
  CHECK(small.depth_limit() == 4);
  CHECK(small.max_depth() <= 4);
}

TEST_CASE("score_nodes: too few nodes") {
  std::vector<EventCountVector> v = {{"a", {1}}, {"b", {1}}, {"c", {2}}};
  try {
    score_nodes(v, {});
    FAIL("expected TooFewNodes");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooFewNodes);
  }
}

TEST_CASE("score_nodes: identical vectors tie and fall back to node order") {
  std::vector<EventCountVector> v;
  for (int i = 7; i >= 0; --i) v.push_back({node_name(i), {5, 5, 1}});
  const auto s = score_nodes(v, {});
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].node_id == node_name(static_cast<int>(i)));
    CHECK(s[i].score == s[0].score);
    CHECK(s[i].rank == i + 1);
  }
}

TEST_CASE("score_nodes: 31 identical vectors and one scaled coordinate") {
  int first = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<EventCountVector> v;
    for (int i = 0; i < 32; ++i) v.push_back({node_name(i), {100, 40, 12, 7, 3}});
    const std::size_t outlier = seed % 32;
    v[outlier].counts[2] *= 1000;
    IsolationForestParams p;
    p.seed = seed;
    const auto s = score_nodes(v, p);
    if (s[0].node_id == node_name(static_cast<int>(outlier)) && s[0].score > s[1].score) ++first;
  }
  CHECK(first >= 99);
}

TEST_CASE("score_nodes: outlier against an i.i.d. noise cluster") {
  int first = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t outlier = (seed * 7) % 32;
    IsolationForestParams p;
    p.seed = seed;
    const auto s = score_nodes(planted(seed + 1000, outlier), p);
    if (s[0].node_id == node_name(static_cast<int>(outlier))) ++first;
  }
  CHECK(first >= 99);
}

TEST_CASE("score_nodes: reproducible and permutation invariant") {
  const auto v = planted(5, 3);
  IsolationForestParams p;
  p.seed = 12;
  const auto a = score_nodes(v, p);
  CHECK(score_nodes(v, p) == a);
  auto shuffled = v;
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(score_nodes(shuffled, p) == a);
  }
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].score >= a[i].score);
}

TEST_CASE("recommend_nodes") {
  std::vector<NodeAnomalyScore> ranked;
  for (int i = 0; i < 10; ++i) {
    ranked.push_back({node_name(i), i < 3 ? 0.8 - 0.05 * i : 0.4, static_cast<std::size_t>(i + 1)});
  }
  const auto r = recommend_nodes(ranked);
  REQUIRE(r.size() == 3);
  CHECK(r[0].node_id == "n00");
  CHECK(r[2].node_id == "n02");

  std::vector<NodeAnomalyScore> high;
  for (int i = 0; i < 12; ++i) high.push_back({node_name(i), 0.9, static_cast<std::size_t>(i + 1)});
  const auto top = recommend_nodes(high, 8);
  REQUIRE(top.size() == 8);
  CHECK(top.back().node_id == "n07");

  for (auto& s : ranked) s.score = 0.1;
  CHECK(recommend_nodes(ranked).empty());
}

TEST_CASE("attribute_events: robust deviation") {
  EventCountMatrix m;
  m.signatures = {"E_3", "E_50", "flat"};
  for (int i = 0; i < 6; ++i) m.vectors.push_back({node_name(i), {0, 0, 4}});
  m.vectors[0].counts = {3, 50, 4};
  CHECK(event_deviation(m, 0, 1) == 50.0);
  CHECK(event_deviation(m, 0, 2) == 0.0);
  const auto attr = attribute_events(m, {{"n00", 0.9, 1}});
  const auto& list = attr.at("n00");
  REQUIRE(list.size() == 2);  // the flat event has no deviation
  CHECK(list[0].signature == "E_50");
  CHECK(list[0].deviation == 50.0);
  CHECK(list[1].signature == "E_3");
  CHECK(list[1].deviation == 3.0);

  // Adding a constant to every node's count leaves deviations unchanged.
  auto shifted = m;
  for (auto& v : shifted.vectors) {
    for (auto& c : v.counts) c += 17;
  }
  for (std::size_t n = 0; n < m.vectors.size(); ++n) {
    for (std::size_t e = 0; e < m.signatures.size(); ++e) {
      CHECK(event_deviation(shifted, n, e) == event_deviation(m, n, e));
    }
  }
}

TEST_CASE("attribute_events: truncation to the top events") {
  EventCountMatrix m;
  for (int e = 0; e < 15; ++e) m.signatures.push_back("E" + std::to_string(100 + e));
  for (int i = 0; i < 5; ++i) m.vectors.push_back({node_name(i), std::vector<std::int64_t>(15, 0)});
  for (int e = 0; e < 15; ++e) m.vectors[0].counts[static_cast<std::size_t>(e)] = e + 1;
  const auto attr = attribute_events(m, {{"n00", 0.9, 1}});
  REQUIRE(attr.at("n00").size() == 10);
  CHECK(attr.at("n00")[0].signature == "E114");
}
