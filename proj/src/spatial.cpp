#include "l4/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "l4/error.hpp"

namespace l4 {

EventCountMatrix vectorize(const ParsedBundle& bundle) {
  EventCountMatrix m;
  std::set<std::string> present;
  for (const auto& [_, records] : bundle.nodes) {
    for (const auto& rec : records) present.insert(bundle.signature(rec.event_id));
  }
  m.signatures.assign(present.begin(), present.end());

  // Event ids map onto the shared index through their signature.
  std::vector<std::ptrdiff_t> column(bundle.signatures.size(), -1);
  for (std::size_t id = 0; id < bundle.signatures.size(); ++id) {
    const auto it = std::lower_bound(m.signatures.begin(), m.signatures.end(),
                                     bundle.signatures[id]);
    if (it != m.signatures.end() && *it == bundle.signatures[id]) {
      column[id] = it - m.signatures.begin();
    }
  }
  for (const auto& [node_id, records] : bundle.nodes) {
    EventCountVector v{node_id, std::vector<std::int64_t>(m.signatures.size(), 0)};
    for (const auto& rec : records) ++v.counts[static_cast<std::size_t>(column[rec.event_id])];
    m.vectors.push_back(std::move(v));
  }
  return m;
}

std::vector<NodeAnomalyScore> score_nodes(const std::vector<EventCountVector>& input,
                                          const IsolationForestParams& params) {
  if (input.size() < kMinNodesForScoring) {
    throw Error(ErrorCode::kTooFewNodes,
                fmt::format("{} nodes; isolation scoring needs at least {}", input.size(),
                            kMinNodesForScoring));
  }
  std::vector<const EventCountVector*> nodes;
  for (const auto& v : input) nodes.push_back(&v);
  std::sort(nodes.begin(), nodes.end(),
            [](const auto* a, const auto* b) { return a->node_id < b->node_id; });
  const std::size_t cols = nodes.front()->counts.size();
  FeatureMatrix data(nodes.size(), cols);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    if (nodes[r]->counts.size() != cols) {
      throw Error(ErrorCode::kLengthMismatch, "event count vectors differ in length");
    }
    for (std::size_t c = 0; c < cols; ++c) data.at(r, c) = static_cast<double>(nodes[r]->counts[c]);
  }
  const auto forest = IsolationForest::fit(data, params);
  std::vector<NodeAnomalyScore> scores;
  scores.reserve(nodes.size());
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    scores.push_back({nodes[r]->node_id, forest.score(data.row(r)), 0});
  }
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    return a.score > b.score;
  });
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].rank = i + 1;
  return scores;
}

std::vector<NodeAnomalyScore> recommend_nodes(const std::vector<NodeAnomalyScore>& ranked,
                                              std::size_t k, double threshold) {
  std::vector<NodeAnomalyScore> out;
  for (const auto& s : ranked) {
    if (out.size() >= k) break;
    if (s.score >= threshold) out.push_back(s);
  }
  return out;
}

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct RobustStats {
  double median = 0.0;
  double mad = 0.0;
};

RobustStats robust_stats(const EventCountMatrix& matrix, std::size_t event_index) {
  std::vector<double> column;
  column.reserve(matrix.vectors.size());
  for (const auto& v : matrix.vectors) column.push_back(static_cast<double>(v.counts[event_index]));
  RobustStats s;
  s.median = median_of(column);
  for (double& x : column) x = std::abs(x - s.median);
  s.mad = median_of(std::move(column));
  return s;
}

}  // namespace

double event_deviation(const EventCountMatrix& matrix, std::size_t node_index,
                       std::size_t event_index) {
  const auto s = robust_stats(matrix, event_index);
  const double c = static_cast<double>(matrix.vectors.at(node_index).counts.at(event_index));
  return std::abs(c - s.median) / (s.mad + 1.0);
}

std::map<std::string, std::vector<EventDeviation>> attribute_events(
    const EventCountMatrix& matrix, const std::vector<NodeAnomalyScore>& recommended,
    std::size_t top) {
  std::vector<RobustStats> stats;
  stats.reserve(matrix.signatures.size());
  for (std::size_t e = 0; e < matrix.signatures.size(); ++e) stats.push_back(robust_stats(matrix, e));

  std::map<std::string, std::vector<EventDeviation>> out;
  for (const auto& node : recommended) {
    const auto it = std::find_if(matrix.vectors.begin(), matrix.vectors.end(),
                                 [&](const auto& v) { return v.node_id == node.node_id; });
    if (it == matrix.vectors.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("recommended node '{}' has no vector", node.node_id));
    }
    std::vector<EventDeviation> events;
    for (std::size_t e = 0; e < matrix.signatures.size(); ++e) {
      const double c = static_cast<double>(it->counts[e]);
      const double dev = std::abs(c - stats[e].median) / (stats[e].mad + 1.0);
      if (dev > 0.0) events.push_back({matrix.signatures[e], dev, it->counts[e], stats[e].median});
    }
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
      if (a.deviation != b.deviation) return a.deviation > b.deviation;
      return a.signature < b.signature;
    });
    if (events.size() > top) events.resize(top);
    out[node.node_id] = std::move(events);
  }
  return out;
}

}  // namespace l4
