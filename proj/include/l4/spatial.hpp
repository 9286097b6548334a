#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "l4/drain.hpp"
#include "l4/isolation_forest.hpp"

namespace l4 {

struct EventCountVector {
  std::string node_id;
  std::vector<std::int64_t> counts;
};

// Per-node event counts over one shared, signature-sorted index.
struct EventCountMatrix {
  std::vector<std::string> signatures;
  std::vector<EventCountVector> vectors;  // sorted by node_id
};

EventCountMatrix vectorize(const ParsedBundle& bundle);

struct NodeAnomalyScore {
  std::string node_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const NodeAnomalyScore&, const NodeAnomalyScore&) = default;
};

inline constexpr std::size_t kMinNodesForScoring = 4;

// Fits an isolation forest on the vectors and ranks every node by score,
// highest first, ties by node_id. Input order does not matter. Throws
// Error(kTooFewNodes) below four vectors.
std::vector<NodeAnomalyScore> score_nodes(const std::vector<EventCountVector>& vectors,
                                          const IsolationForestParams& params);

inline constexpr std::size_t kDefaultTopKNodes = 8;
inline constexpr double kDefaultAnomalyThreshold = 0.6;

// At most k nodes scoring >= threshold, in rank order.
std::vector<NodeAnomalyScore> recommend_nodes(const std::vector<NodeAnomalyScore>& ranked,
                                              std::size_t k = kDefaultTopKNodes,
                                              double threshold = kDefaultAnomalyThreshold);

struct EventDeviation {
  std::string signature;
  double deviation = 0.0;
  std::int64_t count = 0;
  double median = 0.0;
};

// |count - median| / (MAD + 1), with median and MAD taken across all nodes.
double event_deviation(const EventCountMatrix& matrix, std::size_t node_index,
                       std::size_t event_index);

inline constexpr std::size_t kDefaultTopEvents = 10;

// For each recommended node, events with non-zero deviation ranked by
// deviation (descending, ties by signature), truncated to `top`.
std::map<std::string, std::vector<EventDeviation>> attribute_events(
    const EventCountMatrix& matrix, const std::vector<NodeAnomalyScore>& recommended,
    std::size_t top = kDefaultTopEvents);

}  // namespace l4
