#include "l4/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "l4/error.hpp"
#include "l4/parallel.hpp"

namespace l4 {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& data, std::size_t depth_limit, std::mt19937_64& rng)
      : data_(data), depth_limit_(depth_limit), rng_(rng) {}

  template <typename Tree>
  std::uint32_t build(Tree& tree, std::vector<std::size_t>& idx, std::size_t begin,
                      std::size_t end, std::size_t depth) {
    const auto node_index = static_cast<std::uint32_t>(tree.size());
    tree.emplace_back();
    tree[node_index].size = static_cast<std::uint32_t>(end - begin);
    tree[node_index].depth = static_cast<std::uint32_t>(depth);
    if (end - begin <= 1 || depth >= depth_limit_) return node_index;

    // Only features that still vary inside this node can split it.
    candidates_.clear();
    lows_.assign(data_.cols(), 0.0);
    highs_.assign(data_.cols(), 0.0);
    for (std::size_t f = 0; f < data_.cols(); ++f) {
      double lo = data_.at(idx[begin], f);
      double hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = data_.at(idx[i], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi > lo) {
        candidates_.push_back(f);
        lows_[f] = lo;
        highs_[f] = hi;
      }
    }
    if (candidates_.empty()) return node_index;

    std::uniform_int_distribution<std::size_t> pick(0, candidates_.size() - 1);
    const std::size_t feature = candidates_[pick(rng_)];
    const double lo = lows_[feature];
    const double hi = highs_[feature];
    std::uniform_real_distribution<double> uniform(lo, hi);
    double split = uniform(rng_);
    while (split <= lo) split = uniform(rng_);

    const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                    idx.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t r) { return data_.at(r, feature) < split; });
    const auto middle = static_cast<std::size_t>(mid - idx.begin());
    const std::uint32_t left = build(tree, idx, begin, middle, depth + 1);
    const std::uint32_t right = build(tree, idx, middle, end, depth + 1);
    tree[node_index].feature = static_cast<int>(feature);
    tree[node_index].split = split;
    tree[node_index].left = left;
    tree[node_index].right = right;
    return node_index;
  }

 private:
  const FeatureMatrix& data_;
  std::size_t depth_limit_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> candidates_;
  std::vector<double> lows_;
  std::vector<double> highs_;
};

}  // namespace

double average_path_length(std::int64_t m) {
  if (m < 1) throw Error(ErrorCode::kDomainError, fmt::format("c({}) is undefined", m));
  if (m == 1) return 0.0;
  const double n = static_cast<double>(m);
  const double harmonic = std::log(n - 1.0) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

IsolationForest IsolationForest::fit(const FeatureMatrix& data,
                                     const IsolationForestParams& params) {
  if (data.rows() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "isolation forest needs at least two rows");
  }
  if (params.tree_count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "tree_count must be positive");
  }
  IsolationForest forest;
  forest.subsample_size_ = params.subsample_size == 0
                               ? std::min<std::size_t>(256, data.rows())
                               : std::min(params.subsample_size, data.rows());
  if (forest.subsample_size_ < 2) {
    throw Error(ErrorCode::kInvalidArgument, "subsample size must be at least 2");
  }
  forest.depth_limit_ = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(forest.subsample_size_))));
  forest.trees_.resize(params.tree_count);

  parallel_for(params.tree_count, params.jobs, [&](std::size_t t) {
    std::mt19937_64 rng(splitmix64(params.seed ^ splitmix64(t + 1)));
    std::vector<std::size_t> idx(data.rows());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first subsample_size entries are the sample.
    for (std::size_t i = 0; i < forest.subsample_size_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(forest.subsample_size_);
    std::sort(idx.begin(), idx.end());
    TreeBuilder builder(data, forest.depth_limit_, rng);
    Tree tree;
    builder.build(tree, idx, 0, idx.size(), 0);
    forest.trees_[t] = std::move(tree);
  });
  return forest;
}

double IsolationForest::path_length(const Tree& tree, std::span<const double> x) const {
  std::uint32_t i = 0;
  while (tree[i].feature >= 0) {
    i = x[static_cast<std::size_t>(tree[i].feature)] < tree[i].split ? tree[i].left
                                                                      : tree[i].right;
  }
  return static_cast<double>(tree[i].depth) + average_path_length(tree[i].size);
}

double IsolationForest::mean_path_length(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& tree : trees_) total += path_length(tree, x);
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> x) const {
  const double norm = average_path_length(static_cast<std::int64_t>(subsample_size_));
  return std::pow(2.0, -mean_path_length(x) / norm);
}

std::size_t IsolationForest::max_depth() const {
  std::size_t deepest = 0;
  for (const auto& tree : trees_) {
    for (const auto& node : tree) deepest = std::max<std::size_t>(deepest, node.depth);
  }
  return deepest;
}

}  // namespace l4
