#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace l4 {

// Dense row-major matrix of feature values.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline constexpr double kEulerGamma = 0.5772156649015329;

// Average path length of an unsuccessful BST search over m points, used to
// normalize isolation depths: 0 for m == 1, otherwise
// 2 * (ln(m - 1) + gamma) - 2 * (m - 1) / m. Throws Error(kDomainError) for
// m < 1.
double average_path_length(std::int64_t m);

struct IsolationForestParams {
  std::size_t tree_count = 100;
  std::size_t subsample_size = 0;  // 0: min(256, rows)
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

class IsolationForest {
 public:
  static IsolationForest fit(const FeatureMatrix& data, const IsolationForestParams& params);

  // Mean isolation depth E(h(x)) across trees, including the c(size)
  // adjustment at unsplit leaves.
  double mean_path_length(std::span<const double> x) const;
  // 2^(-E(h(x)) / c(subsample_size)).
  double score(std::span<const double> x) const;

  std::size_t tree_count() const noexcept { return trees_.size(); }
  std::size_t subsample_size() const noexcept { return subsample_size_; }
  std::size_t depth_limit() const noexcept { return depth_limit_; }
  // Deepest leaf over all trees.
  std::size_t max_depth() const;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t size = 0;
    std::uint32_t depth = 0;
  };
  using Tree = std::vector<Node>;

  double path_length(const Tree& tree, std::span<const double> x) const;

  std::vector<Tree> trees_;
  std::size_t subsample_size_ = 0;
  std::size_t depth_limit_ = 0;
};

}  // namespace l4
