#ifndef STABTUNE_CORE_HPP
#define STABTUNE_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stabtune {

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a result.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Index = std::size_t;
using Seed = std::uint64_t;

/// Sorted set of distinct feature indices.
class FeatureSet {
public:
  FeatureSet() = default;

  FeatureSet(std::initializer_list<Index> indices)
      : FeatureSet(std::vector<Index>(indices)) {}

  explicit FeatureSet(std::vector<Index> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
      throw InvalidArgument("FeatureSet: duplicate feature index");
  }

  [[nodiscard]] std::size_t size() const noexcept { return indices_.size(); }
  [[nodiscard]] bool empty() const noexcept { return indices_.empty(); }
  [[nodiscard]] auto begin() const noexcept { return indices_.begin(); }
  [[nodiscard]] auto end() const noexcept { return indices_.end(); }
  [[nodiscard]] Index operator[](std::size_t i) const { return indices_[i]; }
  [[nodiscard]] const std::vector<Index>& indices() const noexcept { return indices_; }

  [[nodiscard]] bool contains(Index feature) const {
    return std::binary_search(indices_.begin(), indices_.end(), feature);
  }

  /// Throws unless every index lies in [0, p).
  void validate(std::size_t p) const {
    if (!indices_.empty() && indices_.back() >= p)
      throw InvalidArgument("FeatureSet: index " + std::to_string(indices_.back()) +
                            " outside [0, " + std::to_string(p) + ")");
  }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
  friend auto operator<=>(const FeatureSet&, const FeatureSet&) = default;

private:
  std::vector<Index> indices_;
};

[[nodiscard]] inline std::size_t intersection_size(const FeatureSet& a, const FeatureSet& b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

[[nodiscard]] inline std::vector<Index> set_difference(const FeatureSet& a, const FeatureSet& b) {
  std::vector<Index> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// Numeric feature matrix (rows are observations) with binary labels.
struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<std::string> feature_names;

  Dataset() = default;

  Dataset(Eigen::MatrixXd features, std::vector<int> labels,
          std::vector<std::string> names = {})
      : x(std::move(features)), y(std::move(labels)), feature_names(std::move(names)) {
    validate();
  }

  [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(x.rows()); }
  [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(x.cols()); }

  void validate() const {
    if (x.rows() < 1 || x.cols() < 1) throw InvalidArgument("Dataset: need n >= 1 and p >= 1");
    if (y.size() != n()) throw InvalidArgument("Dataset: label count does not match rows");
    if (!x.allFinite()) throw InvalidArgument("Dataset: non-finite feature value");
    for (int label : y)
      if (label != 0 && label != 1) throw InvalidArgument("Dataset: labels must be 0 or 1");
    if (!feature_names.empty() && feature_names.size() != p())
      throw InvalidArgument("Dataset: feature name count does not match columns");
  }

  /// Rows in the given order.
  [[nodiscard]] Dataset rows(const std::vector<Index>& row_indices) const {
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(row_indices.size()), x.cols());
    out.y.resize(row_indices.size());
    for (std::size_t r = 0; r < row_indices.size(); ++r) {
      out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(row_indices[r]));
      out.y[r] = y[row_indices[r]];
    }
    out.feature_names = feature_names;
    return out;
  }

  [[nodiscard]] std::string feature_name(Index j) const {
    return feature_names.empty() ? "x" + std::to_string(j) : feature_names[j];
  }
};

/// splitmix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent substream seed for a (seed, tag...) path. Order of tags matters.
[[nodiscard]] constexpr Seed derive_seed(Seed seed, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t state = mix64(seed);
  for (auto tag : tags) state = mix64(state ^ mix64(tag + 0x632be59bd9b4e019ULL));
  return state;
}

// Stream tags used across modules.
namespace stream {
inline constexpr std::uint64_t kTrainData = 1;
inline constexpr std::uint64_t kTestData = 2;
inline constexpr std::uint64_t kCvSplits = 3;
inline constexpr std::uint64_t kSelection = 4;
inline constexpr std::uint64_t kStabSel = 5;
inline constexpr std::uint64_t kMonteCarlo = 6;
inline constexpr std::uint64_t kOuterSplits = 7;
}  // namespace stream

}  // namespace stabtune

#endif  // STABTUNE_CORE_HPP
