#ifndef STABTUNE_STABILITY_HPP
#define STABTUNE_STABILITY_HPP

// Feature-selection stability: the unadjusted measure (SMU) with hypergeometric
// chance correction, and the similarity-adjusted measure (SMA) that credits
// selecting a different but similar feature.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stabtune/core.hpp"

namespace stabtune {

inline constexpr double kDefaultTheta = 0.9;
inline constexpr std::size_t kDefaultMcSamples = 10000;

/// Symmetric feature similarity in [0,1] with a threshold theta. Stored either
/// densely or as an exact block structure (1 inside a block, 0 across blocks);
/// the block form keeps p = 10 000 scenarios cheap.
class SimilarityMatrix {
public:
  static SimilarityMatrix dense(Eigen::MatrixXd values, double theta = kDefaultTheta) {
    SimilarityMatrix s;
    s.p_ = static_cast<std::size_t>(values.rows());
    s.theta_ = theta;
    s.check_theta();
    if (values.rows() != values.cols() || values.rows() < 1)
      throw InvalidArgument("SimilarityMatrix: values must be a nonempty square matrix");
    constexpr double tol = 1e-12;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (std::abs(values(i, i) - 1.0) > tol)
        throw InvalidArgument("SimilarityMatrix: diagonal entries must equal 1");
      values(i, i) = 1.0;
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double v = values(i, j);
        if (!(v >= -tol && v <= 1.0 + tol))
          throw InvalidArgument("SimilarityMatrix: entries must lie in [0,1]");
        if (std::abs(v - values(j, i)) > tol)
          throw InvalidArgument("SimilarityMatrix: values must be symmetric");
      }
    }
    s.values_ = std::make_shared<const Eigen::MatrixXd>(std::move(values));
    s.has_similar_ = false;
    for (Eigen::Index i = 0; i < s.values_->rows() && !s.has_similar_; ++i)
      for (Eigen::Index j = i + 1; j < s.values_->cols(); ++j)
        if ((*s.values_)(i, j) >= theta) {
          s.has_similar_ = true;
          break;
        }
    return s;
  }

  /// Exact block similarity: features in the same block of `block_size`
  /// consecutive indices are fully similar, all others dissimilar.
  static SimilarityMatrix block(std::size_t p, std::size_t block_size,
                                double theta = kDefaultTheta) {
    if (p < 1) throw InvalidArgument("SimilarityMatrix: p must be >= 1");
    if (block_size < 1) throw InvalidArgument("SimilarityMatrix: block_size must be >= 1");
    SimilarityMatrix s;
    s.p_ = p;
    s.theta_ = theta;
    s.check_theta();
    s.block_size_ = block_size;
    s.has_similar_ = block_size > 1 && p > 1;
    return s;
  }

  static SimilarityMatrix identity(std::size_t p, double theta = kDefaultTheta) {
    return block(p, 1, theta);
  }

  [[nodiscard]] std::size_t p() const noexcept { return p_; }
  [[nodiscard]] double theta() const noexcept { return theta_; }
  [[nodiscard]] bool is_block() const noexcept { return values_ == nullptr; }
  [[nodiscard]] std::size_t block_size() const noexcept { return block_size_; }

  /// True when some pair i != j reaches the threshold.
  [[nodiscard]] bool has_similar_pairs() const noexcept { return has_similar_; }

  [[nodiscard]] double value(Index i, Index j) const {
    if (values_) return (*values_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return i / block_size_ == j / block_size_ ? 1.0 : 0.0;
  }

  [[nodiscard]] bool similar(Index i, Index j) const {
    if (values_)
      return (*values_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= theta_;
    return i / block_size_ == j / block_size_;
  }

  /// Same entries, different threshold.
  [[nodiscard]] SimilarityMatrix with_theta(double theta) const {
    if (values_) return dense(*values_, theta);
    return block(p_, block_size_, theta);
  }

private:
  SimilarityMatrix() = default;

  void check_theta() const {
    if (!(theta_ > 0.0 && theta_ <= 1.0))
      throw InvalidArgument("SimilarityMatrix: theta must lie in (0, 1]");
  }

  std::size_t p_ = 0;
  double theta_ = kDefaultTheta;
  std::size_t block_size_ = 1;
  bool has_similar_ = false;
  std::shared_ptr<const Eigen::MatrixXd> values_;
};

enum class MeasureKind { unadjusted, adjusted };

[[nodiscard]] inline std::string to_string(MeasureKind kind) {
  return kind == MeasureKind::adjusted ? "adjusted" : "unadjusted";
}

struct StabilityResult {
  double score = 0.0;
  MeasureKind measure_kind = MeasureKind::unadjusted;
  std::size_t mc_samples_used = 0;  // 0 when every expectation was exact
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;  // zero-denominator pairs
};

/// Mean of |V_i ∩ V_j| for uniformly random subsets of sizes c1 and c2.
[[nodiscard]] inline double expected_intersection(std::size_t c1, std::size_t c2, std::size_t p) {
  if (p < 1) throw InvalidArgument("expected_intersection: p must be >= 1");
  if (c1 > p || c2 > p) throw InvalidArgument("expected_intersection: cardinality exceeds p");
  return static_cast<double>(c1) * static_cast<double>(c2) / static_cast<double>(p);
}

namespace detail {

// Count x in `from` with some y in `to` similar to it.
inline std::size_t count_similar(std::span<const Index> from, std::span<const Index> to,
                                 const SimilarityMatrix& sim) {
  std::size_t count = 0;
  for (Index x : from)
    for (Index y : to)
      if (sim.similar(x, y)) {
        ++count;
        break;
      }
  return count;
}

inline std::size_t adjustment_of_differences(std::span<const Index> only_i,
                                             std::span<const Index> only_j,
                                             const SimilarityMatrix& sim) {
  if (only_i.empty() || only_j.empty()) return 0;
  return std::min(count_similar(only_i, only_j, sim), count_similar(only_j, only_i, sim));
}

}  // namespace detail

/// Adj(V_i, V_j) = min(A(V_i, V_j), A(V_j, V_i)), where A counts features of
/// V_i \ V_j having a similar partner in V_j \ V_i.
[[nodiscard]] inline std::size_t adjustment(const FeatureSet& vi, const FeatureSet& vj,
                                            const SimilarityMatrix& sim) {
  vi.validate(sim.p());
  vj.validate(sim.p());
  if (!sim.has_similar_pairs()) return 0;
  const auto only_i = set_difference(vi, vj);
  const auto only_j = set_difference(vj, vi);
  return detail::adjustment_of_differences(only_i, only_j, sim);
}

/// Monte-Carlo estimate of E[|U ∩ W| + Adj(U, W)] over uniformly random
/// subsets U, W of sizes c1, c2 drawn without replacement. When no pair of
/// distinct features is similar the hypergeometric mean is returned exactly.
[[nodiscard]] inline double expected_adjusted_intersection(std::size_t c1, std::size_t c2,
                                                           const SimilarityMatrix& sim,
                                                           std::size_t mc_samples, Seed seed) {
  const std::size_t p = sim.p();
  if (c1 > p || c2 > p)
    throw InvalidArgument("expected_adjusted_intersection: cardinality exceeds p");
  if (mc_samples < 1) throw InvalidArgument("expected_adjusted_intersection: mc_samples must be >= 1");
  if (c1 == 0 || c2 == 0) return 0.0;
  if (!sim.has_similar_pairs()) return expected_intersection(c1, c2, p);

  std::mt19937_64 rng(seed);
  std::vector<Index> pool(p);
  std::iota(pool.begin(), pool.end(), Index{0});
  std::vector<std::uint32_t> mark(p, 0);  // sample stamp of U membership
  std::vector<Index> u(c1), w(c2), only_u, only_w;
  only_u.reserve(c1);
  only_w.reserve(c2);

  auto draw = [&](std::vector<Index>& out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out[i] = pool[i];
    }
  };

  std::uint64_t total = 0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    const auto stamp = static_cast<std::uint32_t>(s + 1);
    draw(u);
    draw(w);
    for (Index x : u) mark[x] = stamp;
    std::size_t common = 0;
    only_w.clear();
    for (Index y : w) {
      if (mark[y] == stamp) {
        ++common;
        mark[y] = 0;  // consumed: left-over stamps mark U \ W
      } else {
        only_w.push_back(y);
      }
    }
    only_u.clear();
    for (Index x : u)
      if (mark[x] == stamp) only_u.push_back(x);
    total += common + detail::adjustment_of_differences(only_u, only_w, sim);
  }
  return static_cast<double>(total) / static_cast<double>(mc_samples);
}

namespace detail {

struct PairTerm {
  std::size_t overlap;  // |V_i ∩ V_j| (+ Adj for the adjusted measure)
  std::size_t ci, cj;
};

template <typename ExpectationFn>
StabilityResult average_pairs(std::span<const FeatureSet> sets, MeasureKind kind,
                              ExpectationFn&& expected,
                              const SimilarityMatrix* sim) {
  if (sets.size() < 2) throw InvalidArgument("stability: need at least two feature sets");
  StabilityResult result;
  result.measure_kind = kind;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const auto& a = sets[i];
      const auto& b = sets[j];
      if (a.empty() || b.empty()) {
        // chance level: an empty selection carries no stability evidence
        ++result.pairs_used;
        continue;
      }
      std::size_t overlap = intersection_size(a, b);
      if (sim != nullptr && sim->has_similar_pairs()) {
        const auto only_a = set_difference(a, b);
        const auto only_b = set_difference(b, a);
        overlap += adjustment_of_differences(only_a, only_b, *sim);
      }
      const double e = expected(a.size(), b.size());
      const double denominator =
          std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size())) - e;
      if (std::abs(denominator) <= 1e-12) {
        ++result.pairs_skipped;
        continue;
      }
      sum += (static_cast<double>(overlap) - e) / denominator;
      ++result.pairs_used;
    }
  }
  if (result.pairs_used == 0) throw NumericalError("undefined stability: every pair is degenerate");
  result.score = sum / static_cast<double>(result.pairs_used);
  return result;
}

}  // namespace detail

/// Unadjusted stability of m >= 2 feature sets over p features.
[[nodiscard]] inline StabilityResult smu(std::span<const FeatureSet> sets, std::size_t p) {
  for (const auto& s : sets) s.validate(p);
  return detail::average_pairs(
      sets, MeasureKind::unadjusted,
      [p](std::size_t ci, std::size_t cj) { return expected_intersection(ci, cj, p); }, nullptr);
}

/// Similarity-adjusted stability. Expectations are cached per unordered
/// cardinality pair, each with its own seed substream, so the score does not
/// depend on the order of `sets`.
[[nodiscard]] inline StabilityResult sma(std::span<const FeatureSet> sets,
                                         const SimilarityMatrix& sim,
                                         std::size_t mc_samples = kDefaultMcSamples,
                                         Seed seed = 0) {
  const std::size_t p = sim.p();
  for (const auto& s : sets) s.validate(p);
  if (mc_samples < 1) throw InvalidArgument("sma: mc_samples must be >= 1");
  std::map<std::pair<std::size_t, std::size_t>, double> cache;
  bool sampled = false;
  auto expected = [&](std::size_t ci, std::size_t cj) {
    if (!sim.has_similar_pairs()) return expected_intersection(ci, cj, p);
    const auto key = std::minmax(ci, cj);
    auto it = cache.find(key);
    if (it == cache.end()) {
      const Seed pair_seed = derive_seed(seed, {stream::kMonteCarlo, key.first, key.second});
      it = cache
               .emplace(key, expected_adjusted_intersection(key.first, key.second, sim,
                                                            mc_samples, pair_seed))
               .first;
    }
    sampled = true;
    return it->second;
  };
  auto result = detail::average_pairs(sets, MeasureKind::adjusted, expected, &sim);
  result.mc_samples_used = sampled ? mc_samples : 0;
  return result;
}

/// Absolute Pearson correlation between every pair of columns. A constant
/// column has similarity 0 to every other column and 1 to itself.
[[nodiscard]] inline SimilarityMatrix similarity_from_data(const Dataset& data,
                                                           double theta = kDefaultTheta) {
  if (data.n() < 2) throw InvalidArgument("similarity_from_data: need n >= 2");
  const Eigen::Index p = data.x.cols();
  Eigen::MatrixXd centered = data.x.rowwise() - data.x.colwise().mean();
  Eigen::VectorXd norms = centered.colwise().norm();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (norms(j) > 0.0 && norms(j) > 1e-12 * std::sqrt(static_cast<double>(data.n())) *
                                          (data.x.col(j).cwiseAbs().maxCoeff() + 1e-300))
      centered.col(j) /= norms(j);
    else
      centered.col(j).setZero();
  }
  Eigen::MatrixXd corr(p, p);
  corr.setZero();
  corr.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  Eigen::MatrixXd values(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    values(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      const double v = std::min(1.0, std::abs(corr(i, j)));
      values(i, j) = v;
      values(j, i) = v;
    }
  }
  return SimilarityMatrix::dense(std::move(values), theta);
}

}  // namespace stabtune

#endif  // STABTUNE_STABILITY_HPP
