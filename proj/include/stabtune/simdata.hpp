#ifndef STABTUNE_SIMDATA_HPP
#define STABTUNE_SIMDATA_HPP

// Block-correlated Gaussian features with a logistic target driven by one
// feature from each of the first few blocks.

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stabtune/core.hpp"

namespace stabtune {

struct ScenarioSpec {
  std::size_t n = 100;
  std::size_t p = 200;
  std::size_t block_size = 1;
  double within_corr = 0.95;
  double between_corr = 0.1;
  std::size_t n_generating = 5;
  Seed seed = 1;
  // When set, p need not be a multiple of block_size and the trailing
  // p mod block_size features form a smaller last block.
  bool partial_last_block = false;

  [[nodiscard]] std::size_t n_blocks() const noexcept {
    return block_size == 0 ? 0 : (p + block_size - 1) / block_size;
  }

  void validate() const {
    if (n < 1) throw InvalidArgument("ScenarioSpec: n must be >= 1");
    if (p < 1) throw InvalidArgument("ScenarioSpec: p must be >= 1");
    if (block_size < 1) throw InvalidArgument("ScenarioSpec: block_size must be >= 1");
    if (!partial_last_block && p % block_size != 0)
      throw InvalidArgument("ScenarioSpec: p (" + std::to_string(p) +
                            ") must be divisible by block_size (" + std::to_string(block_size) + ")");
    if (n_blocks() < n_generating)
      throw InvalidArgument("ScenarioSpec: number of blocks must be >= n_generating");
    if (!(0.0 <= between_corr && between_corr < within_corr && within_corr <= 1.0))
      throw InvalidArgument("ScenarioSpec: need 0 <= between_corr < within_corr <= 1");
  }

  /// Short identifier such as "n100_p200_b5".
  [[nodiscard]] std::string id() const {
    return "n" + std::to_string(n) + "_p" + std::to_string(p) + "_b" + std::to_string(block_size);
  }
};

struct GroundTruth {
  FeatureSet generating_features;
  std::size_t block_size = 1;
};

[[nodiscard]] constexpr std::size_t block_of(Index feature, std::size_t block_size) noexcept {
  return feature / block_size;
}

/// Smallest eigenvalue of the block correlation matrix in closed form.
/// Within-block contrasts give 1 - w. On block indicators the matrix acts as
/// diag(1 - w + (w - b) B_k) plus b s s^T with s_k = sqrt(B_k); contrasts
/// among the K full blocks keep the diagonal value and the remaining two
/// directions (all full blocks, the partial block) form a 2x2 problem.
[[nodiscard]] inline double block_covariance_min_eigenvalue(const ScenarioSpec& spec) {
  const double b = spec.between_corr;
  const std::size_t bs = spec.block_size;
  const std::size_t full = spec.p / bs;
  const std::size_t rest = spec.p % bs;
  auto diag = [&](std::size_t size) {
    const double w = size > 1 ? spec.within_corr : 1.0;
    return 1.0 - w + (w - b) * static_cast<double>(size);
  };
  double lowest = std::numeric_limits<double>::infinity();
  if (bs > 1 || rest > 1) lowest = 1.0 - spec.within_corr;
  if (full > 1) lowest = std::min(lowest, diag(bs));
  const double a = diag(bs) + b * static_cast<double>(bs * full);
  if (rest == 0) return std::min(lowest, a);
  const double d = diag(rest) + b * static_cast<double>(rest);
  const double c = b * std::sqrt(static_cast<double>(bs * full * rest));
  const double pair_low = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + c * c);
  return std::min(lowest, pair_low);
}

namespace detail {

inline void check_positive_definite(const ScenarioSpec& spec) {
  if (!(block_covariance_min_eigenvalue(spec) > 1e-12))
    throw InvalidArgument("block covariance is not positive definite for within_corr=" +
                          std::to_string(spec.within_corr) +
                          ", between_corr=" + std::to_string(spec.between_corr));
}

}  // namespace detail

[[nodiscard]] inline Eigen::MatrixXd make_block_covariance(const ScenarioSpec& spec) {
  spec.validate();
  detail::check_positive_definite(spec);
  const auto p = static_cast<Eigen::Index>(spec.p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(p, p, spec.between_corr);
  const auto bs = static_cast<Eigen::Index>(spec.block_size);
  for (Eigen::Index start = 0; start < p; start += bs) {
    const Eigen::Index size = std::min(bs, p - start);
    sigma.block(start, start, size, size).setConstant(spec.within_corr);
  }
  sigma.diagonal().setOnes();
  return sigma;
}

[[nodiscard]] inline GroundTruth ground_truth(const ScenarioSpec& spec) {
  std::vector<Index> features;
  for (std::size_t b = 0; b < spec.n_generating; ++b) features.push_back(b * spec.block_size);
  return {FeatureSet(std::move(features)), spec.block_size};
}

/// Dense Cholesky sampling is used up to this dimension; above it the exact
/// factor model x = sqrt(b) z0 + sqrt(w - b) z_block + sqrt(1 - w) e is used.
inline constexpr std::size_t kDenseFactorMaxP = 4000;

/// Draws n rows from N(0, Sigma) and labels y ~ Bernoulli(logistic(sum of the
/// generating features)).
[[nodiscard]] inline std::pair<Dataset, GroundTruth> sample_dataset(const ScenarioSpec& spec) {
  spec.validate();
  detail::check_positive_definite(spec);
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto p = static_cast<Eigen::Index>(spec.p);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd x(n, p);
  if (spec.p <= kDenseFactorMaxP) {
    Eigen::LLT<Eigen::MatrixXd> llt(make_block_covariance(spec));
    if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
    Eigen::MatrixXd z(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) z(i, j) = normal(rng);
    x.noalias() = z * llt.matrixL().transpose();
  } else {
    const double b = spec.between_corr;
    const double w = spec.block_size > 1 ? spec.within_corr : 1.0;
    const double shared = std::sqrt(b), within = std::sqrt(w - b), own = std::sqrt(1.0 - w);
    const auto bs = static_cast<Eigen::Index>(spec.block_size);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z0 = normal(rng);
      double zb = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (j % bs == 0) zb = normal(rng);
        x(i, j) = shared * z0 + within * zb + own * normal(rng);
      }
    }
  }

  GroundTruth truth = ground_truth(spec);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<int> y(spec.n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0.0;
    for (Index j : truth.generating_features) eta += x(i, static_cast<Eigen::Index>(j));
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    y[static_cast<std::size_t>(i)] = uniform(rng) < prob ? 1 : 0;
  }
  return {Dataset(std::move(x), std::move(y)), std::move(truth)};
}

/// Test data share the layout and generating features of the training
/// scenario; only the seed is shifted by this offset.
inline constexpr Seed kTestSeedOffset = 1000003;

[[nodiscard]] inline ScenarioSpec test_spec(ScenarioSpec spec) {
  spec.seed += kTestSeedOffset;
  return spec;
}

/// The twelve n = 100 scenarios (p in {200, 2000, 10000} x block size in
/// {1, 5, 15, 25}); desk scale keeps p = 200 only. Block size 15 does not
/// divide any of these p, so those scenarios end with a partial block.
[[nodiscard]] inline std::vector<ScenarioSpec> scenario_grid(bool desk_scale = false) {
  std::vector<ScenarioSpec> grid;
  const std::vector<std::size_t> ps = desk_scale ? std::vector<std::size_t>{200}
                                                 : std::vector<std::size_t>{200, 2000, 10000};
  for (std::size_t p : ps)
    for (std::size_t block : {1, 5, 15, 25}) {
      ScenarioSpec spec;
      spec.n = 100;
      spec.p = p;
      spec.block_size = block;
      spec.partial_last_block = p % block != 0;
      grid.push_back(spec);
    }
  return grid;
}

}  // namespace stabtune

#endif  // STABTUNE_SIMDATA_HPP
