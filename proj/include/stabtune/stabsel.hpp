#ifndef STABTUNE_STABSEL_HPP
#define STABTUNE_STABSEL_HPP

// Stability selection with complementary-pair subsampling and the L0 solver
// as base selector; cutoff and PFER are tuned by random search.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stabtune/core.hpp"
#include "stabtune/logreg.hpp"
#include "stabtune/parallel.hpp"
#include "stabtune/tuning.hpp"

namespace stabtune {

struct StabSelParams {
  double cutoff = 0.75;
  double pfer = 1.0;
  std::size_t n_subsamples = 50;
  Seed seed = 0;

  void validate() const {
    if (!(cutoff > 0.5 && cutoff <= 1.0)) throw InvalidArgument("StabSelParams: cutoff must lie in (0.5, 1]");
    if (!(pfer > 0.0)) throw InvalidArgument("StabSelParams: pfer must be > 0");
    if (n_subsamples < 2 || n_subsamples % 2 != 0)
      throw InvalidArgument("StabSelParams: n_subsamples must be a positive even number");
  }
};

struct SelectionFrequencies {
  std::vector<double> freq;
  std::size_t q_used = 0;
  std::size_t n_subsamples = 0;
  std::size_t failed_subsamples = 0;  // counted as selecting nothing
};

/// n_subsamples / 2 random halvings of [0, n); entries 2i and 2i + 1 are
/// complementary, of sizes floor(n/2) and ceil(n/2).
[[nodiscard]] inline std::vector<std::vector<Index>> complementary_subsamples(
    std::size_t n, std::size_t n_subsamples, Seed seed) {
  if (n_subsamples % 2 != 0) throw InvalidArgument("complementary_subsamples: n_subsamples must be even");
  if (n < 4) throw InvalidArgument("complementary_subsamples: need n >= 4");
  std::mt19937_64 rng(seed);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<std::vector<Index>> out;
  out.reserve(n_subsamples);
  for (std::size_t pair = 0; pair < n_subsamples / 2; ++pair) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2));
    std::vector<Index> second(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    out.push_back(std::move(first));
    out.push_back(std::move(second));
  }
  return out;
}

/// Per-subsample selection size from the error bound
/// PFER <= q^2 / ((2 cutoff - 1) p).
[[nodiscard]] inline std::size_t derive_q(const StabSelParams& params, std::size_t p) {
  params.validate();
  const double raw = std::floor(std::sqrt(params.pfer * (2.0 * params.cutoff - 1.0) * static_cast<double>(p)));
  const auto q = static_cast<std::size_t>(std::max(1.0, raw));
  return std::min(q, p);
}

/// Largest q the subsample solver accepts for n rows.
[[nodiscard]] inline std::size_t max_valid_q(std::size_t n) {
  return n / 2 >= 2 ? n / 2 - 2 : 0;
}

namespace detail {

/// L0 search paths on every subsample, so frequencies for any q up to q_max
/// come from one computation.
class SubsamplePaths {
public:
  SubsamplePaths(const Dataset& data, std::size_t n_subsamples, Seed seed, std::size_t q_max,
                 const SolverOptions& opts, unsigned threads)
      : p_(data.p()), q_max_(q_max) {
    const auto subsamples = complementary_subsamples(data.n(), n_subsamples, seed);
    supports_.resize(subsamples.size());
    failed_.assign(subsamples.size(), false);
    parallel_for(subsamples.size(), threads, [&](std::size_t s) {
      try {
        const auto path = fit_l0_path(data.rows(subsamples[s]), q_max, opts);
        for (const auto& m : path) supports_[s].push_back(m.support);
      } catch (const std::exception&) {
        failed_[s] = true;
      }
    });
  }

  [[nodiscard]] SelectionFrequencies frequencies(std::size_t q) const {
    if (q > q_max_) throw InvalidArgument("SubsamplePaths: q beyond the computed path");
    SelectionFrequencies out;
    out.q_used = q;
    out.n_subsamples = supports_.size();
    std::vector<std::size_t> counts(p_, 0);
    for (std::size_t s = 0; s < supports_.size(); ++s) {
      if (failed_[s]) {
        ++out.failed_subsamples;
        continue;
      }
      for (Index j : supports_[s][q]) ++counts[j];
    }
    out.freq.resize(p_);
    for (std::size_t j = 0; j < p_; ++j)
      out.freq[j] = static_cast<double>(counts[j]) / static_cast<double>(supports_.size());
    return out;
  }

private:
  std::size_t p_;
  std::size_t q_max_;
  std::vector<std::vector<FeatureSet>> supports_;
  std::vector<bool> failed_;
};

}  // namespace detail

/// Fraction of complementary subsamples whose L0 fit with k = q selects each feature.
[[nodiscard]] inline SelectionFrequencies selection_frequencies(const Dataset& data,
                                                                const StabSelParams& params,
                                                                const SolverOptions& opts = {},
                                                                unsigned threads = 1) {
  params.validate();
  const std::size_t q = derive_q(params, data.p());
  if (!(q + 1 < data.n() / 2))
    throw InvalidArgument("selection_frequencies: q = " + std::to_string(q) +
                          " must be < floor(n/2) - 1");
  return detail::SubsamplePaths(data, params.n_subsamples, params.seed, q, opts, threads).frequencies(q);
}

/// Features selected in at least a `cutoff` fraction of subsamples.
[[nodiscard]] inline FeatureSet stable_set(const SelectionFrequencies& freqs, double cutoff) {
  if (!(cutoff > 0.5 && cutoff <= 1.0)) throw InvalidArgument("stable_set: cutoff must lie in (0.5, 1]");
  std::vector<Index> selected;
  for (std::size_t j = 0; j < freqs.freq.size(); ++j)
    if (freqs.freq[j] >= cutoff) selected.push_back(j);
  return FeatureSet(std::move(selected));
}

struct StabSelSearch {
  double cutoff_min = 0.55;
  double cutoff_max = 0.99;
  double pfer_min = 0.1;  // sampled log-uniformly
  double pfer_max = 10.0;
  std::size_t n_subsamples = 50;

  void validate() const {
    if (!(cutoff_min > 0.5 && cutoff_min <= cutoff_max && cutoff_max <= 1.0))
      throw InvalidArgument("StabSelSearch: need 0.5 < cutoff_min <= cutoff_max <= 1");
    if (!(pfer_min > 0.0 && pfer_min <= pfer_max))
      throw InvalidArgument("StabSelSearch: need 0 < pfer_min <= pfer_max");
  }
};

struct StabSelCandidate {
  StabSelParams params;
  ConfigPerformance performance;  // k holds q; fold_feature_sets hold the stable sets
};

struct StabSelTuning {
  StabSelParams params;  // winner, with the seed to use on the full data
  ConfigPerformance performance;
  std::vector<StabSelCandidate> candidates;
};

/// Random search over (cutoff, pfer). Each candidate is scored by the
/// cross-validated accuracy of an unregularized logistic model on the stable
/// set found from the fold's training rows; the best mean accuracy wins, ties
/// broken at random.
[[nodiscard]] inline StabSelTuning tune_stabsel(const Dataset& data, const CVSplits& splits,
                                                std::size_t n_points, Seed seed,
                                                const StabSelSearch& search = {},
                                                const SolverOptions& opts = {},
                                                unsigned threads = 1) {
  if (n_points < 1) throw InvalidArgument("tune_stabsel: n_points must be >= 1");
  if (splits.n() != data.n()) throw InvalidArgument("tune_stabsel: splits do not match the data");
  search.validate();

  StabSelTuning result;
  std::mt19937_64 rng(derive_seed(seed, {stream::kStabSel, 0}));
  std::uniform_real_distribution<double> cutoff_dist(search.cutoff_min, search.cutoff_max);
  std::uniform_real_distribution<double> log_pfer_dist(std::log(search.pfer_min), std::log(search.pfer_max));
  for (std::size_t i = 0; i < n_points; ++i) {
    StabSelCandidate c;
    c.params.cutoff = search.cutoff_min == search.cutoff_max ? search.cutoff_min : cutoff_dist(rng);
    c.params.pfer = search.pfer_min == search.pfer_max ? search.pfer_min : std::exp(log_pfer_dist(rng));
    c.params.n_subsamples = search.n_subsamples;
    c.params.seed = derive_seed(seed, {stream::kStabSel, 1});
    c.params.validate();
    c.performance.k = derive_q(c.params, data.p());
    result.candidates.push_back(std::move(c));
  }

  const std::size_t folds = splits.size();
  for (std::size_t f = 0; f < folds; ++f) {
    const Dataset train = data.rows(splits.train_indices(f));
    const Dataset test = data.rows(splits.test_indices(f));
    const std::size_t q_limit = max_valid_q(train.n());
    std::size_t q_max = 0;
    for (const auto& c : result.candidates)
      if (c.performance.k <= q_limit) q_max = std::max(q_max, c.performance.k);
    const detail::SubsamplePaths paths(train, search.n_subsamples,
                                       derive_seed(seed, {stream::kStabSel, 2, f}), q_max, opts,
                                       threads);
    for (auto& c : result.candidates) {
      auto& perf = c.performance;
      if (!perf.valid()) continue;
      if (perf.k > q_limit) {
        perf.error = "fold " + std::to_string(f) + ": q too large for the training size";
        continue;
      }
      const FeatureSet stable = stable_set(paths.frequencies(perf.k), c.params.cutoff);
      if (stable.size() + 2 > train.n()) {
        perf.error = "fold " + std::to_string(f) + ": stable set too large";
        continue;
      }
      try {
        const SparseModel model = fit_logistic(train, stable, opts);
        perf.fold_feature_sets.push_back(stable);
        perf.fold_accuracies.push_back(accuracy(model, test));
      } catch (const std::exception& e) {
        perf.error = "fold " + std::to_string(f) + ": " + e.what();
      }
    }
  }
  std::vector<ConfigPerformance> scored;
  for (auto& c : result.candidates) {
    c.performance.mean_accuracy = mean(c.performance.fold_accuracies);
    scored.push_back(c.performance);
  }
  const std::size_t winner = single_criteria_select_index(scored, derive_seed(seed, {stream::kSelection}));
  result.params = result.candidates[winner].params;
  result.params.seed = derive_seed(seed, {stream::kStabSel, 3});
  result.performance = result.candidates[winner].performance;
  return result;
}

/// Stable set on the full data for chosen parameters. Returns the
/// frequencies as well.
[[nodiscard]] inline std::pair<FeatureSet, SelectionFrequencies> run_stability_selection(
    const Dataset& data, const StabSelParams& params, const SolverOptions& opts = {},
    unsigned threads = 1) {
  auto freqs = selection_frequencies(data, params, opts, threads);
  auto stable = stable_set(freqs, params.cutoff);
  return {std::move(stable), std::move(freqs)};
}

}  // namespace stabtune

#endif  // STABTUNE_STABSEL_HPP
