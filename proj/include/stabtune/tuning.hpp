#ifndef STABTUNE_TUNING_HPP
#define STABTUNE_TUNING_HPP

// Grid tuning of the support-size bound k under cross-validation, scored by
// mean held-out accuracy and the stability of the per-fold supports, plus
// Pareto-front and final-configuration selection rules.

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stabtune/core.hpp"
#include "stabtune/logreg.hpp"
#include "stabtune/parallel.hpp"
#include "stabtune/stability.hpp"

namespace stabtune {

struct CVSplits {
  std::vector<std::vector<Index>> folds;  // each sorted
  Seed seed = 0;

  [[nodiscard]] std::size_t size() const noexcept { return folds.size(); }

  [[nodiscard]] std::size_t n() const noexcept {
    std::size_t total = 0;
    for (const auto& f : folds) total += f.size();
    return total;
  }

  [[nodiscard]] const std::vector<Index>& test_indices(std::size_t fold) const { return folds.at(fold); }

  [[nodiscard]] std::vector<Index> train_indices(std::size_t fold) const {
    std::vector<Index> train;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != fold) train.insert(train.end(), folds[f].begin(), folds[f].end());
    std::sort(train.begin(), train.end());
    return train;
  }
};

/// Random partition of [0, n) into `folds` parts whose sizes differ by at most one.
[[nodiscard]] inline CVSplits make_cv_splits(std::size_t n, std::size_t folds, Seed seed) {
  if (folds < 2) throw InvalidArgument("make_cv_splits: need at least 2 folds");
  if (folds > n) throw InvalidArgument("make_cv_splits: more folds than observations");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  CVSplits splits;
  splits.seed = seed;
  splits.folds.resize(folds);
  for (std::size_t i = 0; i < n; ++i) splits.folds[i % folds].push_back(order[i]);
  for (auto& f : splits.folds) std::sort(f.begin(), f.end());
  return splits;
}

/// Which stability score, if any, accompanies held-out accuracy.
struct MeasureSpec {
  enum class Kind { none, unadjusted, adjusted };
  Kind kind = Kind::none;
  std::size_t mc_samples = kDefaultMcSamples;
  Seed seed = 0;
  std::optional<SimilarityMatrix> similarity;  // required for adjusted

  static MeasureSpec accuracy_only() { return {}; }
  static MeasureSpec unadjusted() { return {Kind::unadjusted, 0, 0, std::nullopt}; }
  static MeasureSpec adjusted(SimilarityMatrix sim, std::size_t mc_samples = kDefaultMcSamples,
                              Seed seed = 0) {
    return {Kind::adjusted, mc_samples, seed, std::move(sim)};
  }
};

struct ConfigPerformance {
  std::size_t k = 0;
  double mean_accuracy = 0.0;
  std::optional<double> stability;
  std::vector<FeatureSet> fold_feature_sets;
  std::vector<double> fold_accuracies;
  std::string error;  // nonempty when some fold failed; such configs are never selected

  [[nodiscard]] bool valid() const noexcept { return error.empty(); }
};

struct SelectionParams {
  double acc_const = 0.025;
  double stab_const = 0.1;
  Seed seed = 0;

  void validate() const {
    if (!(acc_const >= 0.0) || !(stab_const >= 0.0))
      throw InvalidArgument("SelectionParams: constants must be >= 0");
  }
};

[[nodiscard]] inline double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

/// Fills `stability` for every valid config from its fold supports.
inline void attach_stability(std::vector<ConfigPerformance>& configs, const MeasureSpec& measure,
                             std::size_t p) {
  for (auto& c : configs) {
    c.stability.reset();
    if (!c.valid() || measure.kind == MeasureSpec::Kind::none) continue;
    try {
      if (measure.kind == MeasureSpec::Kind::unadjusted) {
        c.stability = smu(c.fold_feature_sets, p).score;
      } else {
        if (!measure.similarity) throw InvalidArgument("adjusted measure needs a similarity matrix");
        c.stability = sma(c.fold_feature_sets, *measure.similarity, measure.mc_samples,
                          measure.seed).score;
      }
    } catch (const NumericalError& e) {
      c.error = e.what();
    }
  }
}

/// Cross-validated accuracy and fold supports for every k in the grid. One
/// L0 search path per fold serves the whole grid.
[[nodiscard]] inline std::vector<ConfigPerformance> grid_tune(
    const Dataset& data, const std::vector<std::size_t>& k_grid, const CVSplits& splits,
    const MeasureSpec& measure = {}, const SolverOptions& opts = {}, unsigned threads = 1) {
  if (k_grid.empty()) throw InvalidArgument("grid_tune: empty grid");
  if (splits.n() != data.n()) throw InvalidArgument("grid_tune: splits do not match the data");
  const std::size_t folds = splits.size();
  const std::size_t k_max = *std::max_element(k_grid.begin(), k_grid.end());

  struct FoldResult {
    std::vector<FeatureSet> supports;  // per grid entry
    std::vector<double> accuracies;
    std::vector<std::string> errors;
  };
  std::vector<FoldResult> per_fold(folds);
  parallel_for(folds, threads, [&](std::size_t f) {
    auto& out = per_fold[f];
    out.supports.resize(k_grid.size());
    out.accuracies.assign(k_grid.size(), 0.0);
    out.errors.assign(k_grid.size(), {});
    const Dataset train = data.rows(splits.train_indices(f));
    const Dataset test = data.rows(splits.test_indices(f));
    const std::size_t bound = std::min(train.p(), train.n() < 2 ? 0 : train.n() - 2);
    std::vector<SparseModel> path;
    std::string failure;
    try {
      path = fit_l0_path(train, std::min(k_max, bound), opts);
    } catch (const std::exception& e) {
      failure = "fold " + std::to_string(f) + ": " + e.what();
    }
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
      const std::size_t k = k_grid[g];
      if (!failure.empty()) {
        out.errors[g] = failure;
      } else if (k > bound) {
        out.errors[g] = "fold " + std::to_string(f) + ": support too large";
      } else {
        out.supports[g] = path[k].support;
        out.accuracies[g] = accuracy(path[k], test);
      }
    }
  });

  std::vector<ConfigPerformance> configs(k_grid.size());
  for (std::size_t g = 0; g < k_grid.size(); ++g) {
    auto& c = configs[g];
    c.k = k_grid[g];
    for (std::size_t f = 0; f < folds; ++f) {
      if (c.error.empty() && !per_fold[f].errors[g].empty()) c.error = per_fold[f].errors[g];
      c.fold_feature_sets.push_back(per_fold[f].supports[g]);
      c.fold_accuracies.push_back(per_fold[f].accuracies[g]);
    }
    c.mean_accuracy = mean(c.fold_accuracies);
  }
  attach_stability(configs, measure, data.p());
  return configs;
}

[[nodiscard]] inline ConfigPerformance evaluate_config(const Dataset& data, std::size_t k,
                                                       const CVSplits& splits,
                                                       const MeasureSpec& measure = {},
                                                       const SolverOptions& opts = {}) {
  return grid_tune(data, {k}, splits, measure, opts).front();
}

namespace detail {

inline void require_stability(const std::vector<ConfigPerformance>& configs, const char* who) {
  for (const auto& c : configs)
    if (c.valid() && !c.stability)
      throw InvalidArgument(std::string(who) + ": every configuration needs a stability value");
}

inline std::vector<std::size_t> valid_indices(const std::vector<ConfigPerformance>& configs,
                                              const char* who) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (configs[i].valid()) idx.push_back(i);
  if (idx.empty()) throw InvalidArgument(std::string(who) + ": no valid configuration");
  return idx;
}

// Slack for the two tolerance filters so that, e.g., 0.875 survives
// acc.max = 0.9 with acc.const = 0.025 despite binary rounding.
inline constexpr double kFilterSlack = 1e-12;

inline std::size_t random_pick(const std::vector<std::size_t>& remaining, Seed seed) {
  if (remaining.size() == 1) return remaining.front();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
  return remaining[pick(rng)];
}

}  // namespace detail

/// Configurations not strictly dominated in (mean_accuracy, stability).
[[nodiscard]] inline std::vector<ConfigPerformance> pareto_front(
    const std::vector<ConfigPerformance>& configs) {
  detail::require_stability(configs, "pareto_front");
  std::vector<ConfigPerformance> front;
  for (const auto& c : configs) {
    if (!c.valid()) continue;
    bool dominated = false;
    for (const auto& d : configs) {
      if (!d.valid()) continue;
      const bool geq = d.mean_accuracy >= c.mean_accuracy && *d.stability >= *c.stability;
      const bool gt = d.mean_accuracy > c.mean_accuracy || *d.stability > *c.stability;
      if (geq && gt) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(c);
  }
  return front;
}

/// Index of the configuration chosen by epsilon-constraint selection:
///  1. acc.max = highest accuracy;
///  2. drop accuracy < acc.max - acc_const;
///  3. stab.max = highest stability among the rest;
///  4. drop stability < stab.max - stab_const;
///  5-6. keep the highest accuracy;
///  7-8. then the highest stability;
///  9. pick uniformly at random among what is left.
/// Invalid configurations never take part.
[[nodiscard]] inline std::size_t epsilon_constraint_select_index(
    const std::vector<ConfigPerformance>& configs, const SelectionParams& params) {
  params.validate();
  detail::require_stability(configs, "epsilon_constraint_select");
  auto remaining = detail::valid_indices(configs, "epsilon_constraint_select");
  auto acc = [&](std::size_t i) { return configs[i].mean_accuracy; };
  auto stab = [&](std::size_t i) { return *configs[i].stability; };
  auto keep_if = [&](auto&& pred) {
    std::erase_if(remaining, [&](std::size_t i) { return !pred(i); });
  };
  auto max_of = [&](auto&& value) {
    double best = value(remaining.front());
    for (std::size_t i : remaining) best = std::max(best, value(i));
    return best;
  };

  const double acc_max = max_of(acc);
  keep_if([&](std::size_t i) { return acc(i) >= acc_max - params.acc_const - detail::kFilterSlack; });
  const double stab_max = max_of(stab);
  keep_if([&](std::size_t i) { return stab(i) >= stab_max - params.stab_const - detail::kFilterSlack; });
  const double acc_end = max_of(acc);
  keep_if([&](std::size_t i) { return acc(i) >= acc_end; });
  if (remaining.size() > 1) {
    const double s_end = max_of(stab);
    keep_if([&](std::size_t i) { return stab(i) >= s_end; });
  }
  return detail::random_pick(remaining, params.seed);
}

[[nodiscard]] inline ConfigPerformance epsilon_constraint_select(
    const std::vector<ConfigPerformance>& configs, const SelectionParams& params) {
  return configs[epsilon_constraint_select_index(configs, params)];
}

/// Highest mean accuracy; exact ties are broken uniformly at random.
[[nodiscard]] inline std::size_t single_criteria_select_index(
    const std::vector<ConfigPerformance>& configs, Seed seed) {
  auto remaining = detail::valid_indices(configs, "single_criteria_select");
  double best = configs[remaining.front()].mean_accuracy;
  for (std::size_t i : remaining) best = std::max(best, configs[i].mean_accuracy);
  std::erase_if(remaining, [&](std::size_t i) { return configs[i].mean_accuracy < best; });
  return detail::random_pick(remaining, seed);
}

[[nodiscard]] inline ConfigPerformance single_criteria_select(
    const std::vector<ConfigPerformance>& configs, Seed seed) {
  return configs[single_criteria_select_index(configs, seed)];
}

/// {0, 1, ..., k_max}.
[[nodiscard]] inline std::vector<std::size_t> k_range(std::size_t k_max) {
  std::vector<std::size_t> grid(k_max + 1);
  std::iota(grid.begin(), grid.end(), std::size_t{0});
  return grid;
}

}  // namespace stabtune

#endif  // STABTUNE_TUNING_HPP
