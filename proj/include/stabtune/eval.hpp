#ifndef STABTUNE_EVAL_HPP
#define STABTUNE_EVAL_HPP

// Final models per tuning approach, block-exchangeable false positive and
// negative counts, simulation replications and nested cross-validation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stabtune/core.hpp"
#include "stabtune/logreg.hpp"
#include "stabtune/parallel.hpp"
#include "stabtune/simdata.hpp"
#include "stabtune/stability.hpp"
#include "stabtune/stabsel.hpp"
#include "stabtune/tuning.hpp"

namespace stabtune {

enum class Approach { adj, unadj, acc, stabs, truth };

inline constexpr Approach kAllApproaches[] = {Approach::adj, Approach::unadj, Approach::acc,
                                              Approach::stabs, Approach::truth};

[[nodiscard]] inline std::string to_string(Approach a) {
  switch (a) {
    case Approach::adj: return "adj";
    case Approach::unadj: return "unadj";
    case Approach::acc: return "acc";
    case Approach::stabs: return "stabs";
    case Approach::truth: return "truth";
  }
  return "?";
}

[[nodiscard]] inline Approach parse_approach(const std::string& name) {
  for (Approach a : kAllApproaches)
    if (to_string(a) == name) return a;
  throw InvalidArgument("unknown approach '" + name + "' (expected adj, unadj, acc, stabs or truth)");
}

[[nodiscard]] inline bool uses_l0_grid(Approach a) noexcept {
  return a == Approach::adj || a == Approach::unadj || a == Approach::acc;
}

struct FalseCounts {
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// Block-level error counts: a generating block with no selected feature is
/// one false negative; selections outside generating blocks, and any second
/// or later selection inside a generating block, are false positives.
[[nodiscard]] inline FalseCounts false_counts(const FeatureSet& selected, const GroundTruth& truth) {
  if (truth.block_size < 1) throw InvalidArgument("false_counts: block_size must be >= 1");
  std::map<std::size_t, std::size_t> hits;  // relevant block -> selected count
  for (Index g : truth.generating_features) hits[block_of(g, truth.block_size)] = 0;
  FalseCounts out;
  for (Index j : selected) {
    auto it = hits.find(block_of(j, truth.block_size));
    if (it == hits.end()) {
      ++out.false_positives;
    } else if (it->second++ > 0) {
      ++out.false_positives;
    }
  }
  for (const auto& [block, count] : hits)
    if (count == 0) ++out.false_negatives;
  return out;
}

/// What an approach's tuner chose.
struct ChosenConfig {
  std::optional<std::size_t> k;                 // adj, unadj, acc
  std::optional<StabSelParams> stabsel;         // stabs
  std::optional<FeatureSet> fixed_support;      // truth
};

/// adj/unadj/acc: L0 fit with the chosen k; stabs: stability selection then an
/// unregularized fit on the stable set (intercept only when it is empty);
/// truth: unregularized fit on the generating features.
[[nodiscard]] inline SparseModel build_final_model(const Dataset& data, Approach approach,
                                                   const ChosenConfig& chosen,
                                                   const SolverOptions& opts = {},
                                                   unsigned threads = 1) {
  switch (approach) {
    case Approach::adj:
    case Approach::unadj:
    case Approach::acc:
      if (!chosen.k) throw InvalidArgument("build_final_model: missing k");
      return fit_l0(data, *chosen.k, opts);
    case Approach::stabs: {
      if (!chosen.stabsel) throw InvalidArgument("build_final_model: missing stability-selection parameters");
      const auto [stable, freqs] = run_stability_selection(data, *chosen.stabsel, opts, threads);
      return fit_logistic(data, stable, opts);
    }
    case Approach::truth:
      if (!chosen.fixed_support) throw InvalidArgument("build_final_model: missing generating features");
      return fit_logistic(data, *chosen.fixed_support, opts);
  }
  throw InvalidArgument("build_final_model: unknown approach");
}

/// Settings shared by the simulation and nested-CV harnesses.
struct ExperimentOptions {
  std::size_t k_max = 20;
  std::size_t folds = 10;
  SelectionParams selection;  // seed is derived per replication
  double theta = kDefaultTheta;
  std::size_t mc_samples = kDefaultMcSamples;
  // Simulations: exact block similarity from the ground truth when true,
  // otherwise absolute correlation on the training data.
  bool block_similarity = true;
  StabSelSearch stabsel;
  std::size_t stabsel_points = 50;
  SolverOptions solver;
  unsigned threads = 1;
  bool record_wall_time = false;
};

struct ResultRow {
  std::string scenario_id;
  std::size_t replication = 0;
  Approach approach = Approach::truth;
  double test_accuracy = 0.0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t n_selected = 0;
  std::optional<std::size_t> chosen_k;
  double wall_time_ms = 0.0;
  std::string error;
  FeatureSet final_support;
  std::optional<StabSelParams> stabsel_params;
};

namespace detail {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  [[nodiscard]] double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
};

struct TunedL0 {
  std::vector<ConfigPerformance> configs;
  std::map<Approach, std::size_t> chosen_k;
  std::map<Approach, double> time_ms;
};

// Tunes every requested L0 approach on one shared set of fold paths.
inline TunedL0 tune_l0_approaches(const Dataset& train, const CVSplits& splits,
                                  const std::vector<Approach>& approaches,
                                  const std::optional<SimilarityMatrix>& similarity,
                                  const ExperimentOptions& opt, Seed selection_seed, Seed mc_seed) {
  TunedL0 out;
  Stopwatch shared;
  out.configs = grid_tune(train, k_range(opt.k_max), splits, MeasureSpec::accuracy_only(), opt.solver);
  const double shared_ms = shared.ms();
  SelectionParams sel = opt.selection;
  sel.seed = selection_seed;
  for (Approach a : approaches) {
    Stopwatch own;
    auto configs = out.configs;
    std::size_t idx = 0;
    if (a == Approach::acc) {
      idx = single_criteria_select_index(configs, selection_seed);
    } else if (a == Approach::unadj) {
      attach_stability(configs, MeasureSpec::unadjusted(), train.p());
      idx = epsilon_constraint_select_index(configs, sel);
    } else if (a == Approach::adj) {
      if (!similarity) throw InvalidArgument("adj approach needs a similarity matrix");
      attach_stability(configs, MeasureSpec::adjusted(*similarity, opt.mc_samples, mc_seed), train.p());
      idx = epsilon_constraint_select_index(configs, sel);
    } else {
      continue;
    }
    out.chosen_k[a] = configs[idx].k;
    out.time_ms[a] = shared_ms + own.ms();
  }
  return out;
}

inline std::vector<Approach> sorted_unique(std::vector<Approach> approaches) {
  std::vector<Approach> out;
  for (Approach a : kAllApproaches)
    if (std::find(approaches.begin(), approaches.end(), a) != approaches.end()) out.push_back(a);
  return out;
}

}  // namespace detail

/// Seeds for one replication of a scenario; tags include the scenario shape
/// so rows do not depend on which scenarios run together.
struct ReplicationSeeds {
  Seed train, cv, selection, monte_carlo, stabsel;

  static ReplicationSeeds make(Seed seed, const ScenarioSpec& spec, std::size_t replication) {
    auto tag = [&](std::uint64_t stream_tag) {
      return derive_seed(seed, {stream_tag, spec.n, spec.p, spec.block_size, replication});
    };
    return {tag(stream::kTrainData), tag(stream::kCvSplits), tag(stream::kSelection),
            tag(stream::kMonteCarlo), tag(stream::kStabSel)};
  }
};

/// One replication: fresh training and test data, shared CV splits, then
/// every approach tuned, refit on the training data and scored on the test data.
[[nodiscard]] inline std::vector<ResultRow> run_replication(const ScenarioSpec& spec,
                                                            std::size_t replication,
                                                            const std::vector<Approach>& approaches,
                                                            Seed seed,
                                                            const ExperimentOptions& opt) {
  const auto order = detail::sorted_unique(approaches);
  std::vector<ResultRow> rows;
  auto base_row = [&](Approach a) {
    ResultRow r;
    r.scenario_id = spec.id();
    r.replication = replication;
    r.approach = a;
    return r;
  };
  try {
    const auto seeds = ReplicationSeeds::make(seed, spec, replication);
    ScenarioSpec train_spec = spec;
    train_spec.seed = seeds.train;
    const auto [train, truth] = sample_dataset(train_spec);
    const auto [test, test_truth] = sample_dataset(test_spec(train_spec));
    const CVSplits splits = make_cv_splits(train.n(), opt.folds, seeds.cv);

    std::optional<SimilarityMatrix> similarity;
    if (std::find(order.begin(), order.end(), Approach::adj) != order.end())
      similarity = opt.block_similarity ? SimilarityMatrix::block(train.p(), spec.block_size, opt.theta)
                                        : similarity_from_data(train, opt.theta);

    detail::TunedL0 tuned;
    std::vector<SparseModel> final_path;
    double final_path_ms = 0.0;
    if (std::any_of(order.begin(), order.end(), uses_l0_grid)) {
      tuned = detail::tune_l0_approaches(train, splits, order, similarity, opt, seeds.selection,
                                         seeds.monte_carlo);
      std::size_t k_final = 0;
      for (const auto& [a, k] : tuned.chosen_k) k_final = std::max(k_final, k);
      detail::Stopwatch sw;
      final_path = fit_l0_path(train, k_final, opt.solver);
      final_path_ms = sw.ms();
    }

    for (Approach a : order) {
      ResultRow row = base_row(a);
      detail::Stopwatch sw;
      try {
        SparseModel model;
        double tuning_ms = 0.0;
        if (uses_l0_grid(a)) {
          const std::size_t k = tuned.chosen_k.at(a);
          model = final_path[k];
          row.chosen_k = k;
          tuning_ms = tuned.time_ms.at(a) + final_path_ms;
        } else if (a == Approach::stabs) {
          const auto t = tune_stabsel(train, splits, opt.stabsel_points, seeds.stabsel, opt.stabsel,
                                      opt.solver);
          ChosenConfig chosen;
          chosen.stabsel = t.params;
          model = build_final_model(train, a, chosen, opt.solver);
          row.stabsel_params = t.params;
        } else {
          ChosenConfig chosen;
          chosen.fixed_support = truth.generating_features;
          model = build_final_model(train, a, chosen, opt.solver);
        }
        row.final_support = model.support;
        row.n_selected = model.support.size();
        row.test_accuracy = accuracy(model, test);
        const auto counts = false_counts(model.support, truth);
        row.false_positives = counts.false_positives;
        row.false_negatives = counts.false_negatives;
        if (opt.record_wall_time) row.wall_time_ms = tuning_ms + sw.ms();
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  } catch (const std::exception& e) {
    rows.clear();
    for (Approach a : order) {
      ResultRow row = base_row(a);
      row.error = e.what();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Long-format results, ordered by replication then approach. Replications
/// run in parallel; each row depends only on (seed, scenario, replication).
[[nodiscard]] inline std::vector<ResultRow> run_scenario(const ScenarioSpec& spec,
                                                         std::size_t replications,
                                                         const std::vector<Approach>& approaches,
                                                         Seed seed,
                                                         const ExperimentOptions& opt = {}) {
  if (replications < 1) throw InvalidArgument("run_scenario: replications must be >= 1");
  if (approaches.empty()) throw InvalidArgument("run_scenario: no approaches");
  spec.validate();
  std::vector<std::vector<ResultRow>> per_rep(replications);
  parallel_for(replications, opt.threads, [&](std::size_t r) {
    per_rep[r] = run_replication(spec, r, approaches, seed, opt);
  });
  std::vector<ResultRow> rows;
  for (auto& block : per_rep)
    for (auto& row : block) rows.push_back(std::move(row));
  return rows;
}

struct NestedCvRow {
  Approach approach = Approach::acc;
  std::size_t outer_fold = 0;
  double test_accuracy = 0.0;
  std::size_t n_selected = 0;
  std::optional<std::size_t> chosen_k;
  std::optional<StabSelParams> stabsel_params;
  std::string error;
};

/// Nested cross-validation for data without ground truth: tuning on the inner
/// folds of each outer training part, a final model on that part, accuracy on
/// the outer held-out rows. Outer splits depend only on `seed`, so every
/// approach sees the same ones.
[[nodiscard]] inline std::vector<NestedCvRow> run_nested_cv(const Dataset& data, Approach approach,
                                                            std::size_t outer_folds,
                                                            std::size_t inner_folds, Seed seed,
                                                            const ExperimentOptions& opt = {}) {
  if (outer_folds < 2 || inner_folds < 2) throw InvalidArgument("run_nested_cv: folds must be >= 2");
  if (approach == Approach::truth)
    throw InvalidArgument("run_nested_cv: the truth approach needs simulated data");
  const CVSplits outer = make_cv_splits(data.n(), outer_folds, derive_seed(seed, {stream::kOuterSplits}));
  std::vector<NestedCvRow> rows(outer_folds);
  parallel_for(outer_folds, opt.threads, [&](std::size_t f) {
    NestedCvRow& row = rows[f];
    row.approach = approach;
    row.outer_fold = f;
    try {
      const Dataset train = data.rows(outer.train_indices(f));
      const Dataset test = data.rows(outer.test_indices(f));
      const CVSplits inner = make_cv_splits(train.n(), inner_folds, derive_seed(seed, {stream::kCvSplits, f}));
      const Seed selection_seed = derive_seed(seed, {stream::kSelection, f});
      SparseModel model;
      if (uses_l0_grid(approach)) {
        std::optional<SimilarityMatrix> similarity;
        if (approach == Approach::adj) similarity = similarity_from_data(train, opt.theta);
        ExperimentOptions inner_opt = opt;
        const std::size_t bound = std::min(train.p(), train.n() - train.n() / inner_folds - 2);
        inner_opt.k_max = std::min(opt.k_max, bound);
        const auto tuned = detail::tune_l0_approaches(train, inner, {approach}, similarity, inner_opt,
                                                      selection_seed,
                                                      derive_seed(seed, {stream::kMonteCarlo, f}));
        row.chosen_k = tuned.chosen_k.at(approach);
        model = fit_l0(train, *row.chosen_k, opt.solver);
      } else {
        const auto t = tune_stabsel(train, inner, opt.stabsel_points,
                                    derive_seed(seed, {stream::kStabSel, f}), opt.stabsel, opt.solver);
        ChosenConfig chosen;
        chosen.stabsel = t.params;
        row.stabsel_params = t.params;
        model = build_final_model(train, approach, chosen, opt.solver);
      }
      row.n_selected = model.support.size();
      row.test_accuracy = accuracy(model, test);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

}  // namespace stabtune

#endif  // STABTUNE_EVAL_HPP
