#include <catch_amalgamated.hpp>

#include <random>

#include "stabtune/eval.hpp"

using namespace stabtune;

namespace {

GroundTruth truth_b25() { return GroundTruth{FeatureSet({0, 25, 50, 75, 100}), 25}; }

ExperimentOptions quick_options() {
  ExperimentOptions opt;
  opt.k_max = 6;
  opt.folds = 4;
  opt.mc_samples = 200;
  opt.stabsel_points = 3;
  opt.stabsel.n_subsamples = 6;
  return opt;
}

}  // namespace

TEST_CASE("false_counts worked examples", "[eval][false_counts]") {
  const GroundTruth t = truth_b25();
  const auto one_per_block = false_counts(FeatureSet({1, 26, 51, 76, 101}), t);
  CHECK(one_per_block.false_positives == 0);
  CHECK(one_per_block.false_negatives == 0);

  const auto doubled = false_counts(FeatureSet({0, 1, 25, 50, 75, 100}), t);
  CHECK(doubled.false_positives == 1);
  CHECK(doubled.false_negatives == 0);

  const auto nothing = false_counts(FeatureSet(), t);
  CHECK(nothing.false_positives == 0);
  CHECK(nothing.false_negatives == 5);

  const auto outside = false_counts(FeatureSet({130, 199}), t);
  CHECK(outside.false_positives == 2);
  CHECK(outside.false_negatives == 5);
}

TEST_CASE("false_counts with singleton blocks is a set difference", "[eval][false_counts][property]") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Index> feature(0, 39);
  const GroundTruth t{FeatureSet({0, 1, 2, 3, 4}), 1};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Index> picks;
    const auto m = static_cast<int>(feature(rng) % 12);
    for (int i = 0; i < m; ++i) picks.push_back(feature(rng));
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    const FeatureSet selected(picks);
    std::size_t hits = 0;
    for (Index j : selected) hits += t.generating_features.contains(j) ? 1 : 0;
    const auto fc = false_counts(selected, t);
    CHECK(fc.false_positives == selected.size() - hits);
    CHECK(fc.false_negatives == 5 - hits);
  }
}

TEST_CASE("approach names", "[eval][approach]") {
  for (Approach a : kAllApproaches) CHECK(parse_approach(to_string(a)) == a);
  CHECK_THROWS_AS(parse_approach("lasso"), InvalidArgument);
  CHECK(uses_l0_grid(Approach::acc));
  CHECK_FALSE(uses_l0_grid(Approach::stabs));
}

TEST_CASE("run_scenario with the generating features", "[eval][scenario]") {
  ScenarioSpec spec;
  const auto rows = run_scenario(spec, 2, {Approach::truth}, 11, quick_options());
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.error.empty());
    CHECK(r.false_positives == 0);
    CHECK(r.false_negatives == 0);
    CHECK(r.n_selected == 5);
    CHECK(r.scenario_id == "n100_p200_b1");
    CHECK(r.wall_time_ms == 0.0);
  }
  CHECK(rows[0].replication == 0);
  CHECK(rows[1].replication == 1);
}

TEST_CASE("run_replication over every approach", "[eval][scenario]") {
  ScenarioSpec spec;
  spec.block_size = 5;
  const std::vector<Approach> all(std::begin(kAllApproaches), std::end(kAllApproaches));
  const auto opt = quick_options();
  const auto rows = run_replication(spec, 0, all, 3, opt);
  REQUIRE(rows.size() == all.size());
  for (const auto& r : rows) {
    INFO(to_string(r.approach) << ": " << r.error);
    CHECK(r.error.empty());
    CHECK(r.test_accuracy >= 0.0);
    CHECK(r.test_accuracy <= 1.0);
    CHECK(r.n_selected == r.final_support.size());
    if (uses_l0_grid(r.approach)) {
      REQUIRE(r.chosen_k.has_value());
      CHECK(*r.chosen_k <= opt.k_max);
      CHECK(r.n_selected <= *r.chosen_k);
    }
    const auto fc = false_counts(r.final_support, ground_truth(spec));
    CHECK(fc.false_positives == r.false_positives);
    CHECK(fc.false_negatives == r.false_negatives);
  }
  const auto again = run_replication(spec, 0, all, 3, opt);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].final_support == rows[i].final_support);
    CHECK(again[i].test_accuracy == rows[i].test_accuracy);
  }
}

TEST_CASE("run_nested_cv", "[eval][nested]") {
  ScenarioSpec spec;
  spec.n = 40;
  spec.p = 30;
  spec.block_size = 5;
  spec.seed = 2;
  const auto [data, truth] = sample_dataset(spec);
  auto opt = quick_options();
  opt.k_max = 4;

  const auto acc = run_nested_cv(data, Approach::acc, 2, 2, 6, opt);
  const auto adj = run_nested_cv(data, Approach::adj, 2, 2, 6, opt);
  REQUIRE(acc.size() == 2);
  REQUIRE(adj.size() == 2);
  for (const auto& rows : {acc, adj}) {
    for (const auto& r : rows) {
      INFO(r.error);
      CHECK(r.error.empty());
      CHECK(r.test_accuracy >= 0.0);
      CHECK(r.test_accuracy <= 1.0);
      REQUIRE(r.chosen_k.has_value());
      CHECK(r.n_selected <= *r.chosen_k);
    }
  }
  CHECK(acc[1].outer_fold == 1);
  CHECK_THROWS_AS(run_nested_cv(data, Approach::truth, 2, 2, 6, opt), InvalidArgument);
  CHECK_THROWS_AS(run_nested_cv(data, Approach::acc, 1, 2, 6, opt), InvalidArgument);

  opt.stabsel.pfer_max = 0.5;  // keeps q within reach of 10-row inner training parts
  const auto stabs = run_nested_cv(data, Approach::stabs, 2, 2, 6, opt);
  for (const auto& r : stabs) {
    INFO(r.error);
    CHECK(r.error.empty());
    CHECK(r.stabsel_params.has_value());
  }
}
