#ifndef STABTUNE_COMMANDS_HPP
#define STABTUNE_COMMANDS_HPP

// Command implementations behind the stabtune executable. Each command reads
// a RunConfig, writes its files into config.out and throws on failure;
// run_command maps exceptions to exit codes.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabtune/core.hpp"
#include "stabtune/eval.hpp"
#include "stabtune/io.hpp"
#include "stabtune/logreg.hpp"
#include "stabtune/simdata.hpp"
#include "stabtune/stability.hpp"
#include "stabtune/stabsel.hpp"
#include "stabtune/tuning.hpp"

namespace stabtune {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Settings for every command; each command reads the fields it needs.
struct RunConfig {
  Seed seed = 1;
  unsigned threads = 0;  // 0: all available cores
  std::string out = ".";
  bool desk_scale = false;

  // simulate
  ScenarioSpec scenario;

  // tune, stabsel, nested-cv, measures
  std::string data;
  std::string label = "y";
  std::string truth;  // ground-truth JSON; routes adj to exact block similarity
  std::string approach = "adj";

  // tuning
  std::size_t k_max = 20;
  std::size_t folds = 10;
  double acc_const = 0.025;
  double stab_const = 0.1;
  double theta = kDefaultTheta;
  std::size_t mc_samples = kDefaultMcSamples;

  // stability selection
  std::size_t n_points = 50;
  std::size_t n_subsamples = 50;
  double cutoff_min = 0.55;
  double cutoff_max = 0.99;
  double pfer_min = 0.1;
  double pfer_max = 10.0;

  // experiment
  std::vector<std::size_t> p_values;     // empty: every p of the grid
  std::vector<std::size_t> block_sizes;  // empty: every block size of the grid
  std::optional<std::size_t> replications;  // default 10 at desk scale, else 50
  std::vector<std::string> approaches;   // empty: all five (nested-cv: all but truth)
  bool timing = false;                   // record wall_time_ms (breaks byte-identical reruns)

  // nested-cv
  std::size_t outer_folds = 10;
  std::size_t inner_folds = 10;

  // measures
  std::string sets;  // JSON {"p": ..., "sets": [[...], ...]}
  std::optional<std::size_t> block_size;

  [[nodiscard]] std::size_t replication_count() const {
    return replications.value_or(desk_scale ? 10 : 50);
  }

  [[nodiscard]] std::vector<Approach> approach_list(bool allow_truth = true) const {
    std::vector<Approach> out;
    if (approaches.empty()) {
      for (Approach a : kAllApproaches)
        if (allow_truth || a != Approach::truth) out.push_back(a);
    } else {
      for (const auto& name : approaches) out.push_back(parse_approach(name));
    }
    return out;
  }

  [[nodiscard]] SelectionParams selection() const {
    SelectionParams s;
    s.acc_const = acc_const;
    s.stab_const = stab_const;
    s.validate();
    return s;
  }

  [[nodiscard]] StabSelSearch stabsel_search() const {
    StabSelSearch s;
    s.cutoff_min = cutoff_min;
    s.cutoff_max = cutoff_max;
    s.pfer_min = pfer_min;
    s.pfer_max = pfer_max;
    s.n_subsamples = n_subsamples;
    s.validate();
    if (n_subsamples < 2 || n_subsamples % 2 != 0)
      throw InvalidArgument("n_subsamples must be a positive even number");
    return s;
  }

  [[nodiscard]] ExperimentOptions experiment_options() const {
    ExperimentOptions o;
    o.k_max = k_max;
    o.folds = folds;
    o.selection = selection();
    o.theta = theta;
    o.mc_samples = mc_samples;
    o.stabsel = stabsel_search();
    o.stabsel_points = n_points;
    o.threads = resolve_threads(threads);
    o.record_wall_time = timing;
    return o;
  }

  void validate() const {
    if (folds < 2) throw InvalidArgument("folds must be >= 2");
    if (outer_folds < 2 || inner_folds < 2) throw InvalidArgument("outer_folds and inner_folds must be >= 2");
    if (!(theta > 0.0 && theta <= 1.0)) throw InvalidArgument("theta must lie in (0, 1]");
    if (mc_samples < 1) throw InvalidArgument("mc_samples must be >= 1");
    if (n_points < 1) throw InvalidArgument("n_points must be >= 1");
    if (replications && *replications < 1) throw InvalidArgument("replications must be >= 1");
    (void)selection();
    (void)stabsel_search();
    (void)approach_list();
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"out", c.out},
      {"desk_scale", c.desk_scale},
      {"scenario",
       {{"n", c.scenario.n},
        {"p", c.scenario.p},
        {"block_size", c.scenario.block_size},
        {"within_corr", c.scenario.within_corr},
        {"between_corr", c.scenario.between_corr},
        {"n_generating", c.scenario.n_generating},
        {"partial_last_block", c.scenario.partial_last_block}}},
      {"data", c.data},
      {"label", c.label},
      {"truth", c.truth},
      {"approach", c.approach},
      {"k_max", c.k_max},
      {"folds", c.folds},
      {"acc_const", c.acc_const},
      {"stab_const", c.stab_const},
      {"theta", c.theta},
      {"mc_samples", c.mc_samples},
      {"n_points", c.n_points},
      {"n_subsamples", c.n_subsamples},
      {"cutoff_min", c.cutoff_min},
      {"cutoff_max", c.cutoff_max},
      {"pfer_min", c.pfer_min},
      {"pfer_max", c.pfer_max},
      {"p_values", c.p_values},
      {"block_sizes", c.block_sizes},
      {"approaches", c.approaches},
      {"timing", c.timing},
      {"outer_folds", c.outer_folds},
      {"inner_folds", c.inner_folds},
      {"sets", c.sets},
  };
  j["replications"] = c.replications ? nlohmann::json(*c.replications) : nlohmann::json(nullptr);
  j["block_size"] = c.block_size ? nlohmann::json(*c.block_size) : nlohmann::json(nullptr);
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config field '") + key + "' has the wrong type");
  }
}

template <class T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& target) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T value{};
  read_field(j, key, value);
  target = value;
}

inline void reject_unknown(const nlohmann::json& j, const nlohmann::json& known, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw InvalidArgument("unknown config field '" + where + key + "'");
}

}  // namespace detail

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  const nlohmann::json defaults = RunConfig{};
  detail::reject_unknown(j, defaults, "");
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "threads", c.threads);
  detail::read_field(j, "out", c.out);
  detail::read_field(j, "desk_scale", c.desk_scale);
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    if (!s.is_object()) throw InvalidArgument("config field 'scenario' must be an object");
    detail::reject_unknown(s, defaults.at("scenario"), "scenario.");
    detail::read_field(s, "n", c.scenario.n);
    detail::read_field(s, "p", c.scenario.p);
    detail::read_field(s, "block_size", c.scenario.block_size);
    detail::read_field(s, "within_corr", c.scenario.within_corr);
    detail::read_field(s, "between_corr", c.scenario.between_corr);
    detail::read_field(s, "n_generating", c.scenario.n_generating);
    detail::read_field(s, "partial_last_block", c.scenario.partial_last_block);
  }
  detail::read_field(j, "data", c.data);
  detail::read_field(j, "label", c.label);
  detail::read_field(j, "truth", c.truth);
  detail::read_field(j, "approach", c.approach);
  detail::read_field(j, "k_max", c.k_max);
  detail::read_field(j, "folds", c.folds);
  detail::read_field(j, "acc_const", c.acc_const);
  detail::read_field(j, "stab_const", c.stab_const);
  detail::read_field(j, "theta", c.theta);
  detail::read_field(j, "mc_samples", c.mc_samples);
  detail::read_field(j, "n_points", c.n_points);
  detail::read_field(j, "n_subsamples", c.n_subsamples);
  detail::read_field(j, "cutoff_min", c.cutoff_min);
  detail::read_field(j, "cutoff_max", c.cutoff_max);
  detail::read_field(j, "pfer_min", c.pfer_min);
  detail::read_field(j, "pfer_max", c.pfer_max);
  detail::read_field(j, "p_values", c.p_values);
  detail::read_field(j, "block_sizes", c.block_sizes);
  detail::read_optional(j, "replications", c.replications);
  detail::read_field(j, "approaches", c.approaches);
  detail::read_field(j, "timing", c.timing);
  detail::read_field(j, "outer_folds", c.outer_folds);
  detail::read_field(j, "inner_folds", c.inner_folds);
  detail::read_field(j, "sets", c.sets);
  detail::read_optional(j, "block_size", c.block_size);
}

[[nodiscard]] inline RunConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = read_json(path);
  } catch (const IoError& e) {
    throw InvalidArgument(e.what());
  }
  return j.get<RunConfig>();
}

namespace detail {

inline std::filesystem::path out_path(const RunConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out);
  return std::filesystem::path(c.out) / name;
}

inline nlohmann::json model_json(const SparseModel& m) {
  return {{"support", m.support.indices()},
          {"coefficients", m.coefficients},
          {"intercept", m.intercept},
          {"converged", m.converged}};
}

inline void require_data(const RunConfig& c) {
  if (c.data.empty()) throw InvalidArgument("no dataset given (set 'data')");
}

}  // namespace detail

/// Dataset CSV (features x0.., then y) and ground-truth JSON.
inline void cmd_simulate(const RunConfig& c) {
  ScenarioSpec spec = c.scenario;
  spec.seed = c.seed;
  spec.validate();
  const auto [data, truth] = sample_dataset(spec);
  const auto csv = detail::out_path(c, "dataset.csv");
  write_file(csv.string(), [&](std::ostream& o) { write_dataset_csv(o, data); });
  write_json(detail::out_path(c, "ground_truth.json").string(), ground_truth_json(truth, spec));
}

/// Grid tuning of k for adj, unadj or acc; writes tuning.csv and chosen.json.
inline void cmd_tune(const RunConfig& c) {
  detail::require_data(c);
  const Approach approach = parse_approach(c.approach);
  if (!uses_l0_grid(approach)) throw InvalidArgument("tune: approach must be adj, unadj or acc");
  const Dataset data = read_dataset_csv(c.data, c.label);
  const CVSplits splits = make_cv_splits(data.n(), c.folds, derive_seed(c.seed, {stream::kCvSplits}));
  const unsigned threads = resolve_threads(c.threads);

  MeasureSpec measure;
  std::string similarity_source;
  if (approach == Approach::unadj) {
    measure = MeasureSpec::unadjusted();
  } else if (approach == Approach::adj) {
    std::optional<SimilarityMatrix> sim;
    if (!c.truth.empty()) {
      const GroundTruth truth = read_ground_truth(c.truth);
      sim = SimilarityMatrix::block(data.p(), truth.block_size, c.theta);
      similarity_source = "block";
    } else {
      sim = similarity_from_data(data, c.theta);
      similarity_source = "correlation";
    }
    measure = MeasureSpec::adjusted(*sim, c.mc_samples, derive_seed(c.seed, {stream::kMonteCarlo}));
  }
  const auto configs = grid_tune(data, k_range(c.k_max), splits, measure, {}, threads);
  SelectionParams sel = c.selection();
  sel.seed = derive_seed(c.seed, {stream::kSelection});
  const std::size_t idx = approach == Approach::acc ? single_criteria_select_index(configs, sel.seed)
                                                    : epsilon_constraint_select_index(configs, sel);
  const ConfigPerformance& chosen = configs[idx];
  ChosenConfig cc;
  cc.k = chosen.k;
  const SparseModel model = build_final_model(data, approach, cc);

  nlohmann::json j;
  j["approach"] = to_string(approach);
  j["k"] = chosen.k;
  j["mean_accuracy"] = chosen.mean_accuracy;
  if (approach != Approach::acc) {
    j["stability"] = *chosen.stability;
    j["measure"] = approach == Approach::adj ? "adjusted" : "unadjusted";
  }
  if (!similarity_source.empty()) j["similarity"] = similarity_source;
  j["final_model"] = detail::model_json(model);
  write_file(detail::out_path(c, "tuning.csv").string(), [&](std::ostream& o) { write_tuning_csv(o, configs); });
  write_json(detail::out_path(c, "chosen.json").string(), j);
}

/// Random-search tuning of stability selection; writes frequencies.csv
/// (full-data frequencies under the winning parameters) and stabsel.json.
inline void cmd_stabsel(const RunConfig& c) {
  detail::require_data(c);
  const Dataset data = read_dataset_csv(c.data, c.label);
  const CVSplits splits = make_cv_splits(data.n(), c.folds, derive_seed(c.seed, {stream::kCvSplits}));
  const unsigned threads = resolve_threads(c.threads);
  const auto tuned = tune_stabsel(data, splits, c.n_points, c.seed, c.stabsel_search(), {}, threads);
  const auto [stable, freqs] = run_stability_selection(data, tuned.params, {}, threads);
  const SparseModel model = fit_logistic(data, stable);

  nlohmann::json j;
  j["cutoff"] = tuned.params.cutoff;
  j["pfer"] = tuned.params.pfer;
  j["q"] = freqs.q_used;
  j["n_subsamples"] = tuned.params.n_subsamples;
  j["mean_accuracy"] = tuned.performance.mean_accuracy;
  j["n_candidates"] = tuned.candidates.size();
  j["stable_set"] = stable.indices();
  j["failed_subsamples"] = freqs.failed_subsamples;
  j["final_model"] = detail::model_json(model);
  write_file(detail::out_path(c, "frequencies.csv").string(),
             [&](std::ostream& o) { write_frequencies_csv(o, freqs, data); });
  write_json(detail::out_path(c, "stabsel.json").string(), j);
}

/// Scenarios of the simulation grid after filtering by p and block size.
[[nodiscard]] inline std::vector<ScenarioSpec> experiment_scenarios(const RunConfig& c) {
  std::vector<ScenarioSpec> out;
  for (ScenarioSpec s : scenario_grid(c.desk_scale)) {
    if (!c.p_values.empty() && std::find(c.p_values.begin(), c.p_values.end(), s.p) == c.p_values.end())
      continue;
    if (!c.block_sizes.empty() &&
        std::find(c.block_sizes.begin(), c.block_sizes.end(), s.block_size) == c.block_sizes.end())
      continue;
    s.n = c.scenario.n;
    s.within_corr = c.scenario.within_corr;
    s.between_corr = c.scenario.between_corr;
    s.n_generating = c.scenario.n_generating;
    out.push_back(s);
  }
  if (out.empty()) throw InvalidArgument("experiment: the scenario filter matches no scenario");
  return out;
}

/// Simulation study; writes results.csv in long format.
inline void cmd_experiment(const RunConfig& c) {
  const auto scenarios = experiment_scenarios(c);
  const auto approaches = c.approach_list();
  const auto options = c.experiment_options();
  std::vector<ResultRow> rows;
  for (const auto& spec : scenarios) {
    auto part = run_scenario(spec, c.replication_count(), approaches, c.seed, options);
    for (auto& r : part) {
      if (!r.error.empty())
        std::cerr << "warning: " << r.scenario_id << " replication " << r.replication << " "
                  << to_string(r.approach) << ": " << r.error << '\n';
      rows.push_back(std::move(r));
    }
  }
  write_file(detail::out_path(c, "results.csv").string(), [&](std::ostream& o) { write_results_csv(o, rows); });
}

/// Nested cross-validation of each approach on a real dataset; writes nested_cv.csv.
inline void cmd_nested_cv(const RunConfig& c) {
  detail::require_data(c);
  const Dataset data = read_dataset_csv(c.data, c.label);
  auto options = c.experiment_options();
  std::vector<NestedCvRow> rows;
  for (Approach a : c.approach_list(false)) {
    if (a == Approach::truth) throw InvalidArgument("nested-cv: the truth approach needs simulated data");
    auto part = run_nested_cv(data, a, c.outer_folds, c.inner_folds, c.seed, options);
    for (auto& r : part) {
      if (!r.error.empty())
        std::cerr << "warning: " << to_string(a) << " outer fold " << r.outer_fold << ": " << r.error << '\n';
      rows.push_back(std::move(r));
    }
  }
  write_file(detail::out_path(c, "nested_cv.csv").string(), [&](std::ostream& o) { write_nested_cv_csv(o, rows); });
}

/// SMU and, given a similarity source, SMA of the feature sets in c.sets;
/// writes measures.json. Similarity comes from a block size (config or
/// ground-truth file) or from absolute correlations of c.data.
inline void cmd_measures(const RunConfig& c) {
  if (c.sets.empty()) throw InvalidArgument("measures: no feature-set file given (set 'sets')");
  const auto j = read_json(c.sets);
  std::size_t p = 0;
  std::vector<FeatureSet> sets;
  try {
    p = j.at("p").get<std::size_t>();
    for (const auto& s : j.at("sets")) sets.emplace_back(s.get<std::vector<Index>>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("measures: feature-set file needs 'p' and 'sets': ") + e.what());
  }
  for (const auto& s : sets) s.validate(p);

  std::optional<SimilarityMatrix> sim;
  std::string source;
  if (c.block_size) {
    sim = SimilarityMatrix::block(p, *c.block_size, c.theta);
    source = "block";
  } else if (!c.truth.empty()) {
    sim = SimilarityMatrix::block(p, read_ground_truth(c.truth).block_size, c.theta);
    source = "block";
  } else if (!c.data.empty()) {
    const Dataset data = read_dataset_csv(c.data, c.label);
    if (data.p() != p) throw InvalidArgument("measures: dataset p does not match the feature-set file");
    sim = similarity_from_data(data, c.theta);
    source = "correlation";
  }

  nlohmann::json out;
  out["p"] = p;
  out["n_sets"] = sets.size();
  const auto u = smu(sets, p);
  out["smu"] = u.score;
  out["pairs_used"] = u.pairs_used;
  out["pairs_skipped"] = u.pairs_skipped;
  if (sim) {
    const auto a = sma(sets, *sim, c.mc_samples, derive_seed(c.seed, {stream::kMonteCarlo}));
    out["sma"] = a.score;
    out["similarity"] = source;
    out["theta"] = c.theta;
    out["mc_samples_used"] = a.mc_samples_used;
  }
  write_json(detail::out_path(c, "measures.json").string(), out);
}

/// Runs a command by name and maps failures to exit codes: 2 for usage and
/// configuration errors, 3 for runtime failures.
[[nodiscard]] inline int run_command(const std::string& name, const RunConfig& c,
                                     std::ostream& err = std::cerr) {
  try {
    c.validate();
    if (name == "simulate") cmd_simulate(c);
    else if (name == "tune") cmd_tune(c);
    else if (name == "stabsel") cmd_stabsel(c);
    else if (name == "experiment") cmd_experiment(c);
    else if (name == "nested-cv") cmd_nested_cv(c);
    else if (name == "measures") cmd_measures(c);
    else throw InvalidArgument("unknown command '" + name + "'");
    return kExitOk;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace stabtune

#endif  // STABTUNE_COMMANDS_HPP
