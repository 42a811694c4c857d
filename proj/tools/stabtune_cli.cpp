#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stabtune/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<stabtune::Seed> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  bool desk_scale = false;
  std::optional<std::string> data;
  std::optional<std::string> truth;
  std::optional<std::string> approach;
  std::optional<std::size_t> replications;
  bool print_config = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON run configuration");
  sub->add_option("--seed", o.seed, "Master random seed");
  sub->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_flag("--desk-scale", o.desk_scale, "Reduced experiment grid (p = 200, 10 replications)");
  sub->add_flag("--print-config", o.print_config, "Print the effective configuration as JSON and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability-aware hyperparameter tuning for sparse logistic regression"};
  app.require_subcommand(1);
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "Sample a block-correlated dataset and its ground truth");
  auto* tune = app.add_subcommand("tune", "Grid-tune the support size k (adj, unadj or acc)");
  auto* stabsel = app.add_subcommand("stabsel", "Tune and run stability selection");
  auto* experiment = app.add_subcommand("experiment", "Run the simulation study");
  auto* nested = app.add_subcommand("nested-cv", "Nested cross-validation on a tabular dataset");
  auto* measures = app.add_subcommand("measures", "SMU/SMA of a family of feature sets");
  for (auto* sub : {simulate, tune, stabsel, experiment, nested, measures}) add_common(sub, o);
  for (auto* sub : {tune, stabsel, nested, measures})
    sub->add_option("--data", o.data, "Dataset CSV with a header row and a 0/1 label column");
  for (auto* sub : {tune, measures}) sub->add_option("--truth", o.truth, "Ground-truth JSON from simulate");
  tune->add_option("--approach", o.approach, "adj, unadj or acc");
  experiment->add_option("--replications", o.replications, "Replications per scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? stabtune::kExitOk : stabtune::kExitUsage;
  }

  stabtune::RunConfig config;
  try {
    if (!o.config.empty()) config = stabtune::load_config(o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return stabtune::kExitUsage;
  }
  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  if (o.out) config.out = *o.out;
  if (o.desk_scale) config.desk_scale = true;
  if (o.data) config.data = *o.data;
  if (o.truth) config.truth = *o.truth;
  if (o.approach) config.approach = *o.approach;
  if (o.replications) config.replications = *o.replications;

  if (o.print_config) {
    std::cout << nlohmann::json(config).dump(2) << '\n';
    return stabtune::kExitOk;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return stabtune::run_command(name, config);
}
