// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Usage: acceptance [output-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "stabtune/commands.hpp"

using namespace stabtune;
namespace fs = std::filesystem;

namespace {

struct Report {
  int failures = 0;

  void line(const std::string& id, bool pass, const std::string& detail, double seconds) {
    if (!pass) ++failures;
    std::cout << (pass ? "PASS " : "FAIL ") << id << ": " << detail << " [" << std::fixed
              << std::setprecision(1) << seconds << " s]" << std::defaultfloat << std::endl;
  }
};

class Timer {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

FeatureSet random_set(std::mt19937_64& rng, std::size_t p, std::size_t size) {
  std::vector<Index> all(p);
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(size);
  return FeatureSet(std::move(all));
}

std::vector<FeatureSet> random_family(std::mt19937_64& rng, std::size_t p, std::size_t m) {
  std::uniform_int_distribution<std::size_t> size(1, p - 1);
  std::vector<FeatureSet> sets;
  for (std::size_t i = 0; i < m; ++i) sets.push_back(random_set(rng, p, size(rng)));
  return sets;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// 1. chance-corrected measures
void measures_bounded(Report& report) {
  Timer timer;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> p_dist(10, 100), m_dist(2, 10), block_dist(1, 10);

  bool identical_ok = true;
  for (int t = 0; t < 200 && identical_ok; ++t) {
    const std::size_t p = p_dist(rng);
    const FeatureSet s = random_set(rng, p, std::uniform_int_distribution<std::size_t>(1, p - 1)(rng));
    const std::vector<FeatureSet> sets(m_dist(rng), s);
    identical_ok = smu(sets, p).score == 1.0;
  }

  double max_score = -1e300;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t p = p_dist(rng);
    const auto sets = random_family(rng, p, m_dist(rng));
    const auto sim = SimilarityMatrix::block(p, block_dist(rng));
    max_score = std::max({max_score, smu(sets, p).score, sma(sets, sim, 1000, t).score});
  }

  std::vector<double> scores;
  for (int t = 0; t < 500; ++t) {
    const std::size_t p = p_dist(rng);
    scores.push_back(smu(random_family(rng, p, m_dist(rng)), p).score);
  }
  const double mean_score = mean(scores);
  double var = 0.0;
  for (double s : scores) var += (s - mean_score) * (s - mean_score);
  const double se = std::sqrt(var / static_cast<double>(scores.size() - 1) / static_cast<double>(scores.size()));

  const bool pass = identical_ok && max_score <= 1.0 && std::abs(mean_score) <= 3.0 * se;
  report.line("1 measure correctness", pass,
              std::string("identical sets -> 1: ") + (identical_ok ? "yes" : "no") +
                  "; max smu/sma over 1000 families " + fmt(max_score) + " (<= 1); random mean smu " +
                  fmt(mean_score) + ", 3 SE = " + fmt(3.0 * se),
              timer.seconds());
}

// 2. no similar pairs: sma reduces to smu
void adjusted_matches_unadjusted(Report& report) {
  Timer timer;
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> p_dist(10, 60), m_dist(2, 10);
  std::uniform_real_distribution<double> below(0.0, 0.89);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t p = p_dist(rng);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      for (Eigen::Index j = 0; j <= i; ++j) values(i, j) = values(j, i) = i == j ? 1.0 : below(rng);
    const auto sim = SimilarityMatrix::dense(values, kDefaultTheta);
    const auto sets = random_family(rng, p, m_dist(rng));
    if (sma(sets, sim, kDefaultMcSamples, t).score != smu(sets, p).score) ++mismatches;
  }
  report.line("2 sma = smu without similar features", mismatches == 0,
              std::to_string(mismatches) + " of 100 families differ", timer.seconds());
}

// 3. greedy + swap solver against exhaustive enumeration
void solver_oracle(Report& report) {
  Timer timer;
  int instances = 0, misses = 0;
  double worst = 0.0;
  for (std::size_t block : {1, 2}) {
    for (Seed seed = 1; seed <= 5; ++seed) {
      ScenarioSpec spec;
      spec.n = 80;
      spec.p = 10;
      spec.block_size = block;
      spec.seed = seed;
      const Dataset d = sample_dataset(spec).first;
      for (std::size_t k = 1; k <= 3; ++k) {
        const double heuristic = fit_l0(d, k).loss;
        const double exact = fit_l0_exhaustive(d, k).loss;
        const double rel = exact == 0.0 ? std::abs(heuristic) : std::abs(heuristic - exact) / std::abs(exact);
        worst = std::max(worst, rel);
        ++instances;
        if (!(rel <= 1e-8)) ++misses;
      }
    }
  }
  report.line("3 solver oracle", instances >= 20 && misses == 0,
              std::to_string(instances) + " instances, " + std::to_string(misses) +
                  " outside 1e-8 relative, worst " + fmt(worst),
              timer.seconds());
}

ConfigPerformance config(double acc, double stab, std::size_t k) {
  ConfigPerformance c;
  c.k = k;
  c.mean_accuracy = acc;
  c.stability = stab;
  return c;
}

// 4. epsilon-constraint selection
void epsilon_constraint(Report& report) {
  Timer timer;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 20), count(1, 21);
  int dominated = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<ConfigPerformance> configs;
    const int m = count(rng);
    const bool ties = t % 2 == 0;  // half the sets on a coarse grid with many ties
    for (int i = 0; i < m; ++i) {
      const double a = ties ? coarse(rng) / 20.0 : unit(rng);
      const double s = ties ? coarse(rng) / 20.0 : unit(rng);
      configs.push_back(config(a, s, static_cast<std::size_t>(i)));
    }
    SelectionParams params;
    params.seed = static_cast<Seed>(t);
    const auto& chosen = configs[epsilon_constraint_select_index(configs, params)];
    for (const auto& c : configs) {
      if (c.mean_accuracy >= chosen.mean_accuracy && *c.stability >= *chosen.stability &&
          (c.mean_accuracy > chosen.mean_accuracy || *c.stability > *chosen.stability)) {
        ++dominated;
        break;
      }
    }
  }
  const std::vector<ConfigPerformance> abc{config(0.90, 0.50, 0), config(0.88, 0.80, 1), config(0.86, 0.95, 2)};
  const bool example = epsilon_constraint_select_index(abc, SelectionParams{}) == 1;
  report.line("4 epsilon-constraint selection", dominated == 0 && example,
              std::to_string(dominated) + " of 1000 selections strictly dominated; A/B/C -> " +
                  (example ? "B" : "not B"),
              timer.seconds());
}

// 6. sampled correlations match the block design
void simulation_fidelity(Report& report) {
  Timer timer;
  ScenarioSpec spec;
  spec.n = 10000;
  spec.p = 50;
  spec.block_size = 5;
  spec.seed = 606;
  const Dataset d = sample_dataset(spec).first;
  Eigen::MatrixXd centered = d.x.rowwise() - d.x.colwise().mean();
  const Eigen::VectorXd norms = centered.colwise().norm();
  const Eigen::MatrixXd corr =
      (centered.transpose() * centered).array() / (norms * norms.transpose()).array();
  double within_sum = 0.0, between_sum = 0.0, within_dev = 0.0, between_dev = 0.0;
  std::size_t within_n = 0, between_n = 0;
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < corr.cols(); ++j) {
      const bool same = block_of(static_cast<Index>(i), 5) == block_of(static_cast<Index>(j), 5);
      if (same) {
        within_sum += corr(i, j);
        within_dev = std::max(within_dev, std::abs(corr(i, j) - 0.95));
        ++within_n;
      } else {
        between_sum += corr(i, j);
        between_dev = std::max(between_dev, std::abs(corr(i, j) - 0.1));
        ++between_n;
      }
    }
  }
  const double within = within_sum / static_cast<double>(within_n);
  const double between = between_sum / static_cast<double>(between_n);
  const bool pass = within_dev <= 0.05 && between_dev <= 0.05;
  report.line("6 simulation fidelity", pass,
              "mean within " + fmt(within) + " (max |dev| " + fmt(within_dev) + "), mean between " +
                  fmt(between) + " (max |dev| " + fmt(between_dev) + "), tolerance 0.05 per pair",
              timer.seconds());
}

RunConfig desk_config(const fs::path& out) {
  RunConfig c;
  c.desk_scale = true;
  c.out = out.string();
  return c;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

using Summary = std::map<std::pair<std::size_t, Approach>, std::vector<const ResultRow*>>;

std::size_t block_of_id(const std::string& id) {
  return static_cast<std::size_t>(std::stoul(id.substr(id.rfind("_b") + 2)));
}

double median_of(const Summary& s, std::size_t block, Approach a, double ResultRow::*field) {
  std::vector<double> v;
  for (const ResultRow* r : s.at({block, a})) v.push_back(r->*field);
  return median(v);
}

double median_count(const Summary& s, std::size_t block, Approach a, std::size_t ResultRow::*field) {
  std::vector<double> v;
  for (const ResultRow* r : s.at({block, a})) v.push_back(static_cast<double>(r->*field));
  return median(v);
}

// 5. desk-scale simulation trends
bool desk_scale_trends(Report& report, const fs::path& out) {
  Timer timer;
  const RunConfig c = desk_config(out);
  const int code = run_command("experiment", c);
  const double seconds = timer.seconds();
  if (code != kExitOk) {
    report.line("5 desk-scale trends", false, "experiment exited with code " + std::to_string(code), seconds);
    return false;
  }
  std::ifstream in(out / "results.csv");
  const auto rows = read_results_csv(in);
  Summary s;
  std::size_t errors = 0;
  for (const auto& r : rows) {
    s[{block_of_id(r.scenario_id), r.approach}].push_back(&r);
    if (!r.error.empty()) ++errors;
  }
  std::cout << "  " << rows.size() << " rows, " << errors << " with errors\n";
  std::cout << "  block approach  median_acc  median_fp  median_fn  median_selected\n";
  for (std::size_t b : {1, 5, 15, 25})
    for (Approach a : kAllApproaches)
      std::cout << "  " << std::setw(5) << b << ' ' << std::setw(8) << to_string(a) << "  " << std::setw(10)
                << fmt(median_of(s, b, a, &ResultRow::test_accuracy)) << ' ' << std::setw(10)
                << fmt(median_count(s, b, a, &ResultRow::false_positives)) << ' ' << std::setw(10)
                << fmt(median_count(s, b, a, &ResultRow::false_negatives)) << ' ' << std::setw(10)
                << fmt(median_count(s, b, a, &ResultRow::n_selected)) << '\n';

  // a
  bool a_pass = true;
  std::string a_detail;
  for (std::size_t b : {5, 15, 25}) {
    const double adj = median_count(s, b, Approach::adj, &ResultRow::false_positives);
    const double acc = median_count(s, b, Approach::acc, &ResultRow::false_positives);
    const double unadj = median_count(s, b, Approach::unadj, &ResultRow::false_positives);
    a_pass = a_pass && adj < acc && adj < unadj;
    a_detail += " b" + std::to_string(b) + ": " + fmt(adj) + " vs " + fmt(acc) + "/" + fmt(unadj) + ";";
  }
  report.line("5a median FP adj < acc and < unadj at block sizes 5, 15, 25", a_pass,
              "adj vs acc/unadj" + a_detail, seconds);

  // b
  bool b_pass = true;
  std::string b_detail;
  for (std::size_t b : {1, 5, 15, 25}) {
    const double adj = median_of(s, b, Approach::adj, &ResultRow::test_accuracy);
    const double acc = median_of(s, b, Approach::acc, &ResultRow::test_accuracy);
    b_pass = b_pass && std::abs(adj - acc) <= 0.05;
    b_detail += " b" + std::to_string(b) + ": " + fmt(adj) + " vs " + fmt(acc) + ";";
  }
  report.line("5b median accuracy adj within 0.05 of acc", b_pass, "adj vs acc" + b_detail, 0.0);

  // c
  const double fn_stabs = median_count(s, 25, Approach::stabs, &ResultRow::false_negatives);
  const double fn_adj = median_count(s, 25, Approach::adj, &ResultRow::false_negatives);
  const double acc_stabs = median_of(s, 25, Approach::stabs, &ResultRow::test_accuracy);
  const double acc_adj = median_of(s, 25, Approach::adj, &ResultRow::test_accuracy);
  report.line("5c stabs worse than adj at block size 25", fn_stabs > fn_adj && acc_stabs < acc_adj,
              "median FN " + fmt(fn_stabs) + " vs " + fmt(fn_adj) + "; median accuracy " + fmt(acc_stabs) +
                  " vs " + fmt(acc_adj),
              0.0);

  // d
  const auto& adj1 = s.at({1, Approach::adj});
  const auto& unadj1 = s.at({1, Approach::unadj});
  std::size_t differing = 0;
  for (std::size_t i = 0; i < adj1.size(); ++i)
    if (i >= unadj1.size() || adj1[i]->replication != unadj1[i]->replication ||
        adj1[i]->chosen_k != unadj1[i]->chosen_k || !adj1[i]->error.empty() || !unadj1[i]->error.empty())
      ++differing;
  report.line("5d adj and unadj choose the same k at block size 1", differing == 0 && adj1.size() == unadj1.size(),
              std::to_string(differing) + " of " + std::to_string(adj1.size()) + " replications differ", 0.0);
  return true;
}

// 7. identical configurations give byte-identical results
void determinism(Report& report, const fs::path& first, const fs::path& second) {
  Timer timer;
  const int code = run_command("experiment", desk_config(second));
  const bool same = code == kExitOk && fs::exists(first / "results.csv") &&
                    slurp(first / "results.csv") == slurp(second / "results.csv");
  report.line("7 determinism", same,
              code == kExitOk ? (same ? "results.csv byte-identical across runs" : "results.csv differs")
                              : "rerun exited with code " + std::to_string(code),
              timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out);
  Report report;
  try {
    measures_bounded(report);
    adjusted_matches_unadjusted(report);
    solver_oracle(report);
    epsilon_constraint(report);
    const bool ran = desk_scale_trends(report, out / "run1");
    simulation_fidelity(report);
    if (ran) determinism(report, out / "run1", out / "run2");
    else report.line("7 determinism", false, "skipped: the first experiment run failed", 0.0);
  } catch (const std::exception& e) {
    std::cout << "FAIL unexpected exception: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (report.failures == 0 ? "ALL PASS" : std::to_string(report.failures) + " FAILED") << std::endl;
  return report.failures == 0 ? 0 : 1;
}
