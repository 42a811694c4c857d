#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "stabtune/simdata.hpp"

using namespace stabtune;
using Catch::Approx;

namespace {

double numeric_min_eigenvalue(const ScenarioSpec& spec) {
  const auto p = static_cast<Eigen::Index>(spec.p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(p, p, spec.between_corr);
  const auto bs = static_cast<Eigen::Index>(spec.block_size);
  for (Eigen::Index start = 0; start < p; start += bs) {
    const Eigen::Index size = std::min(bs, p - start);
    sigma.block(start, start, size, size).setConstant(spec.within_corr);
  }
  sigma.diagonal().setOnes();
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST_CASE("ScenarioSpec validation", "[simdata][spec]") {
  ScenarioSpec s;
  s.p = 200;
  s.block_size = 15;
  CHECK_THROWS_WITH(s.validate(), Catch::Matchers::ContainsSubstring("divisible by block_size"));
  s.partial_last_block = true;
  CHECK_NOTHROW(s.validate());
  s.block_size = 50;
  s.partial_last_block = false;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);  // 4 blocks < 5 generating features
  s.block_size = 5;
  s.within_corr = 0.05;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  CHECK(ScenarioSpec{}.id() == "n100_p200_b1");
}

TEST_CASE("make_block_covariance layout", "[simdata][covariance]") {
  ScenarioSpec s;
  s.p = 10;
  s.block_size = 5;
  s.n_generating = 2;
  const auto sigma = make_block_covariance(s);
  CHECK(sigma(0, 0) == 1.0);
  CHECK(sigma(0, 4) == 0.95);
  CHECK(sigma(0, 5) == 0.1);
  CHECK(sigma(9, 5) == 0.95);
  CHECK(sigma.isApprox(sigma.transpose()));

  ScenarioSpec single = s;
  single.block_size = 1;
  const auto diag = make_block_covariance(single);
  CHECK(diag(0, 1) == 0.1);
}

TEST_CASE("closed-form minimum eigenvalue matches a numeric solver", "[simdata][covariance][oracle]") {
  for (std::size_t p : {10, 37, 60, 200}) {
    for (std::size_t block : {1, 3, 5, 15, 25}) {
      ScenarioSpec s;
      s.p = p;
      s.block_size = block;
      s.n_generating = 1;
      s.partial_last_block = true;
      for (double b : {0.0, 0.1, 0.5}) {
        s.between_corr = b;
        CHECK(block_covariance_min_eigenvalue(s) == Approx(numeric_min_eigenvalue(s)).margin(1e-9));
      }
    }
  }
}

TEST_CASE("ground truth uses the first feature of the leading blocks", "[simdata][truth]") {
  ScenarioSpec s;
  s.block_size = 25;
  const auto t = ground_truth(s);
  CHECK(t.generating_features == FeatureSet({0, 25, 50, 75, 100}));
  CHECK(t.block_size == 25);
  CHECK(block_of(49, 25) == 1);
}

TEST_CASE("sample_dataset shape, labels and determinism", "[simdata][sample]") {
  ScenarioSpec s;
  s.block_size = 5;
  s.seed = 4;
  const auto [a, truth] = sample_dataset(s);
  CHECK(a.n() == 100);
  CHECK(a.p() == 200);
  for (int v : a.y) CHECK((v == 0 || v == 1));
  const auto [b, truth_b] = sample_dataset(s);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  const auto [c, truth_c] = sample_dataset(test_spec(s));
  CHECK_FALSE(a.x == c.x);
  CHECK(truth_c.generating_features == truth.generating_features);
}

TEST_CASE("sample_dataset reproduces the block correlations", "[simdata][sample][statistical]") {
  ScenarioSpec s;
  s.n = 5000;
  s.p = 20;
  s.block_size = 5;
  s.n_generating = 2;
  s.seed = 9;
  const auto [d, t] = sample_dataset(s);
  CHECK(correlation(d.x.col(0), d.x.col(3)) == Approx(0.95).margin(0.02));
  CHECK(correlation(d.x.col(0), d.x.col(7)) == Approx(0.1).margin(0.05));
  CHECK(d.x.col(11).squaredNorm() / 5000.0 == Approx(1.0).margin(0.08));
}

TEST_CASE("factor-model sampling above the dense limit", "[simdata][sample][statistical]") {
  ScenarioSpec s;
  s.n = 600;
  s.p = 4500;
  s.block_size = 25;
  s.seed = 2;
  const auto [d, t] = sample_dataset(s);
  CHECK(d.p() == 4500);
  CHECK(correlation(d.x.col(0), d.x.col(24)) == Approx(0.95).margin(0.03));
  CHECK(correlation(d.x.col(0), d.x.col(25)) == Approx(0.1).margin(0.12));
}

TEST_CASE("scenario grid", "[simdata][grid]") {
  CHECK(scenario_grid(false).size() == 12);
  const auto desk = scenario_grid(true);
  REQUIRE(desk.size() == 4);
  for (const auto& s : desk) {
    CHECK(s.p == 200);
    CHECK_NOTHROW(s.validate());
  }
  CHECK(desk[2].block_size == 15);
  CHECK(desk[2].partial_last_block);
}
