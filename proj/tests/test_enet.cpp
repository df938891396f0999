#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "groupenet/enet.hpp"
#include "groupenet/rng.hpp"
#include "oracles.hpp"

using namespace groupenet;
using Catch::Approx;

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 1.0) == Approx(2.0));
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(5.0, 0.0) == Approx(5.0));
  CHECK(soft_threshold(-4.0, 1.5) == Approx(-2.5));
}

namespace {

Dataset logistic_instance(int n, int p, std::uint64_t seed, double coef_scale = 1.0,
                          bool intercept = true) {
  RngStream rng(seed, "enet-instance");
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  auto [xs, info] = standardize(x);
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = coef_scale * rng.normal();
  Eigen::VectorXd y(n), m(n);
  m.setOnes();
  for (int i = 0; i < n; ++i) y[i] = rng.bernoulli(expit(xs.row(i).dot(beta))) ? 1 : 0;
  Eigen::MatrixXd unpen(n, intercept ? 1 : 0);
  if (intercept) unpen.setOnes();
  Dataset d = Dataset::from_parts(xs, y, m, unpen);
  d.scale = info;
  return d;
}

}  // namespace

TEST_CASE("tiny lambda recovers the unpenalized logistic fit") {
  Dataset d = logistic_instance(50, 3, 10, 0.8);
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  EnetFit fit = fit_weighted_enet_full(problem, 1e-8);
  Eigen::MatrixXd design(50, 4);
  design.col(0).setOnes();
  design.rightCols(3) = d.features;
  Eigen::VectorXd exact = oracle::irls_logistic(design, d.successes, d.trials);
  CHECK(std::abs(fit.coef.unpenalized_part[0] - exact[0]) < 1e-4);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(fit.coef.penalized_part[j] - exact[j + 1]) < 1e-4);
  }
  CHECK(fit.kkt < 1e-6);
}

TEST_CASE("lambda at or above lambda_max yields the exact null model") {
  Dataset d = logistic_instance(40, 6, 11, 0.7);
  EnetProblem problem = EnetProblem::plain(d, 0.4);
  const double lmax = lambda_max(problem);
  for (double factor : {1.0, 1.5}) {
    EnetFit fit = fit_weighted_enet_full(problem, factor * lmax);
    CHECK(fit.active_size == 0);
    CHECK((fit.coef.penalized_part.array() == 0.0).all());
    const double ybar = d.successes.sum() / d.trials.sum();
    CHECK(fit.coef.unpenalized_part[0] ==
          Approx(std::log(ybar / (1.0 - ybar))).epsilon(1e-7));
    CHECK(fit.kkt < 1e-6);
  }
}

TEST_CASE("raising one penalty factor weakly shrinks that coefficient") {
  Dataset d = logistic_instance(60, 5, 12, 0.9);
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  const double lambda = 0.25 * lambda_max(problem);
  Coefficients base = fit_weighted_enet(problem, lambda);
  for (int j = 0; j < 5; ++j) {
    EnetProblem bumped = problem;
    bumped.penalty_factors[j] = 2.0;
    Coefficients shrunk = fit_weighted_enet(bumped, lambda);
    CHECK(std::abs(shrunk.penalized_part[j]) <=
          std::abs(base.penalized_part[j]) + 1e-9);
  }
}

TEST_CASE("every fit in a path satisfies the KKT conditions") {
  Dataset d = logistic_instance(45, 12, 13, 0.6);
  RngStream rng(14, "factors");
  Eigen::VectorXd factors(12);
  for (int j = 0; j < 12; ++j) factors[j] = std::exp(0.4 * rng.normal());
  EnetProblem problem{d, factors, 0.5};
  auto grid = make_lambda_grid(lambda_max(problem), 40);
  std::optional<Coefficients> warm;
  for (double lambda : grid) {
    EnetFit fit = fit_weighted_enet_full(problem, lambda, warm);
    warm = fit.coef;
    REQUIRE(fit.kkt < 1e-6);
  }
}

TEST_CASE("warm-started path fits equal cold-started fits") {
  Dataset d = logistic_instance(50, 8, 15, 0.7);
  EnetProblem problem = EnetProblem::plain(d, 0.6);
  auto grid = make_lambda_grid(lambda_max(problem), 12, 1e-2);
  EnetPath path = fit_path(problem, grid);
  for (std::size_t g = 0; g < grid.size(); g += 3) {
    EnetFit cold = fit_weighted_enet_full(problem, grid[g]);
    CHECK((cold.coef.penalized_part - path.points[g].beta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((cold.coef.unpenalized_part - path.points[g].beta_u).cwiseAbs().maxCoeff() <
          1e-6);
  }
}

TEST_CASE("constant penalty factors are equivalent to a rescaled global pair") {
  Dataset d = logistic_instance(40, 6, 16, 0.8);
  const double c = 2.7;
  const double l1 = 1.3, l2 = 0.9;
  // factors c with (l1, l2) versus factors 1 with (l1 sqrt(c), l2 c)
  Eigen::VectorXd bu1 = Eigen::VectorXd::Zero(d.u());
  Eigen::VectorXd b1 = Eigen::VectorXd::Zero(d.p());
  detail::cd_solve(d, Eigen::VectorXd::Constant(6, c), l1, l2, bu1, b1);
  Eigen::VectorXd bu2 = Eigen::VectorXd::Zero(d.u());
  Eigen::VectorXd b2 = Eigen::VectorXd::Zero(d.p());
  detail::cd_solve(d, Eigen::VectorXd::Ones(6), l1 * std::sqrt(c), l2 * c, bu2, b2);
  CHECK((b1 - b2).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((bu1 - bu2).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("penalized objective is non-decreasing across coordinate sweeps") {
  Dataset d = logistic_instance(60, 10, 17, 0.5);
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  const double lambda = 0.2 * lambda_max(problem);
  const PenaltyPair pair = reparametrize(problem.alpha, lambda);
  std::vector<double> trace;
  detail::CdControl ctl;
  ctl.objective_trace = &trace;
  Eigen::VectorXd bu = Eigen::VectorXd::Zero(d.u());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d.p());
  detail::cd_solve(d, problem.penalty_factors, pair.lambda1, pair.lambda2, bu, b, ctl);
  REQUIRE(trace.size() > 3);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-10 * (1.0 + std::abs(trace[i - 1])));
  }
}

TEST_CASE("cross-validation prefers the null end of the grid on pure noise") {
  int near_max = 0;
  const int replicates = 10;
  for (int t = 0; t < replicates; ++t) {
    RngStream rng(200 + t, "noise");
    const int n = 60, p = 20;
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
    }
    auto [xs, info] = standardize(x);
    Eigen::VectorXd y(n), m(n);
    m.setOnes();
    for (int i = 0; i < n; ++i) y[i] = rng.bernoulli(0.5) ? 1 : 0;
    Dataset d = Dataset::from_parts(xs, y, m, Eigen::MatrixXd::Ones(n, 1));
    EnetProblem problem = EnetProblem::plain(d, 0.5);
    CvResult cv = cv_global_lambda(problem, 5, {}, 300 + t);
    if (cv.best_index <= 20) ++near_max;  // top fifth of a 100-point grid
  }
  CHECK(near_max >= 8);
}

TEST_CASE("cross-validation keeps a strong single feature") {
  RngStream rng(41, "signal");
  const int n = 200, p = 6;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  auto [xs, info] = standardize(x);
  Eigen::VectorXd y(n), m(n);
  m.setOnes();
  for (int i = 0; i < n; ++i) y[i] = rng.bernoulli(expit(2.5 * xs(i, 0))) ? 1 : 0;
  Dataset d = Dataset::from_parts(xs, y, m, Eigen::MatrixXd::Ones(n, 1));
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  CvResult cv = cv_global_lambda(problem, 10, {}, 7);
  Coefficients coef = fit_weighted_enet(problem, cv.best_lambda);
  CHECK(coef.penalized_part[0] != 0.0);
}

TEST_CASE("leave-one-out cross-validation has one deviance per grid point") {
  Dataset d = logistic_instance(25, 4, 18, 0.6);
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  auto grid = make_lambda_grid(lambda_max(problem), 30);
  CvResult cv = cv_global_lambda(problem, static_cast<int>(d.n()), grid, 5);
  CHECK(cv.mean_deviance.size() == grid.size());
  CHECK(!cv.warnings.empty());  // single-observation folds are single-class
}

TEST_CASE("select_k_features hits attainable sizes and the extremes") {
  Dataset d = logistic_instance(60, 5, 19, 1.0);
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  SECTION("k = 0 returns the null model") {
    SelectKResult sel = select_k_features(problem, 0);
    CHECK(sel.achieved_size == 0);
    CHECK(sel.exact);
    CHECK((sel.coef.penalized_part.array() == 0.0).all());
  }
  SECTION("k = p on an n > p instance returns the full model") {
    SelectKResult sel = select_k_features(problem, 5);
    CHECK(sel.achieved_size == 5);
    CHECK(sel.exact);
  }
  SECTION("intermediate k") {
    SelectKResult sel = select_k_features(problem, 2);
    CHECK(sel.achieved_size <= 2);
    if (sel.exact) {
      CHECK(sel.achieved_size == 2);
      CHECK((sel.coef.penalized_part.array() != 0.0).count() == 2);
    }
  }
  SECTION("k beyond p is rejected") {
    CHECK_THROWS_AS(select_k_features(problem, 6), validation_error);
  }
}

TEST_CASE("cv rejects bad fold counts and non-descending grids") {
  Dataset d = logistic_instance(20, 3, 20, 0.5);
  EnetProblem problem = EnetProblem::plain(d, 0.5);
  CHECK_THROWS_AS(cv_global_lambda(problem, 1), validation_error);
  CHECK_THROWS_AS(cv_global_lambda(problem, 21), validation_error);
  CHECK_THROWS_AS(cv_global_lambda(problem, 5, {1.0, 2.0}), validation_error);
}
