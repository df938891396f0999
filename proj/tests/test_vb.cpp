#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "groupenet/rng.hpp"
#include "groupenet/vb.hpp"
#include "oracles.hpp"

using namespace groupenet;
using Catch::Approx;

namespace {

Eigen::VectorXd prior_precision(const Eigen::VectorXd& penalties, double l1, double l2,
                                const Eigen::VectorXd& chi) {
  Eigen::VectorXd d(penalties.size());
  for (Eigen::Index j = 0; j < penalties.size(); ++j) {
    d[j] = penalties[j] * l2 + penalties[j] * 0.5 * l1 * std::sqrt(l2) / std::sqrt(chi[j]);
  }
  return d;
}

}  // namespace

TEST_CASE("pg_mean values and limits") {
  CHECK(pg_mean(1, 0.0) == Approx(0.25));
  CHECK(pg_mean(1, 2.0) == Approx(std::tanh(1.0) / 4.0).epsilon(1e-12));
  CHECK(pg_mean(1, 2.0) == Approx(0.190399).margin(5e-7));
  CHECK(pg_mean(4, 0.0) == Approx(1.0));
  CHECK(pg_mean(4, 1e-9) == Approx(1.0).margin(1e-12));
}

TEST_CASE("pg_mean is strictly decreasing and bounded in (0, m/4]") {
  double prev = pg_mean(3, 0.0);
  CHECK(prev == Approx(0.75));
  for (double c = 1e-5; c < 50.0; c *= 1.7) {
    const double v = pg_mean(3, c);
    CHECK(v > 0.0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("covariance/mean update on the scalar instance") {
  Eigen::MatrixXd x(1, 1);
  x << 1;
  Eigen::VectorXd y(1), m(1);
  y << 0;
  m << 1;
  Dataset d = Dataset::from_parts(x, y, m);
  Eigen::VectorXd pen(1), c(1), chi(1);
  pen << 1.0;
  c << 0.7;
  chi << 0.9;
  const double l1 = 2.0, l2 = 1.5;
  auto cm = update_covariance_mean(d, pen, l1, l2, c, chi, CovMode::kDense);
  const double omega = pg_mean(1, 0.7);
  const double expect = 1.0 / (omega + l2 + 0.5 * l1 * std::sqrt(l2) / std::sqrt(0.9));
  CHECK(cm.sigma.diagonal()[0] == Approx(expect).epsilon(1e-12));
  CHECK(cm.mu[0] == Approx(-expect / 2.0).epsilon(1e-12));
}

TEST_CASE("zero-data limit gives the pure-prior covariance") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  Eigen::VectorXd y(3), m(3);
  y << 1, 0, 1;
  m.setOnes();
  Dataset d = Dataset::from_parts(x, y, m);
  Eigen::VectorXd pen(2), chi(2);
  pen << 1.0, 2.0;
  chi << 0.5, 1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
  const double l1 = 1.0, l2 = 2.0;
  for (CovMode mode : {CovMode::kDense, CovMode::kFactored}) {
    auto cm = update_covariance_mean(d, pen, l1, l2, c, chi, mode);
    const Eigen::VectorXd dprec = prior_precision(pen, l1, l2, chi);
    for (int j = 0; j < 2; ++j) {
      CHECK(cm.sigma.diagonal()[j] == Approx(1.0 / dprec[j]).epsilon(1e-12));
    }
    CHECK(cm.mu.cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("factored and dense paths agree on a p > n instance") {
  Dataset d = oracle::random_instance(8, 20, 3, 42);
  RngStream rng(43, "state");
  Eigen::VectorXd pen(20), chi(20), c(8);
  for (int j = 0; j < 20; ++j) {
    pen[j] = 0.5 + rng.uniform();
    chi[j] = 0.2 + rng.uniform();
  }
  for (int i = 0; i < 8; ++i) c[i] = 2.0 * rng.uniform();
  auto cf = update_covariance_mean(d, pen, 1.7, 0.8, c, chi, CovMode::kFactored);
  auto cd = update_covariance_mean(d, pen, 1.7, 0.8, c, chi, CovMode::kDense);
  CHECK(cf.sigma.factored());
  CHECK_FALSE(cd.sigma.factored());
  CHECK((cf.sigma.dense(d) - cd.sigma.dense(d)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cf.mu - cd.mu).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cf.sigma.diagonal() - cd.sigma.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cf.sigma.quad_form_rows(d) - cd.sigma.quad_form_rows(d)).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("factored and dense paths agree across u and sizes") {
  int instance = 0;
  for (int u : {0, 1, 3}) {
    for (int t = 0; t < 8; ++t) {
      const int n = 5 + static_cast<int>(7.0 * t / 7);
      const int p = 4 + 5 * t % 37 + 3;
      Dataset d = oracle::random_instance(n, p, u, 900 + instance++);
      RngStream rng(700 + instance, "state2");
      Eigen::VectorXd pen(p), chi(p), c(n);
      for (int j = 0; j < p; ++j) {
        pen[j] = std::exp(0.5 * rng.normal());
        chi[j] = 0.05 + rng.uniform();
      }
      for (int i = 0; i < n; ++i) c[i] = 3.0 * rng.uniform();
      auto cf = update_covariance_mean(d, pen, 1.2, 2.0, c, chi, CovMode::kFactored);
      auto cd = update_covariance_mean(d, pen, 1.2, 2.0, c, chi, CovMode::kDense);
      REQUIRE((cf.sigma.dense(d) - cd.sigma.dense(d)).cwiseAbs().maxCoeff() < 1e-10);
      REQUIRE((cf.mu - cd.mu).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("update_c from identity, degenerate and random covariances") {
  SECTION("identity covariance, unit row") {
    Eigen::MatrixXd x(1, 2);
    x << 1, 0;
    Eigen::VectorXd y(1), m(1);
    y << 0;
    m << 1;
    Dataset d = Dataset::from_parts(x, y, m);
    PosteriorCov sigma = PosteriorCov::from_dense(Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd c = update_c(d, sigma, mu);
    CHECK(c[0] == Approx(1.0));
  }
  SECTION("zero covariance reduces to the absolute linear predictor") {
    Eigen::MatrixXd x(1, 2);
    x << 1, 1;
    Eigen::VectorXd y(1), m(1);
    y << 0;
    m << 1;
    Dataset d = Dataset::from_parts(x, y, m);
    PosteriorCov sigma = PosteriorCov::from_dense(Eigen::MatrixXd::Zero(2, 2));
    Eigen::VectorXd mu(2);
    mu << -1.0, -2.0;  // x'mu = -3
    Eigen::VectorXd c = update_c(d, sigma, mu);
    CHECK(c[0] == Approx(3.0));
  }
  SECTION("random SPD covariance matches the dense quadratic form") {
    RngStream rng(77, "spd");
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
    }
    Eigen::MatrixXd spd = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd x(2, 3);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    }
    Eigen::VectorXd y(2), m(2);
    y << 0, 1;
    m << 1, 1;
    Dataset d = Dataset::from_parts(x, y, m);
    Eigen::VectorXd mu(3);
    mu << 0.3, -0.2, 0.5;
    PosteriorCov sigma = PosteriorCov::from_dense(spd);
    Eigen::VectorXd c = update_c(d, sigma, mu);
    for (int i = 0; i < 2; ++i) {
      const Eigen::VectorXd xi = x.row(i);
      const double expect = std::sqrt(xi.dot(spd * xi) + std::pow(xi.dot(mu), 2));
      CHECK(c[i] == Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("update_chi formula cases") {
  SECTION("direct formula") {
    Eigen::VectorXd pen(1);
    pen << 1.0;
    Eigen::MatrixXd sig(1, 1);
    sig << 0.5;
    Eigen::VectorXd mu(1);
    mu << 1.0;
    Eigen::VectorXd chi = update_chi(pen, 2.0, PosteriorCov::from_dense(sig), mu);
    CHECK(chi[0] == Approx(3.0));
  }
  SECTION("normalization case") {
    Eigen::VectorXd pen(1);
    pen << 1.0;
    const double l2 = 4.0;
    Eigen::MatrixXd sig(1, 1);
    sig << 1.0 / l2;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd chi = update_chi(pen, l2, PosteriorCov::from_dense(sig), mu);
    CHECK(chi[0] == Approx(1.0));
  }
  SECTION("multiplicative two-partition multiplier") {
    Eigen::VectorXd pen(1);
    pen << 0.25;  // product of the two group multipliers
    Eigen::MatrixXd sig(1, 1);
    sig << 1.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd chi = update_chi(pen, 4.0, PosteriorCov::from_dense(sig), mu);
    CHECK(chi[0] == Approx(1.0));
  }
}

TEST_CASE("heavy shrinkage forces the posterior mean toward zero") {
  RngStream rng(21, "shrink");
  Eigen::MatrixXd x(20, 1);
  for (int i = 0; i < 20; ++i) x(i, 0) = rng.normal();
  auto [xs, info] = standardize(x);
  Eigen::VectorXd y(20), m(20);
  m.setOnes();
  for (int i = 0; i < 20; ++i) y[i] = i % 2;
  Dataset d = Dataset::from_parts(xs, y, m);
  PartitionSet parts = PartitionSet::single_group(1);
  PenaltyConfig config = PenaltyConfig::make(0.5, 1e4, parts);
  VariationalState st = run_vb(d, parts, config);
  CHECK(st.converged);
  CHECK(std::abs(st.mu[0]) < 0.01);
}

TEST_CASE("posterior mean signs and ranking match the exact-posterior oracle") {
  // Two seeded instances here; the acceptance suite runs the full batch.
  for (std::uint64_t seed : {501, 502}) {
    RngStream rng(seed, "quadcheck");
    const int n = 20;
    Eigen::MatrixXd xraw(n, 2);
    for (int i = 0; i < n; ++i) {
      xraw(i, 0) = rng.normal();
      xraw(i, 1) = rng.normal();
    }
    auto [x, info] = standardize(xraw);
    Eigen::Vector2d beta;
    beta << (rng.uniform() < 0.5 ? -1 : 1) * (0.8 + rng.uniform()),
        (rng.uniform() < 0.5 ? -1 : 1) * (0.4 + 0.6 * rng.uniform());
    Eigen::VectorXd y(n), m(n);
    m.setOnes();
    for (int i = 0; i < n; ++i) y[i] = rng.bernoulli(expit(x.row(i).dot(beta))) ? 1 : 0;
    if (y.sum() == 0 || y.sum() == n) continue;
    Dataset d = Dataset::from_parts(x, y, m);
    const auto pair = reparametrize(0.5, 4.0);
    VbOptions opts;
    opts.tol = 1e-9;
    opts.max_iter = 2000;
    VariationalState st =
        run_vb(d, Eigen::VectorXd::Ones(2), pair.lambda1, pair.lambda2, {}, opts);
    Eigen::Vector2d exact = oracle::posterior_mean_2d(x, y, m, pair.lambda1, pair.lambda2,
                                                      Eigen::Vector2d::Ones());
    CHECK((st.mu[0] > 0) == (exact[0] > 0));
    CHECK((st.mu[1] > 0) == (exact[1] > 0));
    CHECK((st.mu[0] > st.mu[1]) == (exact[0] > exact[1]));
  }
}

TEST_CASE("a converged state fed back as init returns within one iteration") {
  Dataset d = oracle::random_instance(15, 4, 1, 77);
  PartitionSet parts = PartitionSet::single_group(4);
  PenaltyConfig config = PenaltyConfig::make(0.4, 3.0, parts);
  VbOptions opts;
  opts.tol = 1e-8;
  opts.max_iter = 3000;
  VariationalState st = run_vb(d, parts, config, {}, opts);
  REQUIRE(st.converged);
  VariationalState again = run_vb(d, parts, config, st, opts);
  CHECK(again.converged);
  CHECK(again.iteration_count == 1);
}

TEST_CASE("fixed point re-satisfies the update equations and the precision identity") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const int n = 12 + static_cast<int>(seed) * 3;
    const int p = 3 + static_cast<int>(seed);
    const int u = static_cast<int>(seed) % 2;
    Dataset d = oracle::random_instance(n, p, u, 3000 + seed);
    PartitionSet parts = PartitionSet::single_group(p);
    PenaltyConfig config = PenaltyConfig::make(0.35, 2.5, parts);
    VbOptions opts;
    opts.tol = 1e-9;
    opts.max_iter = 5000;
    VariationalState st = run_vb(d, parts, config, {}, opts);
    REQUIRE(st.converged);

    const Eigen::VectorXd pen = expand_multipliers(parts, config);
    auto cm = update_covariance_mean(d, pen, config.lambda1, config.lambda2, st.c, st.chi,
                                     opts.mode);
    Eigen::VectorXd c = update_c(d, cm.sigma, cm.mu);
    Eigen::VectorXd chi = update_chi(pen, config.lambda2, cm.sigma, cm.mu);
    const auto rel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      double worst = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
      }
      return worst;
    };
    CHECK(rel(cm.mu, st.mu) < 1e-6);
    CHECK(rel(c, st.c) < 1e-6);
    CHECK(rel(chi, st.chi) < 1e-6);

    // Precision identity over the penalized diagonal.
    Eigen::MatrixXd sigma = st.sigma.dense(d);
    Eigen::MatrixXd prec = sigma.llt().solve(Eigen::MatrixXd::Identity(u + p, u + p));
    Eigen::VectorXd omega(n);
    for (int i = 0; i < n; ++i) omega[i] = pg_mean(d.trials[i], st.c[i]);
    Eigen::MatrixXd xall(n, u + p);
    if (u > 0) xall.leftCols(u) = d.unpenalized;
    xall.rightCols(p) = d.features;
    Eigen::MatrixXd fisher = xall.transpose() * omega.asDiagonal() * xall;
    for (int j = 0; j < p; ++j) {
      const double expected =
          pen[j] * config.lambda2 +
          pen[j] * 0.5 * config.lambda1 * std::sqrt(config.lambda2) / std::sqrt(st.chi[j]);
      CHECK(prec(u + j, u + j) - fisher(u + j, u + j) ==
            Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("raising every multiplier does not increase the scalar posterior mean") {
  RngStream rng(31, "mono");
  Eigen::MatrixXd x(25, 1);
  for (int i = 0; i < 25; ++i) x(i, 0) = rng.normal();
  auto [xs, info] = standardize(x);
  Eigen::VectorXd y(25), m(25);
  m.setOnes();
  for (int i = 0; i < 25; ++i) y[i] = rng.bernoulli(expit(1.2 * xs(i, 0))) ? 1 : 0;
  Dataset d = Dataset::from_parts(xs, y, m);
  const auto pair = reparametrize(0.5, 2.0);
  VbOptions opts;
  opts.tol = 1e-10;
  opts.max_iter = 5000;
  double prev = std::numeric_limits<double>::infinity();
  for (double mult : {1.0, 2.0, 5.0, 20.0}) {
    Eigen::VectorXd pen = Eigen::VectorXd::Constant(1, mult);
    VariationalState st = run_vb(d, pen, pair.lambda1, pair.lambda2, {}, opts);
    CHECK(std::abs(st.mu[0]) <= prev + 1e-12);
    prev = std::abs(st.mu[0]);
  }
}

TEST_CASE("non-finite guard raises a numerical error with iteration context") {
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  Eigen::VectorXd y(2), m(2);
  y << 1, 0;
  m.setOnes();
  Dataset d = Dataset::from_parts(x, y, m);
  Eigen::VectorXd pen(1), c(2), chi(1);
  pen << 1.0;
  c << 0.0, 0.0;
  chi << 0.0;  // invalid mixing parameter: infinite prior precision
  CHECK_THROWS_AS(update_covariance_mean(d, pen, 1.0, 1.0, c, chi), numerical_error);
}

TEST_CASE("predict_probability on raw inputs") {
  Coefficients coef;
  coef.unpenalized_part = Eigen::VectorXd::Zero(1);
  coef.penalized_part = Eigen::VectorXd::Zero(3);
  coef.scale.mean = Eigen::VectorXd::Zero(3);
  coef.scale.scale = Eigen::VectorXd::Ones(3);

  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  SECTION("null model predicts one half") {
    Eigen::VectorXd prob = predict_probability(coef, x);
    for (int i = 0; i < 5; ++i) CHECK(prob[i] == Approx(0.5));
  }
  SECTION("saturated predictor") {
    coef.penalized_part << 10.0, 0.0, 0.0;
    Eigen::MatrixXd one = Eigen::MatrixXd::Zero(1, 3);
    one(0, 0) = 1.0;
    CHECK(predict_probability(coef, one)[0] > 0.9999);
  }
  SECTION("logit arithmetic") {
    coef.penalized_part << std::log(3.0), 0.0, 0.0;
    Eigen::MatrixXd one = Eigen::MatrixXd::Zero(1, 3);
    one(0, 0) = 1.0;
    CHECK(predict_probability(coef, one)[0] == Approx(0.75));
  }
  SECTION("dimension mismatch is rejected") {
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(predict_probability(coef, bad), validation_error);
  }
}
