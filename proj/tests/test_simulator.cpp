#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "groupenet/simulate.hpp"
#include "oracles.hpp"

using namespace groupenet;
using Catch::Approx;

TEST_CASE("truncated gamma draws stay strictly above one") {
  RngStream rng(1, "tg");
  for (double theta : {0.01, 0.08, 1.0, 50.0}) {
    for (int t = 0; t < 2000; ++t) {
      CHECK(sample_truncated_gamma(theta, rng) > 1.0);
    }
  }
}

TEST_CASE("truncated gamma mean matches quadrature at the scenario scale") {
  // theta = 8 lambda2 / lambda1^2 with lambda1 = 50, lambda2 = 25.
  const double theta = 0.08;
  RngStream rng(2, "tg-mean");
  const int draws = 100000;
  double sum = 0.0;
  for (int t = 0; t < draws; ++t) sum += sample_truncated_gamma(theta, rng);
  const double exact = oracle::tg_mean(theta);
  CHECK(std::abs(sum / draws - exact) / exact < 0.01);
}

TEST_CASE("truncated gamma empirical CDF matches quadrature in the weak-truncation regime") {
  const double theta = 50.0;
  RngStream rng(3, "tg-ks");
  const int draws = 100000;
  std::vector<double> sample(draws);
  for (int t = 0; t < draws; ++t) sample[t] = sample_truncated_gamma(theta, rng);
  std::sort(sample.begin(), sample.end());
  double ks = 0.0;
  for (int q = 1; q < 40; ++q) {
    const double x = sample[static_cast<std::size_t>(draws * q / 40)];
    const double empirical = static_cast<double>(q) / 40.0;
    ks = std::max(ks, std::abs(empirical - oracle::tg_cdf(theta, x)));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("elastic net prior draws match the quadrature variance") {
  const double alpha = 0.5, lambda = 100.0;
  for (double mult : {1.0, 0.14}) {
    RngStream rng(4, "en-var");
    const int draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    Eigen::VectorXd b = sample_en_prior_betas(draws, alpha, lambda, mult, rng);
    for (int t = 0; t < draws; ++t) {
      sum += b[t];
      sum2 += b[t] * b[t];
    }
    const double mean = sum / draws;
    const double var = sum2 / draws - mean * mean;
    const double exact = oracle::en_prior_variance(alpha, lambda, mult);
    CHECK(std::abs(var - exact) / exact < 0.02);
    // symmetry: mean within 3 standard errors of zero
    CHECK(std::abs(mean) < 3.0 * std::sqrt(var / draws));
  }
}

TEST_CASE("a huge multiplier collapses the prior spread") {
  RngStream rng1(5, "en-big");
  RngStream rng2(5, "en-big");
  Eigen::VectorXd wide = sample_en_prior_betas(20000, 0.5, 100.0, 1.0, rng1);
  Eigen::VectorXd narrow = sample_en_prior_betas(20000, 0.5, 100.0, 1e6, rng2);
  const double sd_wide = std::sqrt(wide.squaredNorm() / wide.size());
  const double sd_narrow = std::sqrt(narrow.squaredNorm() / narrow.size());
  CHECK(sd_narrow < 1e-2 * sd_wide);
}

TEST_CASE("scenario generation enforces its invariants") {
  SimScenario sc;
  sc.n = 30;
  sc.n_test = 20;
  sc.p = 100;
  sc.block_size = 25;
  sc.group_sizes = {25, 25, 25, 25};
  sc.seed = 9;
  SimData sim = simulate_scenario(sc);

  SECTION("zeroing counts are exact and keep the largest entries") {
    int zeros = 0;
    for (int g = 0; g < 4; ++g) {
      const auto seg = sim.beta_true.segment(25 * g, 25);
      double max_zeroed = 0.0, min_kept = 1e300;
      int group_zeros = 0;
      for (int j = 0; j < 25; ++j) {
        if (seg[j] == 0.0) {
          ++group_zeros;
        } else {
          min_kept = std::min(min_kept, std::abs(seg[j]));
        }
      }
      zeros += group_zeros;
      CHECK(group_zeros == 13);  // ceil(0.5 * 25)
      CHECK(max_zeroed <= min_kept);
    }
    CHECK(zeros == 52);
  }
  SECTION("train and test share dimensions and the coefficient vector") {
    CHECK(sim.train.n() == 30);
    CHECK(sim.test.n() == 20);
    CHECK(sim.train.p() == 100);
    CHECK(sim.beta_true.size() == 100);
  }
  SECTION("identical seeds reproduce the dataset bit for bit") {
    SimData again = simulate_scenario(sc);
    CHECK(again.train.features == sim.train.features);
    CHECK(again.train.successes == sim.train.successes);
    CHECK(again.test.features == sim.test.features);
    CHECK(again.beta_true == sim.beta_true);
  }
  SECTION("paper defaults split the coefficients 500/500") {
    SimScenario full;  // paper-scale defaults
    full.seed = 12;
    SimData big = simulate_scenario(full);
    const int zeros = static_cast<int>((big.beta_true.array() == 0.0).count());
    CHECK(zeros == 500);
    CHECK(big.beta_true.size() - zeros == 500);
  }
}

TEST_CASE("block covariance produces the specified correlations") {
  SimScenario sc;
  sc.n = 10000;
  sc.n_test = 2;
  sc.p = 50;
  sc.block_size = 25;
  sc.rho = 0.7;
  sc.group_sizes = {25, 25};
  sc.true_multipliers = {1.0, 1.0};
  sc.zero_fraction = {0.5, 0.5};
  sc.seed = 31;
  SimData sim = simulate_scenario(sc);
  const Eigen::MatrixXd x = sim.train.raw_features();
  const auto corr = [&](int a, int b) {
    const auto ca = x.col(a).array() - x.col(a).mean();
    const auto cb = x.col(b).array() - x.col(b).mean();
    return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
  };
  CHECK(std::abs(corr(0, 1) - 0.7) < 0.05);
  CHECK(std::abs(corr(3, 17) - 0.7) < 0.05);
  CHECK(std::abs(corr(0, 25)) < 0.05);

  SECTION("zero correlation gives independent features") {
    sc.rho = 0.0;
    sc.seed = 32;
    SimData indep = simulate_scenario(sc);
    const Eigen::MatrixXd xi = indep.train.raw_features();
    const auto corr2 = [&](int a, int b) {
      const auto ca = xi.col(a).array() - xi.col(a).mean();
      const auto cb = xi.col(b).array() - xi.col(b).mean();
      return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
    };
    CHECK(std::abs(corr2(0, 1)) < 0.05);
    CHECK(std::abs(corr2(5, 20)) < 0.05);
  }
}

TEST_CASE("scenario validation rejects inconsistent settings") {
  SimScenario sc;
  sc.p = 99;  // not divisible by 25
  CHECK_THROWS_AS(sc.validate(), validation_error);
  sc.p = 1000;
  sc.group_sizes = {400, 400};  // does not sum to p
  CHECK_THROWS_AS(sc.validate(), validation_error);
  sc.group_sizes = {500, 500};
  sc.true_multipliers = {1.0};  // count mismatch
  CHECK_THROWS_AS(sc.validate(), validation_error);
  sc.true_multipliers = {1.0, 2.0};
  sc.zero_fraction = {0.5, 0.5};
  sc.rho = 1.0;
  CHECK_THROWS_AS(sc.validate(), validation_error);
  sc.rho = 0.7;
  sc.validate();
}

TEST_CASE("random group experiment is deterministic and respects degeneracy") {
  SimScenario sc;
  sc.n = 40;
  sc.n_test = 2;
  sc.p = 30;
  sc.block_size = 1;
  sc.rho = 0.0;
  sc.group_sizes = {30};
  sc.true_multipliers = {1.0};
  sc.zero_fraction = {0.5};
  sc.seed = 21;
  SimData sim = simulate_scenario(sc);

  SECTION("single group forces the multiplier to one") {
    RandomGroupResult res =
        random_group_experiment(sim.train, {30}, 1, 5, 0.5, 2.0);
    CHECK(res.multipliers(0, 0) == 1.0);
    CHECK(res.errors[0].empty());
  }
  SECTION("same seed gives identical assignments and estimates") {
    RandomGroupResult a = random_group_experiment(sim.train, {10, 20}, 2, 5, 0.5, 2.0);
    RandomGroupResult b = random_group_experiment(sim.train, {10, 20}, 2, 5, 0.5, 2.0);
    CHECK(a.multipliers == b.multipliers);
  }
  SECTION("group sizes must sum to p") {
    CHECK_THROWS_AS(random_group_experiment(sim.train, {10, 10}, 1, 5, 0.5, 2.0),
                    validation_error);
  }
}
