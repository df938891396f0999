#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "groupenet/data.hpp"
#include "groupenet/partition.hpp"
#include "groupenet/penalty.hpp"
#include "groupenet/rng.hpp"

using namespace groupenet;
using Catch::Approx;

TEST_CASE("standardize centers and scales with the 1/n convention") {
  Eigen::MatrixXd col(3, 1);
  col << 1, 2, 3;
  auto [out, info] = standardize(col);
  const double v = std::sqrt(1.5);
  CHECK(out(0, 0) == Approx(-v).margin(1e-12));
  CHECK(out(1, 0) == Approx(0.0).margin(1e-12));
  CHECK(out(2, 0) == Approx(v).margin(1e-12));
  CHECK(info.mean[0] == Approx(2.0));
  CHECK(info.scale[0] == Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("standardize leaves an already standardized column unchanged") {
  Eigen::MatrixXd col(2, 1);
  col << -1, 1;
  auto [out, info] = standardize(col);
  CHECK(out(0, 0) == Approx(-1.0).margin(1e-14));
  CHECK(out(1, 0) == Approx(1.0).margin(1e-14));
}

TEST_CASE("standardize rejects a constant column by name") {
  Eigen::MatrixXd col(3, 1);
  col << 5, 5, 5;
  std::vector<std::string> names{"gene7"};
  CHECK_THROWS_WITH(standardize(col, &names),
                    Catch::Matchers::ContainsSubstring("constant column") &&
                        Catch::Matchers::ContainsSubstring("gene7"));
}

TEST_CASE("standardize is idempotent") {
  RngStream rng(3, "std");
  Eigen::MatrixXd x(17, 5);
  for (int i = 0; i < 17; ++i) {
    for (int j = 0; j < 5; ++j) x(i, j) = 2.0 * rng.normal() + j;
  }
  auto [once, info1] = standardize(x);
  auto [twice, info2] = standardize(once);
  CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::Index n = once.rows();
  for (int j = 0; j < 5; ++j) {
    CHECK(std::abs(once.col(j).mean()) < 1e-10);
    CHECK(std::abs(once.col(j).squaredNorm() / double(n) - 1.0) < 1e-10);
  }
}

TEST_CASE("reparametrize maps and round-trips") {
  auto p = reparametrize(0.5, 100.0);
  CHECK(p.lambda1 == Approx(50.0));
  CHECK(p.lambda2 == Approx(25.0));
  CHECK(2.0 * p.lambda2 + p.lambda1 == Approx(100.0));

  auto q = reparametrize(1e-6, 1.0);
  CHECK(q.lambda1 == Approx(1e-6));
  CHECK(q.lambda2 == Approx(0.5).epsilon(1e-5));

  auto r = reparametrize(0.95, 10.0);
  CHECK(r.lambda1 == Approx(9.5));
  CHECK(r.lambda2 == Approx(0.25));

  RngStream rng(11, "reparam");
  for (int t = 0; t < 200; ++t) {
    const double alpha = 0.001 + 0.998 * rng.uniform();
    const double lambda = std::exp(6.0 * rng.normal());
    auto pair = reparametrize(alpha, lambda);
    auto [a, l] = reparametrize_inverse(pair.lambda1, pair.lambda2);
    CHECK(std::abs(a - alpha) < 1e-12 * (1.0 + alpha));
    CHECK(std::abs(l - lambda) < 1e-12 * (1.0 + lambda));
  }
}

TEST_CASE("reparametrize validates its domain") {
  CHECK_THROWS_AS(reparametrize(0.0, 1.0), validation_error);
  CHECK_THROWS_AS(reparametrize(1.0, 1.0), validation_error);
  CHECK_THROWS_AS(reparametrize(0.5, 0.0), validation_error);
  CHECK_THROWS_AS(reparametrize(0.5, -2.0), validation_error);
}

TEST_CASE("expand_multipliers combines partitions multiplicatively") {
  SECTION("identity multipliers give ones") {
    PartitionSet parts = PartitionSet::of(Partition::contiguous({2, 2}));
    PenaltyConfig config = PenaltyConfig::make(0.5, 1.0, parts);
    Eigen::VectorXd v = expand_multipliers(parts, config);
    CHECK(v.size() == 4);
    CHECK((v.array() == 1.0).all());
  }
  SECTION("two partitions multiply and can cancel") {
    PartitionSet parts;
    parts.partitions.push_back(Partition::contiguous({2, 2}, "a"));
    parts.partitions.push_back(Partition::single_group(4, "all"));
    PenaltyConfig config = PenaltyConfig::make(0.5, 1.0, parts);
    config.multipliers[0] = {2.0, 0.5};
    config.multipliers[1] = {1.0};
    Eigen::VectorXd v = expand_multipliers(parts, config);
    CHECK(v[0] == Approx(2.0));
    CHECK(v[1] == Approx(2.0));
    CHECK(v[2] == Approx(0.5));
    CHECK(v[3] == Approx(0.5));

    config.multipliers[0] = {2.0, 2.0};  // expansion itself is calibration-agnostic
    config.multipliers[1] = {0.5};
    Eigen::VectorXd w = expand_multipliers(parts, config);
    CHECK(w[0] == Approx(1.0));
  }
  SECTION("calibrated partitions give an expanded geometric mean of one") {
    RngStream rng(5, "expand");
    for (int t = 0; t < 30; ++t) {
      const int p = 12;
      PartitionSet parts;
      parts.partitions.push_back(Partition::contiguous({3, 4, 5}, "a"));
      Partition b = Partition::contiguous({6, 6}, "b");
      rng.shuffle(b.assignment);
      parts.partitions.push_back(std::move(b));
      PenaltyConfig config = PenaltyConfig::make(0.5, 1.0, parts);
      for (std::size_t k = 0; k < 2; ++k) {
        auto sizes = parts.partitions[k].group_sizes();
        double logsum = 0.0;
        for (std::size_t g = 0; g + 1 < config.multipliers[k].size(); ++g) {
          config.multipliers[k][g] = std::exp(rng.normal());
          logsum += sizes[g] * std::log(config.multipliers[k][g]);
        }
        config.multipliers[k].back() = std::exp(-logsum / sizes.back());
      }
      config.check(parts);
      Eigen::VectorXd v = expand_multipliers(parts, config);
      double logsum = 0.0;
      for (int j = 0; j < p; ++j) logsum += std::log(v[j]);
      CHECK(std::abs(logsum) < 1e-8);
    }
  }
  SECTION("mismatched multiplier counts are rejected") {
    PartitionSet parts = PartitionSet::of(Partition::contiguous({2, 2}));
    PenaltyConfig config = PenaltyConfig::make(0.5, 1.0, parts);
    config.multipliers[0] = {1.0};
    CHECK_THROWS_AS(expand_multipliers(parts, config), validation_error);
  }
}

TEST_CASE("dataset validation enforces the documented invariants") {
  RngStream rng(9, "data");
  Eigen::MatrixXd x(6, 3);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
  }
  Eigen::VectorXd y(6), m(6);
  y << 0, 1, 2, 0, 1, 1;
  m << 1, 1, 2, 1, 3, 1;

  SECTION("accepts valid data and standardizes") {
    Dataset d = Dataset::standardized(x, y, m);
    CHECK(d.n() == 6);
    CHECK(d.p() == 3);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(d.features.col(j).mean()) < 1e-10);
      CHECK(std::abs(d.features.col(j).squaredNorm() / 6.0 - 1.0) < 1e-10);
    }
  }
  SECTION("rejects y above m") {
    Eigen::VectorXd bad = y;
    bad[0] = 2;
    CHECK_THROWS_AS(Dataset::standardized(x, bad, m), validation_error);
  }
  SECTION("rejects non-integer trials") {
    Eigen::VectorXd bad = m;
    bad[2] = 1.5;
    CHECK_THROWS_AS(Dataset::standardized(x, y, bad), validation_error);
  }
  SECTION("rejects duplicate feature names") {
    CHECK_THROWS_AS(Dataset::standardized(x, y, m, {}, {"a", "a", "b"}), validation_error);
  }
  SECTION("rejects a single observation") {
    CHECK_THROWS_AS(Dataset::standardized(x.topRows(1), y.head(1), m.head(1)),
                    validation_error);
  }
  SECTION("raw features round-trip the standardization") {
    Dataset d = Dataset::standardized(x, y, m);
    CHECK((d.raw_features() - x).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("partition validation") {
  Partition part = Partition::contiguous({2, 3}, "demo");
  part.validate(5);
  SECTION("rejects uncovered features") {
    CHECK_THROWS_AS(part.validate(6), validation_error);
  }
  SECTION("rejects empty groups") {
    Partition bad = part;
    for (int& g : bad.assignment) g = 0;
    CHECK_THROWS_AS(bad.validate(5), validation_error);
  }
  SECTION("monotone order must be a permutation") {
    Partition mono = part;
    mono.monotone_order = std::vector<int>{0, 0};
    CHECK_THROWS_AS(mono.validate(5), validation_error);
    mono.monotone_order = std::vector<int>{1, 0};
    mono.validate(5);
  }
}

TEST_CASE("penalty config calibration check") {
  PartitionSet parts = PartitionSet::of(Partition::contiguous({10, 10}));
  PenaltyConfig config = PenaltyConfig::make(0.5, 2.0, parts);
  config.check(parts);
  config.multipliers[0] = {2.0, 0.5};
  config.check(parts);  // geometric mean one with equal sizes
  config.multipliers[0] = {2.0, 0.6};
  CHECK_THROWS_AS(config.check(parts), validation_error);
}
