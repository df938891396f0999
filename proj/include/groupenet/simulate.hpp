#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "groupenet/data.hpp"
#include "groupenet/em.hpp"
#include "groupenet/errors.hpp"
#include "groupenet/parallel.hpp"
#include "groupenet/partition.hpp"
#include "groupenet/penalty.hpp"
#include "groupenet/rng.hpp"

namespace groupenet {

namespace detail {

inline constexpr double kSqrtPi = 1.7724538509055160272981674833411;

// log(erfc(t)) for t >= 0, switching to the asymptotic expansion where erfc
// underflows.
inline double log_erfc(double t) {
  if (t < 20.0) return std::log(std::erfc(t));
  const double t2 = t * t;
  const double series =
      1.0 - 0.5 / t2 + 0.75 / (t2 * t2) - 1.875 / (t2 * t2 * t2);
  return -t2 - std::log(t * kSqrtPi) + std::log(series);
}

// Scaled complement e^{t^2} erfc(t), stable for large t.
inline double erfcx(double t) {
  if (t < 20.0) return std::exp(t * t + std::log(std::erfc(t)));
  const double t2 = t * t;
  const double series =
      1.0 - 0.5 / t2 + 0.75 / (t2 * t2) - 1.875 / (t2 * t2 * t2);
  return series / (t * kSqrtPi);
}

// Solves log(erfc(t)) = target for t >= t_lo (target <= log_erfc(t_lo)),
// Newton steps safeguarded by a bisection bracket.
inline double inv_log_erfc(double target, double t_lo) {
  double lo = t_lo;
  double hi = t_lo + 1.0;
  while (log_erfc(hi) > target) {
    lo = hi;
    hi = 2.0 * hi + 1.0;
    if (hi > 1e6) throw numerical_error("inv_log_erfc: bracket search failed");
  }
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 100; ++iter) {
    const double fval = log_erfc(t) - target;
    if (fval > 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    // d/dt log erfc(t) = -2 / (sqrt(pi) erfcx(t))
    const double deriv = -2.0 / (kSqrtPi * erfcx(t));
    double next = t - fval / deriv;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) < 1e-15 * (1.0 + t)) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

}  // namespace detail

// Draws from the Gamma(shape 1/2, scale theta) density restricted to
// (1, inf), by inverting the truncated CDF. With shape 1/2 the gamma CDF is
// erf(sqrt(x / theta)), so the inverse reduces to an erfc inversion carried
// out in log space (stable however far the truncation sits in the tail).
// Every draw is strictly greater than one.
inline double sample_truncated_gamma(double theta, RngStream& rng) {
  if (!(theta > 0.0)) {
    throw validation_error("sample_truncated_gamma: scale must be positive");
  }
  const double t0 = std::sqrt(1.0 / theta);
  const double s = rng.uniform_open();  // survival fraction in (0, 1)
  const double target = std::log(s) + detail::log_erfc(t0);
  const double t = detail::inv_log_erfc(target, t0);
  return theta * t * t;
}

// Draws from the generalized elastic net prior through its scale-mixture
// representation: tau from the truncated gamma with theta = 8 lambda2 /
// lambda1^2, then a zero-mean normal with variance
// (1 / (mult lambda2)) (tau - 1) / tau.
inline Eigen::VectorXd sample_en_prior_betas(int count, double alpha, double lambda,
                                             double multiplier, RngStream& rng) {
  if (count < 1) throw validation_error("sample_en_prior_betas: count must be positive");
  if (!(multiplier > 0.0)) {
    throw validation_error("sample_en_prior_betas: multiplier must be positive");
  }
  const PenaltyPair pair = reparametrize(alpha, lambda);
  const double theta = 8.0 * pair.lambda2 / (pair.lambda1 * pair.lambda1);
  Eigen::VectorXd betas(count);
  for (int i = 0; i < count; ++i) {
    const double tau = sample_truncated_gamma(theta, rng);
    const double variance = (tau - 1.0) / (tau * multiplier * pair.lambda2);
    betas[i] = std::sqrt(variance) * rng.normal();
  }
  return betas;
}

// Synthetic scenario: block-correlated Gaussian features, coefficients drawn
// from the elastic net prior in signal groups with the smallest entries
// zeroed, Bernoulli outcomes.
struct SimScenario {
  int n = 100;
  int n_test = 1000;
  int p = 1000;
  int block_size = 25;
  double rho = 0.7;
  double sigma2 = 1.0;
  std::vector<int> group_sizes = {250, 250, 250, 250};
  std::vector<double> true_multipliers = {0.14, 0.51, 1.95, 7.39};
  std::vector<double> zero_fraction = {0.5, 0.5, 0.5, 0.5};
  double prior_alpha = 0.5;
  double prior_lambda = 100.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 2 || n_test < 1 || p < 1) {
      throw validation_error("scenario: n, n_test and p must be positive (n >= 2)");
    }
    if (block_size < 1 || p % block_size != 0) {
      throw validation_error("scenario: p must be divisible by the block size");
    }
    if (!(rho >= 0.0 && rho < 1.0)) {
      throw validation_error("scenario: rho must lie in [0, 1)");
    }
    if (!(sigma2 > 0.0) || !(sigma2 > rho)) {
      throw validation_error("scenario: need sigma2 > rho for positive-definite blocks");
    }
    if (group_sizes.empty() ||
        std::accumulate(group_sizes.begin(), group_sizes.end(), 0) != p) {
      throw validation_error("scenario: group sizes must sum to p");
    }
    if (true_multipliers.size() != group_sizes.size() ||
        zero_fraction.size() != group_sizes.size()) {
      throw validation_error("scenario: per-group settings must match the group count");
    }
    for (double v : true_multipliers) {
      if (!(v > 0.0)) throw validation_error("scenario: multipliers must be positive");
    }
    for (double z : zero_fraction) {
      if (!(z >= 0.0 && z <= 1.0)) {
        throw validation_error("scenario: zero fractions must lie in [0, 1]");
      }
    }
  }
};

struct SimData {
  Dataset train;
  Dataset test;
  Eigen::VectorXd beta_true;  // raw-scale coefficients of the penalized block
  Partition true_groups;
};

namespace detail {

inline Eigen::MatrixXd sample_block_features(int rows, int p, int block_size, double rho,
                                             double sigma2, RngStream& rng) {
  const Eigen::Index b = block_size;
  Eigen::MatrixXd block = Eigen::MatrixXd::Constant(b, b, rho);
  block.diagonal().setConstant(sigma2);
  Eigen::LLT<Eigen::MatrixXd> llt(block);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("scenario: block covariance is not positive definite");
  }
  const Eigen::MatrixXd chol = llt.matrixL();
  Eigen::MatrixXd x(rows, p);
  Eigen::VectorXd z(b);
  for (int i = 0; i < rows; ++i) {
    for (int start = 0; start < p; start += block_size) {
      for (Eigen::Index k = 0; k < b; ++k) z[k] = rng.normal();
      x.row(i).segment(start, b) = (chol * z).transpose();
    }
  }
  return x;
}

}  // namespace detail

// Generates train and test datasets sharing one coefficient vector. Within
// each signal group the ceil(zero_fraction * size) smallest |beta| entries
// are set to zero (ties broken by feature index), so the surviving nonzeros
// are the largest in magnitude.
inline SimData simulate_scenario(const SimScenario& scenario) {
  scenario.validate();

  RngStream feature_stream(scenario.seed, "features");
  RngStream beta_stream(scenario.seed, "betas");
  RngStream outcome_stream(scenario.seed, "outcomes");

  Eigen::MatrixXd x_train = detail::sample_block_features(
      scenario.n, scenario.p, scenario.block_size, scenario.rho, scenario.sigma2,
      feature_stream);
  Eigen::MatrixXd x_test = detail::sample_block_features(
      scenario.n_test, scenario.p, scenario.block_size, scenario.rho, scenario.sigma2,
      feature_stream);

  Eigen::VectorXd beta(scenario.p);
  int offset = 0;
  for (std::size_t g = 0; g < scenario.group_sizes.size(); ++g) {
    const int size = scenario.group_sizes[g];
    Eigen::VectorXd draws =
        sample_en_prior_betas(size, scenario.prior_alpha, scenario.prior_lambda,
                              scenario.true_multipliers[g], beta_stream);
    const int zeros = static_cast<int>(
        std::ceil(scenario.zero_fraction[g] * static_cast<double>(size)));
    std::vector<int> order(static_cast<std::size_t>(size));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double aa = std::abs(draws[a]), bb = std::abs(draws[b]);
      return aa != bb ? aa < bb : a < b;
    });
    for (int k = 0; k < zeros; ++k) draws[order[static_cast<std::size_t>(k)]] = 0.0;
    beta.segment(offset, size) = draws;
    offset += size;
  }

  const auto draw_outcomes = [&](const Eigen::MatrixXd& x) {
    Eigen::VectorXd y(x.rows());
    const Eigen::VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      y[i] = outcome_stream.bernoulli(expit(eta[i])) ? 1.0 : 0.0;
    }
    return y;
  };
  const Eigen::VectorXd y_train = draw_outcomes(x_train);
  const Eigen::VectorXd y_test = draw_outcomes(x_test);

  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(scenario.p));
  for (int j = 0; j < scenario.p; ++j) names.push_back("x" + std::to_string(j + 1));

  SimData out;
  out.train = Dataset::standardized(
      x_train, y_train, Eigen::VectorXd::Ones(scenario.n),
      Eigen::MatrixXd::Ones(scenario.n, 1), names);
  out.test = Dataset::standardized(
      x_test, y_test, Eigen::VectorXd::Ones(scenario.n_test),
      Eigen::MatrixXd::Ones(scenario.n_test, 1), names);
  out.beta_true = beta;

  Partition truth;
  truth.name = "signal";
  for (std::size_t g = 0; g < scenario.group_sizes.size(); ++g) {
    // Label groups by their true multiplier so output ordering is unambiguous.
    truth.group_labels.push_back("m=" + std::to_string(scenario.true_multipliers[g]));
    truth.assignment.insert(truth.assignment.end(),
                            static_cast<std::size_t>(scenario.group_sizes[g]),
                            static_cast<int>(g));
  }
  out.true_groups = std::move(truth);
  return out;
}

struct RandomGroupResult {
  Eigen::MatrixXd multipliers;          // repeats x G, NaN rows on failure
  std::vector<std::string> errors;      // one message per failed repeat
  double lambda = 0.0;                  // cross-validated global penalty
};

// Assigns features to groups of the given sizes uniformly at random, runs
// the full empirical-Bayes pipeline per repeat, and records the estimated
// multipliers. The global lambda is cross-validated once (it does not depend
// on the partition) and reused across repeats; per-repeat failures are
// recorded without aborting the batch.
inline RandomGroupResult random_group_experiment(const Dataset& data,
                                                 const std::vector<int>& group_sizes,
                                                 int repeats, std::uint64_t seed,
                                                 double alpha = 0.5,
                                                 double lambda = 0.0,
                                                 const EmOptions& em_opts = {},
                                                 int cv_folds = 10, int jobs = 1) {
  if (repeats < 1) {
    throw validation_error("random_group_experiment: repeats must be positive");
  }
  if (std::accumulate(group_sizes.begin(), group_sizes.end(), 0) != data.p()) {
    throw validation_error("random_group_experiment: group sizes must sum to p");
  }
  RandomGroupResult result;
  const int g_count = static_cast<int>(group_sizes.size());
  result.multipliers = Eigen::MatrixXd::Constant(
      repeats, g_count, std::numeric_limits<double>::quiet_NaN());
  result.errors.assign(static_cast<std::size_t>(repeats), "");

  if (!(lambda > 0.0)) {
    EnetProblem problem = EnetProblem::plain(data, alpha);
    lambda = cv_global_lambda(problem, cv_folds, {}, seed, jobs).best_lambda;
  }
  result.lambda = lambda;

  const auto run_repeat = [&](int r) {
    RngStream stream(seed, "group-assignment-" + std::to_string(r));
    std::vector<int> order(static_cast<std::size_t>(data.p()));
    std::iota(order.begin(), order.end(), 0);
    stream.shuffle(order);
    Partition part;
    part.name = "random";
    part.assignment.assign(static_cast<std::size_t>(data.p()), 0);
    int pos = 0;
    for (int g = 0; g < g_count; ++g) {
      part.group_labels.push_back("g" + std::to_string(g + 1));
      for (int k = 0; k < group_sizes[static_cast<std::size_t>(g)]; ++k) {
        part.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = g;
      }
    }
    PartitionSet partitions = PartitionSet::of(std::move(part));
    try {
      EmOptions opts = em_opts;
      opts.final_frequentist_fit = false;
      FitResult fit = run_em(data, partitions,
                             PenaltyConfig::make(alpha, lambda, partitions), opts);
      for (int g = 0; g < g_count; ++g) {
        result.multipliers(r, g) = fit.config.multipliers[0][static_cast<std::size_t>(g)];
      }
    } catch (const std::exception& e) {
      result.errors[static_cast<std::size_t>(r)] = e.what();
    }
  };
  parallel_for(repeats, jobs, run_repeat);
  return result;
}

}  // namespace groupenet
