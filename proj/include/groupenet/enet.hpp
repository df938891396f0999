#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "groupenet/data.hpp"
#include "groupenet/errors.hpp"
#include "groupenet/parallel.hpp"
#include "groupenet/penalty.hpp"
#include "groupenet/rng.hpp"
#include "groupenet/vb.hpp"

namespace groupenet {

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// A weighted logistic elastic net problem: the objective maximized is
//   l(y; beta) - (lambda1/2) sum_j sqrt(w_j) |beta_j|
//             - (lambda2/2) sum_j w_j beta_j^2
// with w_j the per-feature penalty factor (the group multiplier of the
// feature) and lambda1 = alpha * lambda, lambda2 = (1 - alpha) * lambda / 2.
// Unpenalized covariates are excluded from both norms.
struct EnetProblem {
  const Dataset& data;
  Eigen::VectorXd penalty_factors;
  double alpha = 0.5;

  static EnetProblem plain(const Dataset& data, double alpha) {
    return EnetProblem{data, Eigen::VectorXd::Ones(data.p()), alpha};
  }
};

namespace detail {

inline double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                                const Eigen::VectorXd& prob) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = std::min(std::max(prob[i], 1e-12), 1.0 - 1e-12);
    dev += -2.0 * (y[i] * std::log(p) + (m[i] - y[i]) * std::log1p(-p));
  }
  return dev;
}

inline double enet_objective(const Dataset& data, const Eigen::VectorXd& factors,
                             double l1, double l2, const Eigen::VectorXd& beta_u,
                             const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = data.features * beta;
  if (data.u() > 0) eta += data.unpenalized * beta_u;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    ll += data.successes[i] * eta[i] - data.trials[i] * log1pexp(eta[i]);
  }
  double pen = 0.0;
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    pen += 0.5 * l1 * std::sqrt(factors[j]) * std::abs(beta[j]) +
           0.5 * l2 * factors[j] * beta[j] * beta[j];
  }
  return ll - pen;
}

// Exact stationarity/subgradient residual of the penalized likelihood:
// active coordinates must satisfy grad_j = l2 w_j beta_j + (l1/2) sqrt(w_j)
// sign(beta_j); inactive ones |grad_j| <= (l1/2) sqrt(w_j); unpenalized
// coordinates have zero gradient.
inline double kkt_residual(const Dataset& data, const Eigen::VectorXd& factors,
                           double l1, double l2, const Eigen::VectorXd& beta_u,
                           const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = data.features * beta;
  if (data.u() > 0) eta += data.unpenalized * beta_u;
  Eigen::VectorXd resid(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    resid[i] = data.successes[i] - data.trials[i] * expit(eta[i]);
  }
  double worst = 0.0;
  if (data.u() > 0) {
    worst = (data.unpenalized.transpose() * resid).cwiseAbs().maxCoeff();
  }
  const Eigen::VectorXd grad = data.features.transpose() * resid;
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const double gam = 0.5 * l1 * std::sqrt(factors[j]);
    if (beta[j] != 0.0) {
      worst = std::max(worst, std::abs(grad[j] - l2 * factors[j] * beta[j] -
                                       gam * (beta[j] > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::max(0.0, std::abs(grad[j]) - gam));
    }
  }
  return worst;
}

struct CdControl {
  double cd_tol = 1e-9;  // coordinate stability threshold
  int max_sweeps = 100000;
  double kkt_target = 5e-7;
  std::vector<double>* objective_trace = nullptr;  // per-sweep hook for tests
};

// Cyclic coordinate descent on the quadratic minorizer of the binomial
// log-likelihood with curvature weights m_i / 4. The minorizer is tangent at
// the start of every sweep, so each sweep cannot decrease the penalized
// likelihood; the weights are constant, so the curvature terms are computed
// once. Full sweeps alternate with active-set sweeps; convergence is declared
// on the exact KKT residual. beta_u/beta are warm starts, overwritten in place.
inline void cd_solve(const Dataset& data, const Eigen::VectorXd& factors, double l1,
                     double l2, Eigen::VectorXd& beta_u, Eigen::VectorXd& beta,
                     const CdControl& ctl = {}) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const Eigen::Index u = data.u();
  const Eigen::MatrixXd& x = data.features;
  const Eigen::MatrixXd& xu = data.unpenalized;
  const Eigen::VectorXd& y = data.successes;
  const Eigen::VectorXd& m = data.trials;

  Eigen::VectorXd gamma(p), ridge(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    gamma[j] = 0.5 * l1 * std::sqrt(factors[j]);
    ridge[j] = l2 * factors[j];
  }
  const Eigen::VectorXd w = 0.25 * m;
  const Eigen::VectorXd wx2 =
      (x.array().square().colwise() * w.array()).colwise().sum().transpose();
  Eigen::VectorXd wu2;
  if (u > 0) {
    wu2 = (xu.array().square().colwise() * w.array()).colwise().sum().transpose();
  }

  Eigen::VectorXd eta = x * beta;
  if (u > 0) eta += xu * beta_u;
  Eigen::VectorXd r(n);  // surrogate working residual, refreshed per sweep

  double cd_tol = ctl.cd_tol;
  double last_kkt = std::numeric_limits<double>::infinity();
  bool full_sweep = true;
  for (int sweep = 0; sweep < ctl.max_sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      r[i] = (y[i] - m[i] * expit(eta[i])) / w[i];
      if (!std::isfinite(r[i]) || !std::isfinite(eta[i])) {
        throw numerical_error(
            "fit_weighted_enet: working response diverged; try a larger lambda");
      }
    }
    double max_delta = 0.0;
    for (Eigen::Index k = 0; k < u; ++k) {
      const double rho = xu.col(k).dot((w.array() * r.array()).matrix()) +
                         wu2[k] * beta_u[k];
      const double delta = rho / wu2[k] - beta_u[k];
      if (delta != 0.0) {
        r -= delta * xu.col(k);
        eta += delta * xu.col(k);
        beta_u[k] += delta;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!full_sweep && beta[j] == 0.0) continue;
      const double rho = x.col(j).dot((w.array() * r.array()).matrix()) + wx2[j] * beta[j];
      const double bnew = soft_threshold(rho, gamma[j]) / (wx2[j] + ridge[j]);
      const double delta = bnew - beta[j];
      if (delta != 0.0) {
        r -= delta * x.col(j);
        eta += delta * x.col(j);
        beta[j] = bnew;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (ctl.objective_trace != nullptr) {
      ctl.objective_trace->push_back(enet_objective(data, factors, l1, l2, beta_u, beta));
    }
    if (max_delta < cd_tol * (1.0 + beta.cwiseAbs().maxCoeff())) {
      if (!full_sweep) {
        full_sweep = true;  // stable on the active set: re-check everything
        continue;
      }
      const double kkt = kkt_residual(data, factors, l1, l2, beta_u, beta);
      if (kkt <= ctl.kkt_target) return;
      if (cd_tol <= 1e-16 && kkt >= last_kkt) return;  // stalled at the floor
      last_kkt = kkt;
      cd_tol = std::max(cd_tol * 0.1, 1e-16);  // tighten and keep polishing
    } else {
      full_sweep = false;
    }
  }
  // Sweep budget exhausted; the caller sees whatever KKT residual was achieved.
}

}  // namespace detail

struct EnetFit {
  Coefficients coef;
  double lambda;
  int active_size;
  double deviance;  // training binomial deviance
  double kkt;
};

// Fits the weighted elastic net at a single lambda via IRLS + cyclic
// coordinate descent. `init` provides a warm start.
inline EnetFit fit_weighted_enet_full(const EnetProblem& problem, double lambda,
                                      const std::optional<Coefficients>& init = {},
                                      const detail::CdControl& ctl = {}) {
  if (!(lambda > 0.0)) throw validation_error("fit_weighted_enet: lambda must be positive");
  const Dataset& data = problem.data;
  if (problem.penalty_factors.size() != data.p()) {
    throw validation_error("fit_weighted_enet: penalty factor length does not match p");
  }
  if (!(problem.penalty_factors.minCoeff() > 0.0)) {
    throw validation_error("fit_weighted_enet: penalty factors must be positive");
  }
  const PenaltyPair pair = reparametrize(problem.alpha, lambda);
  Eigen::VectorXd beta_u = Eigen::VectorXd::Zero(data.u());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(data.p());
  if (init) {
    if (init->penalized_part.size() == data.p() &&
        init->unpenalized_part.size() == data.u()) {
      beta_u = init->unpenalized_part;
      beta = init->penalized_part;
    }
  }
  detail::cd_solve(data, problem.penalty_factors, pair.lambda1, pair.lambda2, beta_u,
                   beta, ctl);

  EnetFit fit;
  fit.lambda = lambda;
  fit.coef.unpenalized_part = beta_u;
  fit.coef.penalized_part = beta;
  fit.coef.scale = data.scale;
  fit.coef.unpenalized_scale = data.unpenalized_scale;
  fit.active_size = static_cast<int>((beta.array() != 0.0).count());
  Eigen::VectorXd eta = data.features * beta;
  if (data.u() > 0) eta += data.unpenalized * beta_u;
  Eigen::VectorXd prob(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) prob[i] = expit(eta[i]);
  fit.deviance = detail::binomial_deviance(data.successes, data.trials, prob);
  fit.kkt = detail::kkt_residual(data, problem.penalty_factors, pair.lambda1,
                                 pair.lambda2, beta_u, beta);
  return fit;
}

inline Coefficients fit_weighted_enet(const EnetProblem& problem, double lambda,
                                      const std::optional<Coefficients>& init = {}) {
  return fit_weighted_enet_full(problem, lambda, init).coef;
}

// Fit of the unpenalized block alone (null model for the penalized features).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_unpenalized_only(
    const Dataset& data) {
  const Eigen::Index n = data.n();
  const Eigen::Index u = data.u();
  Eigen::VectorXd beta_u = Eigen::VectorXd::Zero(u);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  if (u > 0) {
    for (int step = 0; step < 100; ++step) {
      Eigen::VectorXd w(n), resid(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double pr = expit(eta[i]);
        w[i] = std::max(data.trials[i] * pr * (1.0 - pr), 1e-10);
        resid[i] = data.successes[i] - data.trials[i] * pr;
      }
      Eigen::MatrixXd h = data.unpenalized.transpose() * w.asDiagonal() * data.unpenalized;
      Eigen::VectorXd g = data.unpenalized.transpose() * resid;
      Eigen::VectorXd delta = h.ldlt().solve(g);
      beta_u += delta;
      eta = data.unpenalized * beta_u;
      if (delta.cwiseAbs().maxCoeff() < 1e-12) break;
    }
  }
  return {beta_u, eta};
}

// Smallest lambda at which every penalized coefficient is zero, from the KKT
// bound at the null (unpenalized-only) solution.
inline double lambda_max(const EnetProblem& problem) {
  const Dataset& data = problem.data;
  auto [beta_u, eta] = fit_unpenalized_only(data);
  Eigen::VectorXd resid(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    resid[i] = data.successes[i] - data.trials[i] * expit(eta[i]);
  }
  const Eigen::VectorXd grad = data.features.transpose() * resid;
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    lmax = std::max(lmax, 2.0 * std::abs(grad[j]) /
                              (problem.alpha * std::sqrt(problem.penalty_factors[j])));
  }
  // Headroom well above summation-order noise so the bound coordinate stays
  // exactly at zero when fitting at lambda_max itself.
  return std::max(lmax * (1.0 + 1e-8), 1e-10);
}

// Descending log-spaced grid from lambda_max down to ratio * lambda_max.
inline std::vector<double> make_lambda_grid(double lmax, int size = 100,
                                            double ratio = 1e-4) {
  std::vector<double> grid(static_cast<std::size_t>(size));
  const double lo = std::log(lmax * ratio);
  const double hi = std::log(lmax);
  for (int i = 0; i < size; ++i) {
    grid[static_cast<std::size_t>(i)] =
        std::exp(hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(size - 1));
  }
  return grid;
}

struct EnetPathPoint {
  double lambda;
  int active_size;
  double deviance;
  Eigen::VectorXd beta_u;
  Eigen::VectorXd beta;
};

struct EnetPath {
  std::vector<EnetPathPoint> points;
};

// Warm-started fits along a descending lambda sequence.
inline EnetPath fit_path(const EnetProblem& problem, const std::vector<double>& grid,
                         bool store_coefficients = true) {
  EnetPath path;
  path.points.reserve(grid.size());
  std::optional<Coefficients> warm;
  for (double lambda : grid) {
    EnetFit fit = fit_weighted_enet_full(problem, lambda, warm);
    warm = fit.coef;
    EnetPathPoint pt;
    pt.lambda = lambda;
    pt.active_size = fit.active_size;
    pt.deviance = fit.deviance;
    if (store_coefficients) {
      pt.beta_u = fit.coef.unpenalized_part;
      pt.beta = fit.coef.penalized_part;
    }
    path.points.push_back(std::move(pt));
  }
  return path;
}

struct CvResult {
  double best_lambda = 0.0;
  int best_index = 0;
  std::vector<double> lambdas;
  std::vector<double> mean_deviance;  // per lambda, mean over held-out observations
  std::vector<std::string> warnings;
};

// K-fold cross-validation of the global lambda for the regular elastic net
// (penalty multipliers all one). Each training fold is standardized afresh;
// held-out rows are transformed with the training fold's scaling. Fold
// assignment is deterministic given the seed.
inline CvResult cv_global_lambda(const EnetProblem& problem, int folds,
                                 std::vector<double> grid = {},
                                 std::uint64_t seed = 1, int jobs = 1);

namespace detail {

inline void cv_one_fold(const Dataset& data, double alpha,
                        const std::vector<double>& grid,
                        const std::vector<int>& heldout, std::vector<double>& dev_sum,
                        bool& single_class_seen) {
  std::vector<char> is_held(static_cast<std::size_t>(data.n()), 0);
  for (int i : heldout) is_held[static_cast<std::size_t>(i)] = 1;
  std::vector<int> train;
  train.reserve(static_cast<std::size_t>(data.n()) - heldout.size());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (!is_held[static_cast<std::size_t>(i)]) train.push_back(static_cast<int>(i));
  }
  Dataset fold = data.subset(train, /*restandardize=*/true);

  // Held-out design under the fold's standardization.
  const Eigen::Index k = static_cast<Eigen::Index>(heldout.size());
  Eigen::MatrixXd xh(k, data.p());
  Eigen::MatrixXd uh(k, data.u());
  Eigen::VectorXd yh(k), mh(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    xh.row(i) = data.features.row(heldout[static_cast<std::size_t>(i)]);
    if (data.u() > 0) uh.row(i) = data.unpenalized.row(heldout[static_cast<std::size_t>(i)]);
    yh[i] = data.successes[heldout[static_cast<std::size_t>(i)]];
    mh[i] = data.trials[heldout[static_cast<std::size_t>(i)]];
  }
  xh = apply_standardization(xh, fold.scale);

  if ((yh.array() == 0.0).all() || (yh.array() == mh.array()).all()) {
    single_class_seen = true;
  }

  EnetProblem fold_problem{fold, Eigen::VectorXd::Ones(fold.p()), alpha};
  std::optional<Coefficients> warm;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    EnetFit fit = fit_weighted_enet_full(fold_problem, grid[g], warm);
    warm = fit.coef;
    Eigen::VectorXd eta = xh * fit.coef.penalized_part;
    if (data.u() > 0) eta += uh * fit.coef.unpenalized_part;
    Eigen::VectorXd prob(k);
    for (Eigen::Index i = 0; i < k; ++i) prob[i] = expit(eta[i]);
    dev_sum[g] += binomial_deviance(yh, mh, prob);
  }
}

}  // namespace detail

inline CvResult cv_global_lambda(const EnetProblem& problem, int folds,
                                 std::vector<double> grid, std::uint64_t seed, int jobs) {
  const Dataset& data = problem.data;
  if (folds < 2 || folds > data.n()) {
    throw validation_error("cv_global_lambda: folds must lie in [2, n]");
  }
  EnetProblem plain = EnetProblem::plain(data, problem.alpha);
  if (grid.empty()) grid = make_lambda_grid(lambda_max(plain));
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (!(grid[g] < grid[g - 1])) {
      throw validation_error("cv_global_lambda: lambda grid must be strictly descending");
    }
  }

  std::vector<int> order(static_cast<std::size_t>(data.n()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  RngStream stream(seed, "cv-folds");
  stream.shuffle(order);
  std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold_rows[i % static_cast<std::size_t>(folds)].push_back(order[i]);
  }

  std::vector<std::vector<double>> dev(static_cast<std::size_t>(folds),
                                       std::vector<double>(grid.size(), 0.0));
  std::vector<char> single_class(static_cast<std::size_t>(folds), 0);

  const auto run_fold = [&](int f) {
    bool seen = false;
    detail::cv_one_fold(data, problem.alpha, grid, fold_rows[static_cast<std::size_t>(f)],
                        dev[static_cast<std::size_t>(f)], seen);
    single_class[static_cast<std::size_t>(f)] = seen ? 1 : 0;
  };
  if (jobs > 1) {
    parallel_for(folds, jobs, run_fold);
  } else {
    for (int f = 0; f < folds; ++f) run_fold(f);
  }

  CvResult result;
  result.lambdas = grid;
  result.mean_deviance.assign(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      result.mean_deviance[g] += dev[static_cast<std::size_t>(f)][g];
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.mean_deviance[g] /= static_cast<double>(data.n());
  }
  bool any_single = false;
  for (char c : single_class) any_single = any_single || (c != 0);
  if (any_single) {
    result.warnings.push_back(
        "cross-validation: at least one fold held out a single-class response");
  }
  result.best_index = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (result.mean_deviance[g] < result.mean_deviance[static_cast<std::size_t>(
                                      result.best_index)]) {
      result.best_index = static_cast<int>(g);
    }
  }
  result.best_lambda = grid[static_cast<std::size_t>(result.best_index)];
  return result;
}

struct SelectKResult {
  double lambda = 0.0;
  Coefficients coef;
  int achieved_size = 0;
  bool exact = false;
};

// Adjusts the global lambda by bisection on the log scale until the fitted
// active set has exactly k features; on a plateau the largest such lambda is
// returned, and when k is unattainable the nearest attainable size below k.
inline SelectKResult select_k_features(const EnetProblem& problem, int k) {
  const Eigen::Index p = problem.data.p();
  if (k < 0 || k > p) {
    throw validation_error("select_k_features: k must lie in [0, p]");
  }
  const double lmax = lambda_max(problem);
  SelectKResult result;
  if (k == 0) {
    EnetFit fit = fit_weighted_enet_full(problem, lmax);
    result.lambda = lmax;
    result.coef = fit.coef;
    result.achieved_size = fit.active_size;
    result.exact = fit.active_size == 0;
    return result;
  }

  std::optional<Coefficients> warm;
  const auto size_at = [&](double lambda) {
    EnetFit fit = fit_weighted_enet_full(problem, lambda, warm);
    warm = fit.coef;
    return std::make_pair(fit.active_size, fit.coef);
  };

  double lo = lmax * 1e-6;
  auto [size_lo, coef_lo] = size_at(lo);
  if (size_lo < k) {
    lo = lmax * 1e-10;
    std::tie(size_lo, coef_lo) = size_at(lo);
    if (size_lo < k) {  // k unattainable even with effectively no penalty
      result.lambda = lo;
      result.coef = coef_lo;
      result.achieved_size = size_lo;
      result.exact = false;
      return result;
    }
  }

  double hi = lmax;  // size 0 at the top of the grid
  Coefficients coef_hi;
  int size_hi = 0;
  {
    auto [s, c] = size_at(hi);
    size_hi = s;
    coef_hi = c;
  }
  // Invariant: size(lo) >= k > size(hi); shrink toward the boundary.
  for (int iter = 0; iter < 60 && std::log(lo / hi) < -1e-9; ++iter) {
    const double mid = std::exp(0.5 * (std::log(lo) + std::log(hi)));
    auto [s, c] = size_at(mid);
    if (s >= k) {
      lo = mid;
      size_lo = s;
      coef_lo = c;
    } else {
      hi = mid;
      size_hi = s;
      coef_hi = c;
    }
  }
  if (size_lo == k) {
    result.lambda = lo;
    result.coef = coef_lo;
    result.achieved_size = k;
    result.exact = true;
  } else {
    // The active size jumps past k here; report the nearest size below.
    result.lambda = hi;
    result.coef = coef_hi;
    result.achieved_size = size_hi;
    result.exact = false;
  }
  return result;
}

}  // namespace groupenet
