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
#include "groupenet/enet.hpp"
#include "groupenet/errors.hpp"
#include "groupenet/partition.hpp"
#include "groupenet/penalty.hpp"
#include "groupenet/vb.hpp"

namespace groupenet {

// Sufficient statistics for the multiplier update: d-weights per group (one
// partition) or per intersection cell (two partitions), plus group sizes and
// the fixed global penalties.
struct MStepInput {
  Eigen::MatrixXd d;        // G1 x 1 (single partition) or G1 x G2
  std::vector<int> sizes1;
  std::vector<int> sizes2;  // empty for a single partition
  double alpha = 0.5;
  double lambda_global = 1.0;

  bool single() const { return sizes2.empty(); }
};

// The d-terms weight each feature's second moment by one plus a multiple of
// chi_j^{-1/2}. Two multiples are supported:
//   kGigMoment     uses E[1/psi_j] = sqrt(lambda1^2 / (4 lambda2 chi_j)), the
//                  exact mixing-variable expectation, so the weight is the
//                  expected prior precision ratio E[1 + 1/psi_j];
//   kLambda2Scaled uses lambda2 * E[1/psi_j], i.e.
//                  alpha lambda^1.5 sqrt((1-alpha)/(8 chi_j)).
enum class DWeightScheme { kGigMoment, kLambda2Scaled };

namespace detail {

inline double dweight_scale(double alpha, double lambda_global, DWeightScheme scheme) {
  if (scheme == DWeightScheme::kLambda2Scaled) {
    return alpha * std::pow(lambda_global, 1.5) * std::sqrt((1.0 - alpha) / 8.0);
  }
  // sqrt(lambda1^2 / (4 lambda2)) in the (alpha, lambda) parametrization
  return alpha * std::sqrt(lambda_global / (2.0 * (1.0 - alpha)));
}

// Per-feature weight entering the d-terms:
//   f_j = (Sigma_jj + mu_j^2) * (1 + scale / sqrt(chi_j)).
inline Eigen::VectorXd mstep_feature_weights(const VariationalState& state,
                                             const Dataset& data, double alpha,
                                             double lambda_global,
                                             DWeightScheme scheme) {
  const Eigen::Index p = data.p();
  const Eigen::VectorXd diag_pen = state.sigma.diagonal().tail(p);
  const Eigen::VectorXd mu_pen = state.mu.tail(p);
  const double scale = dweight_scale(alpha, lambda_global, scheme);
  Eigen::VectorXd f(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!std::isfinite(state.chi[j]) || !(state.chi[j] > 0.0)) {
      throw numerical_error("compute_group_weights: non-finite chi at feature " +
                            std::to_string(j));
    }
    f[j] = (diag_pen[j] + mu_pen[j] * mu_pen[j]) *
           (1.0 + scale / std::sqrt(state.chi[j]));
    if (!std::isfinite(f[j])) {
      throw numerical_error("compute_group_weights: non-finite d-term at feature " +
                            std::to_string(j));
    }
  }
  return f;
}

// Closed-form maximizer of (1/2) sum s_g log v_g - kappa sum v_g r_g subject
// to sum s_g log v_g = 0: stationarity gives v_g = t s_g / r_g, with t fixed
// by the constraint.
inline std::vector<double> normalized_stationary_point(const std::vector<int>& sizes,
                                                       const Eigen::VectorXd& r) {
  const std::size_t g_count = sizes.size();
  if (g_count == 1) return {1.0};  // the constraint pins a lone group at one
  double total = 0.0, logsum = 0.0;
  std::vector<double> log_ratio(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    log_ratio[g] = std::log(static_cast<double>(sizes[g])) -
                   std::log(r[static_cast<Eigen::Index>(g)]);
    total += sizes[g];
    logsum += sizes[g] * log_ratio[g];
  }
  const double log_t = -logsum / total;
  std::vector<double> out(g_count);
  for (std::size_t g = 0; g < g_count; ++g) out[g] = std::exp(log_t + log_ratio[g]);
  return out;
}

// Re-center log multipliers so the size-weighted geometric mean is one.
inline void renormalize(std::vector<double>& mult, const std::vector<int>& sizes) {
  double total = 0.0, logsum = 0.0;
  for (std::size_t g = 0; g < mult.size(); ++g) {
    logsum += sizes[g] * std::log(mult[g]);
    total += sizes[g];
  }
  const double shift = logsum / total;
  if (shift == 0.0) return;
  for (double& v : mult) v = std::exp(std::log(v) - shift);
}

inline double mstep_objective_single(const std::vector<double>& mult,
                                     const std::vector<int>& sizes,
                                     const Eigen::VectorXd& d, double alpha,
                                     double lambda_global) {
  const double kappa = 0.25 * (1.0 - alpha) * lambda_global;
  double obj = 0.0;
  for (std::size_t g = 0; g < mult.size(); ++g) {
    obj += 0.5 * sizes[g] * std::log(mult[g]) -
           kappa * mult[g] * d[static_cast<Eigen::Index>(g)];
  }
  return obj;
}

struct ProductMStepSolution {
  std::vector<std::vector<double>> multipliers;
  double kkt = 0.0;  // relative spread of the stationarity constant
};

// Alternating exact block updates for the multi-partition M-step. The joint
// product constraint is gauge-equivalent to calibrating every partition
// separately, and on that product of hyperplanes each block update has the
// single-partition closed form against the current cross weights. At the
// optimum kappa v_g R_g / s_g is one shared constant across all groups of
// all partitions, which is the reported KKT residual.
inline ProductMStepSolution solve_product_mstep(
    const Eigen::VectorXd& f, const std::vector<std::vector<int>>& assign,
    const std::vector<std::vector<int>>& sizes, double alpha, double lambda_global,
    const std::vector<std::vector<double>>* init = nullptr, int max_iter = 5000,
    double tol = 1e-13) {
  const double kappa = 0.25 * (1.0 - alpha) * lambda_global;
  const std::size_t k_count = assign.size();
  const Eigen::Index p = f.size();
  ProductMStepSolution sol;
  sol.multipliers.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    if (init != nullptr && (*init)[k].size() == sizes[k].size()) {
      sol.multipliers[k] = (*init)[k];
      renormalize(sol.multipliers[k], sizes[k]);
    } else {
      sol.multipliers[k].assign(sizes[k].size(), 1.0);
    }
  }

  Eigen::VectorXd cross(p);
  const auto cross_weights = [&](std::size_t skip) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double w = f[j];
      for (std::size_t k = 0; k < k_count; ++k) {
        if (k == skip) continue;
        w *= sol.multipliers[k][static_cast<std::size_t>(
            assign[k][static_cast<std::size_t>(j)])];
      }
      cross[j] = w;
    }
  };
  const auto block_weights = [&](std::size_t k) {
    cross_weights(k);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[k].size()));
    for (Eigen::Index j = 0; j < p; ++j) {
      r[assign[k][static_cast<std::size_t>(j)]] += cross[j];
    }
    return r;
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    double change = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const Eigen::VectorXd r = block_weights(k);
      for (Eigen::Index g = 0; g < r.size(); ++g) {
        if (!(r[g] > 0.0)) {
          throw validation_error("m-step: a group carries no positive d-weight");
        }
      }
      std::vector<double> updated = normalized_stationary_point(sizes[k], r);
      for (std::size_t g = 0; g < updated.size(); ++g) {
        change = std::max(change, std::abs(std::log(updated[g]) -
                                           std::log(sol.multipliers[k][g])));
        sol.multipliers[k][g] = updated[g];
      }
    }
    if (change < tol) break;
  }

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const Eigen::VectorXd r = block_weights(k);
    for (std::size_t g = 0; g < sol.multipliers[k].size(); ++g) {
      const double nu = kappa * sol.multipliers[k][g] *
                        r[static_cast<Eigen::Index>(g)] /
                        static_cast<double>(sizes[k][g]);
      lo = std::min(lo, nu);
      hi = std::max(hi, nu);
    }
  }
  sol.kkt = (hi - lo) / std::max(hi, 1e-300);
  return sol;
}

}  // namespace detail

// d-terms from the variational posterior: single partition gives d_g summed
// over the group; two partitions give d_{g1 g2} summed over the intersection
// cell, with the empty-sum convention d = 0 for empty cells.
inline MStepInput compute_group_weights(const VariationalState& state,
                                        const Dataset& data,
                                        const PartitionSet& partitions,
                                        const PenaltyConfig& config,
                                        DWeightScheme scheme = DWeightScheme::kLambda2Scaled) {
  if (partitions.count() > 2) {
    throw validation_error(
        "compute_group_weights: d-cells are defined for at most two partitions");
  }
  const Eigen::VectorXd f = detail::mstep_feature_weights(
      state, data, config.alpha, config.lambda_global, scheme);
  MStepInput input;
  input.alpha = config.alpha;
  input.lambda_global = config.lambda_global;
  const Partition& first = partitions.partitions.front();
  input.sizes1 = first.group_sizes();
  if (partitions.count() == 1) {
    input.d = Eigen::MatrixXd::Zero(first.group_count(), 1);
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      input.d(first.assignment[static_cast<std::size_t>(j)], 0) += f[j];
    }
  } else {
    const Partition& second = partitions.partitions.back();
    input.sizes2 = second.group_sizes();
    input.d = Eigen::MatrixXd::Zero(first.group_count(), second.group_count());
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      input.d(first.assignment[static_cast<std::size_t>(j)],
              second.assignment[static_cast<std::size_t>(j)]) += f[j];
    }
  }
  return input;
}

// Single-partition M-step via the closed form v_g = t |G(g)| / d_g.
inline std::vector<double> solve_single_partition(const MStepInput& input) {
  if (!input.single()) {
    throw validation_error("solve_single_partition: input carries two partitions");
  }
  const Eigen::VectorXd d = input.d.col(0);
  for (Eigen::Index g = 0; g < d.size(); ++g) {
    if (!(d[g] > 0.0)) {
      throw validation_error("solve_single_partition: d-terms must be positive");
    }
  }
  return detail::normalized_stationary_point(input.sizes1, d);
}

// Numeric route for the same problem: Newton ascent on log multipliers with
// the linear constraint eliminated by substitution. Kept as an independent
// cross-check of the closed form.
inline std::vector<double> solve_single_partition_numeric(const MStepInput& input,
                                                          double tol = 1e-12,
                                                          int max_iter = 500) {
  if (!input.single()) {
    throw validation_error("solve_single_partition_numeric: input carries two partitions");
  }
  const std::size_t g_count = input.sizes1.size();
  const Eigen::VectorXd d = input.d.col(0);
  for (Eigen::Index g = 0; g < d.size(); ++g) {
    if (!(d[g] > 0.0)) {
      throw validation_error("solve_single_partition_numeric: d-terms must be positive");
    }
  }
  if (g_count == 1) return {1.0};
  const double kappa = 0.25 * (1.0 - input.alpha) * input.lambda_global;
  const Eigen::Index r = static_cast<Eigen::Index>(g_count) - 1;
  Eigen::VectorXd sizes(static_cast<Eigen::Index>(g_count));
  for (std::size_t g = 0; g < g_count; ++g) {
    sizes[static_cast<Eigen::Index>(g)] = input.sizes1[g];
  }

  // eta_G is eliminated: eta_G = -sum_{g<G} s_g eta_g / s_G.
  const auto full_eta = [&](const Eigen::VectorXd& red) {
    Eigen::VectorXd eta(static_cast<Eigen::Index>(g_count));
    eta.head(r) = red;
    eta[r] = -sizes.head(r).dot(red) / sizes[r];
    return eta;
  };
  const auto objective = [&](const Eigen::VectorXd& red) {
    const Eigen::VectorXd eta = full_eta(red);
    double obj = 0.0;
    for (Eigen::Index g = 0; g < eta.size(); ++g) {
      obj += 0.5 * sizes[g] * eta[g] - kappa * d[g] * std::exp(eta[g]);
    }
    return obj;
  };

  Eigen::VectorXd eta_red = Eigen::VectorXd::Zero(r);
  double obj = objective(eta_red);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd eta = full_eta(eta_red);
    const Eigen::VectorXd v = (eta.array().exp() * d.array() * kappa).matrix();
    const Eigen::VectorXd grad_full = 0.5 * sizes - v;
    Eigen::VectorXd grad(r);
    for (Eigen::Index g = 0; g < r; ++g) {
      grad[g] = grad_full[g] - (sizes[g] / sizes[r]) * grad_full[r];
    }
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index a = 0; a < r; ++a) {
      for (Eigen::Index b = 0; b < r; ++b) {
        double h = a == b ? -v[a] : 0.0;
        h -= (sizes[a] / sizes[r]) * (sizes[b] / sizes[r]) * v[r];
        hess(a, b) = h;
      }
    }
    Eigen::VectorXd step = (-hess).ldlt().solve(grad);
    if (!step.allFinite()) {
      throw numerical_error("solve_single_partition_numeric: Newton step failed");
    }
    double scale = 1.0;
    double new_obj = objective(eta_red + scale * step);
    while (new_obj < obj && scale > 1e-8) {
      scale *= 0.5;
      new_obj = objective(eta_red + scale * step);
    }
    eta_red += scale * step;
    const double improve = new_obj - obj;
    obj = new_obj;
    if (std::abs(improve) < tol * (1.0 + std::abs(obj)) &&
        grad.cwiseAbs().maxCoeff() < 1e-10 * (1.0 + v.maxCoeff())) {
      break;
    }
  }
  const Eigen::VectorXd eta = full_eta(eta_red);
  std::vector<double> out(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    out[g] = std::exp(eta[static_cast<Eigen::Index>(g)]);
  }
  detail::renormalize(out, input.sizes1);
  return out;
}

// Two-partition M-step on the cell weights d_{g1 g2}. Returns the calibrated
// multiplier vectors of both partitions; throws numerical_error when the
// alternating solver misses the stationarity tolerance.
inline std::pair<std::vector<double>, std::vector<double>> solve_multi_partition(
    const MStepInput& input, double kkt_tol = 1e-6) {
  if (input.single()) {
    throw validation_error("solve_multi_partition: input has a single partition");
  }
  const Eigen::Index g1 = input.d.rows();
  const Eigen::Index g2 = input.d.cols();
  if (input.d.minCoeff() < 0.0) {
    throw validation_error("solve_multi_partition: d-weights must be non-negative");
  }
  {
    long total1 = 0, total2 = 0;
    for (int s : input.sizes1) total1 += s;
    for (int s : input.sizes2) total2 += s;
    if (total1 != total2) {
      throw validation_error("solve_multi_partition: partitions cover different feature counts");
    }
  }
  for (Eigen::Index a = 0; a < g1; ++a) {
    if (!(input.d.row(a).maxCoeff() > 0.0)) {
      throw validation_error("solve_multi_partition: row without positive d-weight");
    }
  }
  for (Eigen::Index b = 0; b < g2; ++b) {
    if (!(input.d.col(b).maxCoeff() > 0.0)) {
      throw validation_error("solve_multi_partition: column without positive d-weight");
    }
  }
  // One synthetic entry per nonempty cell; group sizes stay the true feature
  // counts.
  std::vector<std::vector<int>> assign(2);
  std::vector<double> weights;
  for (Eigen::Index a = 0; a < g1; ++a) {
    for (Eigen::Index b = 0; b < g2; ++b) {
      if (input.d(a, b) > 0.0) {
        assign[0].push_back(static_cast<int>(a));
        assign[1].push_back(static_cast<int>(b));
        weights.push_back(input.d(a, b));
      }
    }
  }
  const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(
      weights.data(), static_cast<Eigen::Index>(weights.size()));
  detail::ProductMStepSolution sol = detail::solve_product_mstep(
      f, assign, {input.sizes1, input.sizes2}, input.alpha, input.lambda_global);
  if (!(sol.kkt < kkt_tol)) {
    throw numerical_error("solve_multi_partition: solver stalled at KKT residual " +
                          std::to_string(sol.kkt));
  }
  return {sol.multipliers[0], sol.multipliers[1]};
}

// Pool-adjacent-violators projection of the log multipliers, weighted by
// group sizes, onto sequences non-decreasing along `ordering`, followed by
// re-normalization to the geometric-mean constraint. An already monotone
// input is returned unchanged.
inline std::vector<double> isotonic_adjust(const std::vector<double>& multipliers,
                                           const std::vector<int>& group_sizes,
                                           const std::vector<int>& ordering) {
  const std::size_t g_count = multipliers.size();
  if (group_sizes.size() != g_count || ordering.size() != g_count) {
    throw validation_error("isotonic_adjust: inputs must have one entry per group");
  }
  std::vector<double> value(g_count);
  std::vector<double> weight(g_count);
  std::vector<int> span(g_count);
  std::size_t blocks = 0;
  bool pooled = false;
  for (std::size_t k = 0; k < g_count; ++k) {
    const int g = ordering[k];
    value[blocks] = std::log(multipliers[static_cast<std::size_t>(g)]);
    weight[blocks] = static_cast<double>(group_sizes[static_cast<std::size_t>(g)]);
    span[blocks] = 1;
    ++blocks;
    while (blocks > 1 && value[blocks - 2] > value[blocks - 1]) {
      const double w = weight[blocks - 2] + weight[blocks - 1];
      value[blocks - 2] =
          (weight[blocks - 2] * value[blocks - 2] + weight[blocks - 1] * value[blocks - 1]) / w;
      weight[blocks - 2] = w;
      span[blocks - 2] += span[blocks - 1];
      --blocks;
      pooled = true;
    }
  }
  if (!pooled) return multipliers;

  std::vector<double> projected(g_count);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (int s = 0; s < span[b]; ++s) {
      projected[static_cast<std::size_t>(ordering[pos++])] = value[b];
    }
  }
  // PAVA preserves the weighted sum of logs; re-center anyway so the
  // constraint holds to machine precision.
  double total = 0.0, logsum = 0.0;
  for (std::size_t g = 0; g < g_count; ++g) {
    logsum += group_sizes[g] * projected[g];
    total += group_sizes[g];
  }
  const double shift = logsum / total;
  std::vector<double> out(g_count);
  for (std::size_t g = 0; g < g_count; ++g) out[g] = std::exp(projected[g] - shift);
  return out;
}

struct EmIteration {
  std::vector<std::vector<double>> multipliers;
  double mstep_objective = 0.0;
  int vb_iterations = 0;
};

struct EmTrace {
  std::vector<EmIteration> iterations;
  bool clamped = false;
  int total_vb_iterations = 0;
};

struct EmOptions {
  double tol_outer = 1e-4;
  int max_outer = 100;
  VbOptions vb;
  // Empty: all multipliers start at one. Otherwise one vector per partition.
  std::vector<std::vector<double>> init_multipliers;
  bool final_frequentist_fit = true;
  double clamp_lo = 1e-4;
  double clamp_hi = 1e4;
  DWeightScheme dweight = DWeightScheme::kLambda2Scaled;
};

struct FitResult {
  PenaltyConfig config;         // converged multipliers
  VariationalState posterior;   // consistent with the final multipliers
  Coefficients coefficients;    // weighted frequentist fit at the final multipliers
  EmTrace trace;
  bool converged = false;
};

// Outer empirical-Bayes loop: alternates the variational posterior (E-step
// surrogate) with the constrained multiplier update (M-step), warm-starting
// the inner cycle, until the multipliers stabilize. lambda_global and alpha
// are fixed inputs (lambda comes from cross-validation of the regular
// elastic net).
inline FitResult run_em(const Dataset& data, const PartitionSet& partitions,
                        const PenaltyConfig& start, const EmOptions& opts = {}) {
  partitions.validate(data.p());
  PenaltyConfig config = start;
  if (!opts.init_multipliers.empty()) {
    config.multipliers = opts.init_multipliers;
  }
  if (config.multipliers.empty()) {
    config = PenaltyConfig::make(start.alpha, start.lambda_global, partitions);
  }
  config.check(partitions);

  std::vector<std::vector<int>> assign;
  std::vector<std::vector<int>> sizes;
  for (const auto& part : partitions.partitions) {
    assign.push_back(part.assignment);
    sizes.push_back(part.group_sizes());
  }

  FitResult result;
  result.config = config;
  std::optional<VariationalState> state;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    VariationalState next;
    try {
      next = run_vb(data, partitions, result.config, state, opts.vb);
    } catch (const numerical_error& e) {
      throw numerical_error(std::string(e.what()) + " (outer iteration " +
                            std::to_string(outer + 1) + ")");
    }
    state = std::move(next);
    result.trace.total_vb_iterations += state->iteration_count;

    const Eigen::VectorXd f = detail::mstep_feature_weights(
        *state, data, result.config.alpha, result.config.lambda_global, opts.dweight);
    std::vector<std::vector<double>> updated;
    if (partitions.count() == 1) {
      MStepInput input;
      input.alpha = result.config.alpha;
      input.lambda_global = result.config.lambda_global;
      input.sizes1 = sizes[0];
      input.d = Eigen::MatrixXd::Zero(partitions.partitions[0].group_count(), 1);
      for (Eigen::Index j = 0; j < data.p(); ++j) {
        input.d(assign[0][static_cast<std::size_t>(j)], 0) += f[j];
      }
      updated.push_back(solve_single_partition(input));
    } else {
      detail::ProductMStepSolution sol = detail::solve_product_mstep(
          f, assign, sizes, result.config.alpha, result.config.lambda_global,
          &result.config.multipliers);
      if (!(sol.kkt < 1e-6)) {
        throw numerical_error("run_em: multiplier solver stalled at KKT residual " +
                              std::to_string(sol.kkt));
      }
      updated = std::move(sol.multipliers);
    }

    for (std::size_t k = 0; k < updated.size(); ++k) {
      const auto& part = partitions.partitions[k];
      if (part.monotone_order) {
        updated[k] = isotonic_adjust(updated[k], sizes[k], *part.monotone_order);
      }
      bool clamped = false;
      for (double& v : updated[k]) {
        if (v < opts.clamp_lo) { v = opts.clamp_lo; clamped = true; }
        if (v > opts.clamp_hi) { v = opts.clamp_hi; clamped = true; }
      }
      if (clamped) {
        result.trace.clamped = true;
        detail::renormalize(updated[k], sizes[k]);
      }
    }

    double change = 0.0;
    for (std::size_t k = 0; k < updated.size(); ++k) {
      for (std::size_t g = 0; g < updated[k].size(); ++g) {
        change = std::max(change,
                          std::abs(updated[k][g] - result.config.multipliers[k][g]) /
                              (1.0 + std::abs(result.config.multipliers[k][g])));
      }
    }

    EmIteration it;
    it.multipliers = updated;
    it.vb_iterations = state->iteration_count;
    if (partitions.count() == 1) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(partitions.partitions[0].group_count());
      for (Eigen::Index j = 0; j < data.p(); ++j) {
        d[assign[0][static_cast<std::size_t>(j)]] += f[j];
      }
      std::vector<double> m0 = updated[0];
      it.mstep_objective = detail::mstep_objective_single(
          m0, sizes[0], d, result.config.alpha, result.config.lambda_global);
    }
    result.trace.iterations.push_back(std::move(it));

    result.config.multipliers = updated;
    if (change < opts.tol_outer) {
      result.converged = true;
      break;
    }
  }

  // Refresh the posterior at the final multipliers so the returned state and
  // config are mutually consistent.
  result.posterior = run_vb(data, partitions, result.config, state, opts.vb);
  result.converged = result.converged && result.posterior.converged;

  if (opts.final_frequentist_fit) {
    EnetProblem problem{data, expand_multipliers(partitions, result.config),
                        result.config.alpha};
    result.coefficients =
        fit_weighted_enet(problem, result.config.lambda_global);
  }
  return result;
}

}  // namespace groupenet
