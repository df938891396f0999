#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "groupenet/errors.hpp"
#include "groupenet/partition.hpp"

namespace groupenet {

struct PenaltyPair {
  double lambda1;
  double lambda2;
};

// (alpha, lambda) -> (lambda1, lambda2) with alpha = l1 / (2 l2 + l1) and
// lambda = 2 l2 + l1, i.e. lambda1 = alpha * lambda and
// lambda2 = (1 - alpha) * lambda / 2.
inline PenaltyPair reparametrize(double alpha, double lambda_global) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw validation_error("reparametrize: alpha must lie in (0, 1)");
  }
  if (!(lambda_global > 0.0)) {
    throw validation_error("reparametrize: lambda must be positive");
  }
  return {alpha * lambda_global, 0.5 * (1.0 - alpha) * lambda_global};
}

// Inverse map back to (alpha, lambda).
inline std::pair<double, double> reparametrize_inverse(double lambda1, double lambda2) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
    throw validation_error("reparametrize_inverse: lambda1 and lambda2 must be positive");
  }
  const double lambda = 2.0 * lambda2 + lambda1;
  return {lambda1 / lambda, lambda};
}

// Global penalty pair plus per-group multipliers, one multiplier vector per
// partition. Multipliers are calibrated so the group-size-weighted geometric
// mean is one per partition, separating global shrinkage (alpha, lambda) from
// relative group shrinkage.
struct PenaltyConfig {
  double alpha = 0.5;
  double lambda_global = 1.0;
  double lambda1 = 0.5;
  double lambda2 = 0.25;
  std::vector<std::vector<double>> multipliers;

  static PenaltyConfig make(double alpha, double lambda_global,
                            const PartitionSet& partitions) {
    PenaltyConfig config;
    config.alpha = alpha;
    config.lambda_global = lambda_global;
    const PenaltyPair pair = reparametrize(alpha, lambda_global);
    config.lambda1 = pair.lambda1;
    config.lambda2 = pair.lambda2;
    for (const auto& part : partitions.partitions) {
      config.multipliers.emplace_back(static_cast<std::size_t>(part.group_count()), 1.0);
    }
    return config;
  }

  // Largest |sum_g |G(g)| log mult_g| over partitions (zero when calibrated).
  double calibration_residual(const PartitionSet& partitions) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < partitions.partitions.size(); ++k) {
      const auto sizes = partitions.partitions[k].group_sizes();
      double logsum = 0.0;
      for (std::size_t g = 0; g < sizes.size(); ++g) {
        logsum += sizes[g] * std::log(multipliers[k][g]);
      }
      worst = std::max(worst, std::abs(logsum));
    }
    return worst;
  }

  void check(const PartitionSet& partitions, double tol = 1e-8) const {
    if (multipliers.size() != partitions.partitions.size()) {
      throw validation_error("penalty config: multiplier vectors do not match partitions");
    }
    for (std::size_t k = 0; k < multipliers.size(); ++k) {
      if (static_cast<int>(multipliers[k].size()) !=
          partitions.partitions[k].group_count()) {
        throw validation_error("penalty config: multiplier count does not match groups of '" +
                               partitions.partitions[k].name + "'");
      }
      for (double v : multipliers[k]) {
        if (!(v > 0.0) || !std::isfinite(v)) {
          throw validation_error("penalty config: multipliers must be positive and finite");
        }
      }
    }
    if (calibration_residual(partitions) > tol) {
      throw validation_error("penalty config: multipliers violate the geometric-mean calibration");
    }
  }
};

// Per-feature multiplier: the product over partitions of the multiplier of
// the group containing the feature. With a single partition this is simply
// the group multiplier.
inline Eigen::VectorXd expand_multipliers(const PartitionSet& partitions,
                                          const PenaltyConfig& config) {
  if (partitions.partitions.empty()) {
    throw validation_error("expand_multipliers: no partitions");
  }
  if (config.multipliers.size() != partitions.partitions.size()) {
    throw validation_error("expand_multipliers: multiplier vectors do not match partitions");
  }
  const std::size_t p = partitions.partitions.front().assignment.size();
  Eigen::VectorXd out = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < partitions.partitions.size(); ++k) {
    const auto& part = partitions.partitions[k];
    if (part.assignment.size() != p) {
      throw validation_error("expand_multipliers: partitions cover different feature counts");
    }
    if (static_cast<int>(config.multipliers[k].size()) != part.group_count()) {
      throw validation_error("expand_multipliers: multiplier count does not match groups of '" +
                             part.name + "'");
    }
    for (std::size_t j = 0; j < p; ++j) {
      out[static_cast<Eigen::Index>(j)] *=
          config.multipliers[k][static_cast<std::size_t>(part.assignment[j])];
    }
  }
  return out;
}

}  // namespace groupenet
