#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "groupenet/errors.hpp"

namespace groupenet {

// Chance-corrected agreement between a selected-feature indicator vector s
// and the true nonzero indicator vector t:
//   kappa = (f_o - f_e) / (1 - f_e)
// with f_o the fraction of matching entries and f_e the expected matching
// fraction under independence. When f_e = 1 (both vectors constant and in
// the same category) the formula is undefined; returns 1 if f_o = 1 else 0
// and sets the degeneracy flag.
inline double cohens_kappa(const std::vector<int>& s, const std::vector<int>& t,
                           bool* degenerate = nullptr) {
  if (degenerate != nullptr) *degenerate = false;
  if (s.size() != t.size() || s.empty()) {
    throw validation_error("cohens_kappa: selection vectors must have equal, positive length");
  }
  const double p = static_cast<double>(s.size());
  double sum_s = 0.0, sum_t = 0.0, match = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if ((s[j] != 0 && s[j] != 1) || (t[j] != 0 && t[j] != 1)) {
      throw validation_error("cohens_kappa: entries must be 0 or 1");
    }
    sum_s += s[j];
    sum_t += t[j];
    if (s[j] == t[j]) match += 1.0;
  }
  const double f_o = match / p;
  const double f_e = (sum_s * sum_t + (p - sum_s) * (p - sum_t)) / (p * p);
  if (f_e >= 1.0) {
    if (degenerate != nullptr) *degenerate = true;
    return f_o >= 1.0 ? 1.0 : 0.0;
  }
  return (f_o - f_e) / (1.0 - f_e);
}

// Mean squared error p^-1 sum (beta_j - beta_hat_j)^2.
inline double mse_coefficients(const Eigen::VectorXd& beta_hat,
                               const Eigen::VectorXd& beta_true) {
  if (beta_hat.size() != beta_true.size() || beta_hat.size() == 0) {
    throw validation_error("mse_coefficients: coefficient vectors must have equal length");
  }
  return (beta_hat - beta_true).squaredNorm() / static_cast<double>(beta_hat.size());
}

// Mann-Whitney AUC: the probability that a random case scores above a random
// non-case, ties counted 1/2. Computed from midranks.
inline double auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const Eigen::Index n = scores.size();
  if (labels.size() != n || n < 2) {
    throw validation_error("auc: scores and labels must have equal length >= 2");
  }
  double n_pos = 0.0, n_neg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw validation_error("auc: labels must be 0 or 1");
    }
    (labels[i] == 1.0 ? n_pos : n_neg) += 1.0;
  }
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw validation_error("auc: need at least one case and one non-case");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && scores[order[static_cast<std::size_t>(j + 1)]] ==
                            scores[order[static_cast<std::size_t>(i)]]) {
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (Eigen::Index k = i; k <= j; ++k) {
      if (labels[order[static_cast<std::size_t>(k)]] == 1.0) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

// Brier skill score: 1 - sum (y - yhat)^2 / sum (y - ybar)^2, the fraction of
// squared-error improvement over the outcome-mean reference model. At most 1;
// negative when predictions are worse than the reference.
inline double brier_skill(const Eigen::VectorXd& predictions,
                          const Eigen::VectorXd& outcomes) {
  const Eigen::Index n = outcomes.size();
  if (predictions.size() != n || n < 2) {
    throw validation_error("brier_skill: predictions and outcomes must have equal length >= 2");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (outcomes[i] != 0.0 && outcomes[i] != 1.0) {
      throw validation_error("brier_skill: outcomes must be 0 or 1");
    }
  }
  const double ybar = outcomes.mean();
  const double denom = (outcomes.array() - ybar).square().sum();
  if (denom <= 0.0) {
    throw validation_error("brier_skill: constant outcomes give a zero reference score");
  }
  const double num = (outcomes - predictions).squaredNorm();
  return 1.0 - num / denom;
}

}  // namespace groupenet
