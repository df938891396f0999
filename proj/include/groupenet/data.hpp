#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "groupenet/errors.hpp"

namespace groupenet {

// Per-column location/scale recorded when a feature matrix is standardized,
// kept so fitted models can score raw (unstandardized) inputs later.
struct ScaleInfo {
  Eigen::VectorXd mean;   // column means
  Eigen::VectorXd scale;  // root mean square of the centered column (1/n divisor)

  bool empty() const { return mean.size() == 0; }
};

// Standardizes every column to zero mean and unit mean square, i.e.
// (1/n) sum x_ij = 0 and (1/n) sum x_ij^2 = 1 (divisor n, not n-1).
// Throws validation_error on a constant column, naming it.
inline std::pair<Eigen::MatrixXd, ScaleInfo> standardize(
    const Eigen::MatrixXd& raw, const std::vector<std::string>* names = nullptr) {
  const Eigen::Index n = raw.rows();
  const Eigen::Index p = raw.cols();
  if (n < 1 || p < 1) throw validation_error("standardize: empty matrix");
  ScaleInfo info;
  info.mean = raw.colwise().mean();
  Eigen::MatrixXd out = raw.rowwise() - info.mean.transpose();
  info.scale =
      (out.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(info.scale[j] > 0.0) || !std::isfinite(info.scale[j])) {
      const std::string label =
          (names != nullptr && j < static_cast<Eigen::Index>(names->size()))
              ? (*names)[static_cast<std::size_t>(j)]
              : "column " + std::to_string(j);
      throw validation_error("standardize: constant column '" + label + "'");
    }
  }
  out.array().rowwise() /= info.scale.transpose().array();
  return {std::move(out), std::move(info)};
}

// Applies a previously recorded standardization to new raw data.
inline Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& raw,
                                             const ScaleInfo& info) {
  if (raw.cols() != info.mean.size()) {
    throw validation_error("apply_standardization: expected " +
                           std::to_string(info.mean.size()) + " columns, got " +
                           std::to_string(raw.cols()));
  }
  Eigen::MatrixXd out = raw.rowwise() - info.mean.transpose();
  out.array().rowwise() /= info.scale.transpose().array();
  return out;
}

// Binomial regression data: a standardized penalized feature block, success
// counts y_i with trial counts m_i, and an optional unpenalized covariate
// block (intercept column of ones first when requested). Immutable after
// construction; safe to share across concurrent fits.
struct Dataset {
  Eigen::MatrixXd features;     // n x p, standardized
  Eigen::VectorXd successes;    // y_i
  Eigen::VectorXd trials;       // m_i
  Eigen::MatrixXd unpenalized;  // n x u (u may be 0)
  std::vector<std::string> feature_names;
  ScaleInfo scale;              // standardization of the penalized block
  ScaleInfo unpenalized_scale;  // empty unless covariates were standardized

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }
  Eigen::Index u() const { return unpenalized.cols(); }

  // Builds a dataset from raw inputs: standardizes the penalized block and
  // validates responses. Unpenalized covariates are left untouched unless
  // standardize_unpenalized is set, in which case every non-constant column
  // is scaled (constant columns, e.g. the intercept, are kept as-is).
  static Dataset standardized(const Eigen::MatrixXd& raw_features,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                              Eigen::MatrixXd unpen = {},
                              std::vector<std::string> names = {},
                              bool standardize_unpenalized = false) {
    const Eigen::Index n = raw_features.rows();
    const Eigen::Index p = raw_features.cols();
    if (n < 2) throw validation_error("dataset: need at least 2 observations");
    if (p < 1) throw validation_error("dataset: need at least 1 feature");
    if (names.empty()) {
      names.reserve(static_cast<std::size_t>(p));
      for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(names.size()) != p) {
      throw validation_error("dataset: feature name count does not match p");
    }
    std::unordered_set<std::string> seen;
    for (const auto& nm : names) {
      if (!seen.insert(nm).second) {
        throw validation_error("dataset: duplicate feature name '" + nm + "'");
      }
    }
    validate_response(y, m, n);
    if (unpen.size() != 0 && unpen.rows() != n) {
      throw validation_error("dataset: unpenalized covariate rows do not match n");
    }
    Dataset d;
    auto [stdf, info] = standardize(raw_features, &names);
    d.features = std::move(stdf);
    d.scale = std::move(info);
    d.successes = y;
    d.trials = m;
    d.unpenalized = std::move(unpen);
    d.feature_names = std::move(names);
    if (standardize_unpenalized && d.unpenalized.cols() > 0) {
      const Eigen::Index uu = d.unpenalized.cols();
      d.unpenalized_scale.mean = Eigen::VectorXd::Zero(uu);
      d.unpenalized_scale.scale = Eigen::VectorXd::Ones(uu);
      for (Eigen::Index k = 0; k < uu; ++k) {
        const double mu = d.unpenalized.col(k).mean();
        const double ms = std::sqrt(
            (d.unpenalized.col(k).array() - mu).square().sum() / static_cast<double>(n));
        if (ms > 0.0) {  // constant columns (intercept) stay untouched
          d.unpenalized_scale.mean[k] = mu;
          d.unpenalized_scale.scale[k] = ms;
          d.unpenalized.col(k) = (d.unpenalized.col(k).array() - mu) / ms;
        }
      }
    }
    return d;
  }

  // Wraps already-prepared matrices without rescaling. Only shapes and
  // response bounds are validated; used by tests and generators that build
  // standardized data directly.
  static Dataset from_parts(Eigen::MatrixXd features, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& m, Eigen::MatrixXd unpen = {},
                            std::vector<std::string> names = {}) {
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (n < 1 || p < 1) throw validation_error("dataset: empty feature matrix");
    validate_response(y, m, n);
    if (unpen.size() != 0 && unpen.rows() != n) {
      throw validation_error("dataset: unpenalized covariate rows do not match n");
    }
    if (names.empty()) {
      for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    }
    Dataset d;
    d.features = std::move(features);
    d.successes = y;
    d.trials = m;
    d.unpenalized = std::move(unpen);
    d.feature_names = std::move(names);
    return d;
  }

  // Undoes the stored standardization of the penalized block.
  Eigen::MatrixXd raw_features() const {
    if (scale.empty()) return features;
    Eigen::MatrixXd raw = features;
    raw.array().rowwise() *= scale.scale.transpose().array();
    raw.rowwise() += scale.mean.transpose();
    return raw;
  }

  // Row subset; with restandardize the penalized block is standardized anew
  // on the selected rows (used for cross-validation folds).
  Dataset subset(const std::vector<int>& rows, bool restandardize) const {
    const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd f(k, p());
    Eigen::VectorXd y(k), m(k);
    Eigen::MatrixXd up(k, u());
    for (Eigen::Index i = 0; i < k; ++i) {
      f.row(i) = features.row(rows[static_cast<std::size_t>(i)]);
      y[i] = successes[rows[static_cast<std::size_t>(i)]];
      m[i] = trials[rows[static_cast<std::size_t>(i)]];
      if (u() > 0) up.row(i) = unpenalized.row(rows[static_cast<std::size_t>(i)]);
    }
    if (restandardize) {
      return Dataset::standardized(f, y, m, std::move(up), feature_names);
    }
    return Dataset::from_parts(std::move(f), y, m, std::move(up), feature_names);
  }

 private:
  static void validate_response(const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                                Eigen::Index n) {
    if (y.size() != n || m.size() != n) {
      throw validation_error("dataset: response length does not match n");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(m[i] >= 1.0) || std::floor(m[i]) != m[i]) {
        throw validation_error("dataset: trial count m must be a positive integer at row " +
                               std::to_string(i));
      }
      if (!(y[i] >= 0.0) || y[i] > m[i] || std::floor(y[i]) != y[i]) {
        throw validation_error("dataset: need 0 <= y <= m with integer y at row " +
                               std::to_string(i));
      }
    }
  }
};

// Fitted coefficients on the standardized feature scale, plus the scaling
// needed to score raw inputs (intercept first in the unpenalized part).
struct Coefficients {
  Eigen::VectorXd unpenalized_part;
  Eigen::VectorXd penalized_part;
  ScaleInfo scale;
  ScaleInfo unpenalized_scale;

  // Slopes per raw feature unit (undo the column scaling).
  Eigen::VectorXd raw_penalized() const {
    if (scale.empty()) return penalized_part;
    return penalized_part.array() / scale.scale.array();
  }

  Eigen::Index active_size() const {
    return (penalized_part.array() != 0.0).count();
  }
};

}  // namespace groupenet
