#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "groupenet/data.hpp"
#include "groupenet/errors.hpp"
#include "groupenet/partition.hpp"
#include "groupenet/penalty.hpp"

namespace groupenet {

inline double expit(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double log1pexp(double z) {
  if (z > 35.0) return z + std::exp(-z);
  if (z < -35.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

// Mean of a Polya-Gamma PG(m, c) variable: (m / (2c)) tanh(c / 2), with the
// analytic limit m/4 at c = 0. Strictly decreasing in c, bounded in (0, m/4].
inline double pg_mean(double m, double c) {
  const double t = 0.5 * c;
  if (t < 1e-4) {
    const double t2 = t * t;
    return 0.25 * m * (1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0);
  }
  return 0.25 * m * std::tanh(t) / t;
}

enum class CovMode { kAuto, kDense, kFactored };

class PosteriorCov;
struct CovMeanResult;

CovMeanResult update_covariance_mean(const Dataset& data, const Eigen::VectorXd& penalties,
                                     double lambda1, double lambda2,
                                     const Eigen::VectorXd& c, const Eigen::VectorXd& chi,
                                     CovMode mode = CovMode::kAuto);

// Posterior covariance of the coefficient block. Held either as a dense
// matrix or in factored form: with the precision split into blocks
//
//   Sigma^-1 = [ Xu' W Xu            Xu' W Xr      ]   =: [ A  B  ]
//              [ Xr' W Xu     Xr' W Xr + diag(d)   ]      [ B' C  ]
//
// (W the Polya-Gamma weight diagonal, d the penalized prior precisions), the
// penalized block C is inverted through the n x n Woodbury kernel
// M = W^-1 + Xr D^-1 Xr' and the unpenalized block through the u x u Schur
// complement S = A - B C^-1 B'. No p x p matrix is ever formed; diagonals and
// row quadratic forms come from cached n- and u-sized pieces.
class PosteriorCov {
 public:
  PosteriorCov() = default;

  // Wraps an explicit dense covariance (tests and degenerate stubs).
  static PosteriorCov from_dense(Eigen::MatrixXd sigma, Eigen::Index u = 0) {
    PosteriorCov cov;
    cov.factored_ = false;
    cov.u_ = u;
    cov.diag_ = sigma.diagonal();
    cov.sigma_ = std::move(sigma);
    return cov;
  }

  bool factored() const { return factored_; }

  // diag(Sigma), unpenalized block first.
  const Eigen::VectorXd& diagonal() const { return diag_; }

  // x_i' Sigma x_i for every data row (x_i spans both blocks).
  Eigen::VectorXd quad_form_rows(const Dataset& data) const {
    if (!factored_) {
      const Eigen::Index n = data.n();
      Eigen::VectorXd q(n);
      const Eigen::Index u = data.u();
      const Eigen::Index p = data.p();
      Eigen::VectorXd xi(u + p);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (u > 0) xi.head(u) = data.unpenalized.row(i);
        xi.tail(p) = data.features.row(i);
        q[i] = xi.dot(sigma_ * xi);
      }
      return q;
    }
    // diag(Xr C^-1 Xr') = diag(T) - rowdot(T, (M^-1 T)')
    Eigen::VectorXd q =
        t_.diagonal() - (t_.array() * mninv_t_.transpose().array()).rowwise().sum().matrix();
    if (u_ > 0) {
      // + Xu S^-1 Xu' - 2 Xu S^-1 (Xr E)' + (Xr E) S^-1 (Xr E)'  (diagonals)
      q += (hs_.array() * data.unpenalized.array()).rowwise().sum().matrix();
      q -= 2.0 * (hs_.array() * re_.array()).rowwise().sum().matrix();
      q += ((re_ * sa_inv_).array() * re_.array()).rowwise().sum().matrix();
    }
    return q;
  }

  // Materializes the full (u+p) x (u+p) covariance. Intended for small
  // problems and for cross-checking the factored algebra.
  Eigen::MatrixXd dense(const Dataset& data) const {
    if (!factored_) return sigma_;
    const Eigen::Index p = data.p();
    const Eigen::Index u = u_;
    Eigen::MatrixXd rd = data.features * dinv_.asDiagonal();
    Eigen::MatrixXd cinv = -rd.transpose() * mn_llt_.solve(rd);
    cinv.diagonal() += dinv_;
    Eigen::MatrixXd sigma(u + p, u + p);
    if (u > 0) {
      sigma.topLeftCorner(u, u) = sa_inv_;
      sigma.topRightCorner(u, p) = -sa_inv_ * e_.transpose();
      sigma.bottomLeftCorner(p, u) = sigma.topRightCorner(u, p).transpose();
      sigma.bottomRightCorner(p, p) = cinv + e_ * sa_inv_ * e_.transpose();
    } else {
      sigma = cinv;
    }
    return sigma;
  }

 private:
  friend CovMeanResult update_covariance_mean(const Dataset&, const Eigen::VectorXd&,
                                              double, double, const Eigen::VectorXd&,
                                              const Eigen::VectorXd&, CovMode);

  bool factored_ = false;
  Eigen::Index u_ = 0;
  Eigen::VectorXd diag_;

  // dense representation
  Eigen::MatrixXd sigma_;

  // factored representation
  Eigen::VectorXd dinv_;                 // 1 / d over the penalized block
  Eigen::LLT<Eigen::MatrixXd> mn_llt_;   // M = W^-1 + Xr D^-1 Xr'
  Eigen::MatrixXd t_;                    // Xr D^-1 Xr'
  Eigen::MatrixXd mninv_t_;              // M^-1 T
  Eigen::MatrixXd e_;                    // C^-1 B'        (p x u)
  Eigen::MatrixXd sa_inv_;               // S^-1           (u x u)
  Eigen::MatrixXd re_;                   // Xr E           (n x u)
  Eigen::MatrixXd hs_;                   // Xu S^-1        (n x u)
};

struct CovMeanResult {
  PosteriorCov sigma;
  Eigen::VectorXd mu;
};

// One covariance/mean update of the variational cycle:
//   Sigma = (X' W X + lambda2 L + (lambda1 sqrt(lambda2)/2) L Z)^-1,
//   mu    = Sigma X' (y - m/2),
// with W the PG means from c, L the expanded multiplier diagonal (zero over
// the unpenalized block) and Z = diag(chi_j^{-1/2}). Factored (Woodbury +
// blockwise) inversion is used when u + p > n, or as forced by `mode`.
inline CovMeanResult update_covariance_mean(const Dataset& data,
                                            const Eigen::VectorXd& penalties,
                                            double lambda1, double lambda2,
                                            const Eigen::VectorXd& c,
                                            const Eigen::VectorXd& chi,
                                            CovMode mode) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const Eigen::Index u = data.u();
  if (penalties.size() != p || chi.size() != p || c.size() != n) {
    throw validation_error("update_covariance_mean: state dimensions do not match data");
  }

  Eigen::VectorXd omega(n);
  for (Eigen::Index i = 0; i < n; ++i) omega[i] = pg_mean(data.trials[i], c[i]);

  // Prior precision of penalized feature j.
  const double l1sl2 = 0.5 * lambda1 * std::sqrt(lambda2);
  Eigen::VectorXd d(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    d[j] = penalties[j] * lambda2 + penalties[j] * l1sl2 / std::sqrt(chi[j]);
    if (!(d[j] > 0.0) || !std::isfinite(d[j])) {
      throw numerical_error("penalized block: nonpositive prior precision at feature " +
                            std::to_string(j));
    }
  }

  const Eigen::VectorXd w_resid = data.successes - 0.5 * data.trials;
  const bool use_factored =
      mode == CovMode::kFactored || (mode == CovMode::kAuto && u + p > n);

  CovMeanResult out;
  out.sigma.u_ = u;
  out.mu.resize(u + p);

  if (!use_factored) {
    Eigen::MatrixXd xall(n, u + p);
    if (u > 0) xall.leftCols(u) = data.unpenalized;
    xall.rightCols(p) = data.features;
    Eigen::MatrixXd prec = xall.transpose() * omega.asDiagonal() * xall;
    prec.diagonal().tail(p) += d;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) {
      throw numerical_error(u > 0 ? "unpenalized block: collinear covariates make the system singular"
                                  : "penalized block: singular precision matrix");
    }
    out.sigma.factored_ = false;
    out.sigma.sigma_ = llt.solve(Eigen::MatrixXd::Identity(u + p, u + p));
    out.sigma.diag_ = out.sigma.sigma_.diagonal();
    out.mu = llt.solve(xall.transpose() * w_resid);
  } else {
    PosteriorCov& s = out.sigma;
    s.factored_ = true;
    s.dinv_ = d.cwiseInverse();

    const Eigen::MatrixXd& xr = data.features;
    Eigen::MatrixXd rd = xr * s.dinv_.asDiagonal();  // n x p
    s.t_.noalias() = rd * xr.transpose();            // Xr D^-1 Xr'
    Eigen::MatrixXd mn = s.t_;
    mn.diagonal() += omega.cwiseInverse();
    s.mn_llt_.compute(mn);
    if (s.mn_llt_.info() != Eigen::Success) {
      throw numerical_error("penalized block: Woodbury kernel is singular");
    }
    s.mninv_t_ = s.mn_llt_.solve(s.t_);

    // C^-1 applied to p x k right-hand sides.
    const auto cinv_apply = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
      Eigen::MatrixXd dv = s.dinv_.asDiagonal() * v;
      Eigen::MatrixXd inner = s.mn_llt_.solve(xr * dv);
      return dv - s.dinv_.asDiagonal() * (xr.transpose() * inner);
    };

    const Eigen::VectorXd wr = xr.transpose() * w_resid;
    Eigen::VectorXd cinv_wr = cinv_apply(wr);

    // diag(C^-1) through the n x n solve, column by column.
    Eigen::MatrixXd mninv_xr = s.mn_llt_.solve(xr);
    Eigen::VectorXd diag_c =
        s.dinv_.array() -
        s.dinv_.array().square() *
            (xr.array() * mninv_xr.array()).colwise().sum().transpose().array();

    if (u > 0) {
      const Eigen::MatrixXd& xu = data.unpenalized;
      Eigen::MatrixXd omega_xu = omega.asDiagonal() * xu;            // n x u
      Eigen::MatrixXd bt = xr.transpose() * omega_xu;                // B' = Xr' W Xu
      s.e_ = cinv_apply(bt);                                         // C^-1 B'
      Eigen::MatrixXd a = xu.transpose() * omega_xu;                 // A
      Eigen::MatrixXd schur = a - bt.transpose() * s.e_;             // S = A - B C^-1 B'
      Eigen::LLT<Eigen::MatrixXd> sa_llt(schur);
      if (sa_llt.info() != Eigen::Success) {
        throw numerical_error("unpenalized block: collinear covariates make the Schur complement singular");
      }
      s.sa_inv_ = sa_llt.solve(Eigen::MatrixXd::Identity(u, u));
      const Eigen::VectorXd wu = xu.transpose() * w_resid;
      Eigen::VectorXd mu_u = s.sa_inv_ * (wu - s.e_.transpose() * wr);
      out.mu.head(u) = mu_u;
      out.mu.tail(p) = cinv_wr - s.e_ * mu_u;
      s.re_ = xr * s.e_;
      s.hs_ = xu * s.sa_inv_;
      s.diag_.resize(u + p);
      s.diag_.head(u) = s.sa_inv_.diagonal();
      s.diag_.tail(p) =
          diag_c + ((s.e_ * s.sa_inv_).array() * s.e_.array()).rowwise().sum().matrix();
    } else {
      out.mu = cinv_wr;
      s.diag_ = diag_c;
    }
  }

  if (!out.mu.allFinite()) {
    throw numerical_error("update_covariance_mean: non-finite posterior mean");
  }
  return out;
}

// Polya-Gamma tilt parameters: c_i = sqrt(x_i' Sigma x_i + (x_i' mu)^2).
inline Eigen::VectorXd update_c(const Dataset& data, const PosteriorCov& sigma,
                                const Eigen::VectorXd& mu) {
  const Eigen::Index u = data.u();
  const Eigen::Index p = data.p();
  if (mu.size() != u + p) {
    throw validation_error("update_c: mean length does not match data");
  }
  Eigen::VectorXd lin = data.features * mu.tail(p);
  if (u > 0) lin += data.unpenalized * mu.head(u);
  Eigen::VectorXd quad = sigma.quad_form_rows(data);
  Eigen::VectorXd c(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    c[i] = std::sqrt(std::max(quad[i], 0.0) + lin[i] * lin[i]);
  }
  return c;
}

// Mixing parameters: chi_j = mult_j * lambda2 * (Sigma_jj + mu_j^2) over the
// penalized block.
inline Eigen::VectorXd update_chi(const Eigen::VectorXd& penalties, double lambda2,
                                  const PosteriorCov& sigma, const Eigen::VectorXd& mu) {
  const Eigen::Index p = penalties.size();
  const Eigen::VectorXd diag_pen = sigma.diagonal().tail(p);
  const Eigen::VectorXd mu_pen = mu.tail(p);
  return penalties.array() * lambda2 *
         (diag_pen.array() + mu_pen.array().square());
}

struct VbOptions {
  double tol = 1e-6;
  int max_iter = 500;
  CovMode mode = CovMode::kAuto;
  bool track_objective = true;
};

// Variational posterior of the augmented model: Gaussian q(beta) with moments
// (mu, Sigma), PG(m_i, c_i) tilt parameters and GIG mixing parameters chi_j.
struct VariationalState {
  Eigen::VectorXd mu;   // u + p, unpenalized block first
  PosteriorCov sigma;
  Eigen::VectorXd c;    // n
  Eigen::VectorXd chi;  // p, penalized features only
  int iteration_count = 0;
  bool converged = false;
  // Penalized log-likelihood at the variational mean, one entry per
  // iteration. Monitoring only; convergence is declared on parameter
  // stability.
  std::vector<double> objective_trace;
};

namespace detail {

inline double penalized_loglik_at(const Dataset& data, const Eigen::VectorXd& penalties,
                                  double lambda1, double lambda2,
                                  const Eigen::VectorXd& mu) {
  const Eigen::Index p = data.p();
  const Eigen::Index u = data.u();
  Eigen::VectorXd eta = data.features * mu.tail(p);
  if (u > 0) eta += data.unpenalized * mu.head(u);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    ll += data.successes[i] * eta[i] - data.trials[i] * log1pexp(eta[i]);
  }
  double pen = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double b = mu[u + j];
    pen += 0.5 * lambda1 * std::sqrt(penalties[j]) * std::abs(b) +
           0.5 * lambda2 * penalties[j] * b * b;
  }
  return ll - pen;
}

inline double max_rel_change(const Eigen::VectorXd& now, const Eigen::VectorXd& prev) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < now.size(); ++i) {
    worst = std::max(worst, std::abs(now[i] - prev[i]) / (1.0 + std::abs(prev[i])));
  }
  return worst;
}

}  // namespace detail

// Iterates the cyclic updates (covariance/mean, tilt, mixing) until the
// maximum relative change in mu and in the second moments Sigma_jj + mu_j^2
// falls below tol, or max_iter is reached (converged flag false).
// Initialization: mu = 0, c = 0 (PG limit), chi_j = mult_j * lambda2.
inline VariationalState run_vb(const Dataset& data, const Eigen::VectorXd& penalties,
                               double lambda1, double lambda2,
                               const std::optional<VariationalState>& init = {},
                               const VbOptions& opts = {}) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const Eigen::Index u = data.u();
  if (!(opts.tol > 0.0)) throw validation_error("run_vb: tol must be positive");
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(penalties[j] > 0.0)) {
      throw validation_error("run_vb: penalty multipliers must be positive");
    }
  }

  VariationalState state;
  Eigen::VectorXd prev_mu, prev_m2;
  bool have_prev = false;
  if (init) {
    if (init->mu.size() != u + p || init->chi.size() != p || init->c.size() != n) {
      throw validation_error("run_vb: init state dimensions do not match data");
    }
    state.mu = init->mu;
    state.c = init->c;
    state.chi = init->chi;
    prev_mu = state.mu;
    prev_m2 = init->sigma.diagonal().size() == u + p
                  ? (init->sigma.diagonal().tail(p).array() +
                     init->mu.tail(p).array().square()).matrix().eval()
                  : Eigen::VectorXd();
    have_prev = prev_m2.size() == p;
  } else {
    state.mu = Eigen::VectorXd::Zero(u + p);
    state.c = Eigen::VectorXd::Zero(n);
    state.chi = penalties * lambda2;
  }

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    CovMeanResult cm;
    try {
      cm = update_covariance_mean(data, penalties, lambda1, lambda2, state.c, state.chi,
                                  opts.mode);
    } catch (const numerical_error& e) {
      throw numerical_error(std::string(e.what()) + " (iteration " + std::to_string(iter) + ")");
    }
    state.sigma = std::move(cm.sigma);
    state.mu = std::move(cm.mu);
    state.c = update_c(data, state.sigma, state.mu);
    state.chi = update_chi(penalties, lambda2, state.sigma, state.mu);
    state.iteration_count = iter;

    if (!state.chi.allFinite() || !state.c.allFinite() || !(state.chi.minCoeff() > 0.0)) {
      throw numerical_error("run_vb: non-finite variational parameters at iteration " +
                            std::to_string(iter));
    }

    Eigen::VectorXd m2 = state.sigma.diagonal().tail(p).array() +
                         state.mu.tail(p).array().square();
    if (opts.track_objective) {
      state.objective_trace.push_back(
          detail::penalized_loglik_at(data, penalties, lambda1, lambda2, state.mu));
    }
    if (have_prev) {
      const double delta = std::max(detail::max_rel_change(state.mu, prev_mu),
                                    detail::max_rel_change(m2, prev_m2));
      if (delta < opts.tol) {
        state.converged = true;
        return state;
      }
    }
    prev_mu = state.mu;
    prev_m2 = std::move(m2);
    have_prev = true;
  }
  state.converged = false;
  return state;
}

// Spec-level entry point: expands the per-partition multipliers and runs the
// cycle with the config's global penalties.
inline VariationalState run_vb(const Dataset& data, const PartitionSet& partitions,
                               const PenaltyConfig& config,
                               const std::optional<VariationalState>& init = {},
                               const VbOptions& opts = {}) {
  partitions.validate(data.p());
  const Eigen::VectorXd penalties = expand_multipliers(partitions, config);
  return run_vb(data, penalties, config.lambda1, config.lambda2, init, opts);
}

// Posterior-mean coefficients with the dataset's scaling attached, so the
// variational fit can score raw inputs like any other model.
inline Coefficients coefficients_from_state(const VariationalState& state,
                                            const Dataset& data) {
  Coefficients coef;
  coef.unpenalized_part = state.mu.head(data.u());
  coef.penalized_part = state.mu.tail(data.p());
  coef.scale = data.scale;
  coef.unpenalized_scale = data.unpenalized_scale;
  return coef;
}

// expit(x_i' beta) per row of raw (unstandardized) features. If the model has
// one more unpenalized coefficient than supplied covariate columns, the first
// coefficient is treated as an intercept and a column of ones is implied.
inline Eigen::VectorXd predict_probability(const Coefficients& coef,
                                           const Eigen::MatrixXd& raw_features,
                                           const Eigen::MatrixXd& unpenalized = {}) {
  const Eigen::Index n = raw_features.rows();
  if (raw_features.cols() != coef.penalized_part.size()) {
    throw validation_error("predict_probability: feature count does not match coefficients");
  }
  const Eigen::Index u = coef.unpenalized_part.size();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  if (u > 0) {
    Eigen::MatrixXd up;
    if (unpenalized.cols() == u) {
      up = unpenalized;
    } else if (unpenalized.cols() == u - 1) {
      up.resize(n, u);
      up.col(0).setOnes();
      if (u > 1) up.rightCols(u - 1) = unpenalized;
    } else {
      throw validation_error("predict_probability: unpenalized covariate count does not match model");
    }
    if (up.rows() != n) {
      throw validation_error("predict_probability: unpenalized covariate rows do not match features");
    }
    if (!coef.unpenalized_scale.empty()) {
      up = apply_standardization(up, coef.unpenalized_scale);
    }
    eta += up * coef.unpenalized_part;
  }
  Eigen::MatrixXd x = coef.scale.empty() ? raw_features
                                         : apply_standardization(raw_features, coef.scale);
  eta += x * coef.penalized_part;
  Eigen::VectorXd prob(n);
  for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(eta[i]);
  return prob;
}

}  // namespace groupenet
