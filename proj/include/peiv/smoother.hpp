#ifndef PEIV_SMOOTHER_HPP
#define PEIV_SMOOTHER_HPP

#include <vector>

#include <Eigen/Dense>

#include "peiv/batch.hpp"
#include "peiv/model.hpp"

namespace peiv {

// Smoothed posterior of the state sequence given all measurements.
struct SmoothResult {
  Eigen::MatrixXd means;              // n x (N+1), columns x_{k|N}
  std::vector<Eigen::MatrixXd> covs;  // N+1 marginals P_{k|N}
  std::vector<Eigen::MatrixXd> lag1;  // N blocks cov(x_k, x_{k+1} | Y)
  double loglik = 0.0;                // log P(Y | theta)
  bool jittered = false;

  Eigen::Index state_count() const { return means.cols(); }
  Eigen::VectorXd stacked_means() const;
};

// MAP state stack from the batch normal equations, solved by a block
// Cholesky sweep over the block-tridiagonal normal matrix.
Eigen::VectorXd smooth_batch(const BatchSystem& sys,
                             const Eigen::VectorXd& theta);

// Same solve plus the full error covariance (Psi^T Sigma_eta^-1 Psi)^{-1},
// materialized column block by column block. Quadratic storage; meant for
// small instances, diagnostics, and tests.
struct BatchSmooth {
  Eigen::VectorXd xhat;
  Eigen::MatrixXd cov;
};
BatchSmooth smooth_batch_with_cov(const BatchSystem& sys,
                                  const Eigen::VectorXd& theta);

// Forward Kalman filter (Joseph-form updates) followed by the backward
// Rauch-Tung-Striebel recursion. Means agree with smooth_batch; marginal and
// lag-one covariances are the block-tridiagonal part of the batch covariance.
SmoothResult smooth_rts(const ParamAffineModel& model,
                        const Eigen::VectorXd& theta, const Eigen::MatrixXd& Y,
                        const GaussianDensity& prior);

// Gaussian log marginal likelihood log P(Y | theta) from the prediction
// error decomposition (forward pass only).
double loglik(const ParamAffineModel& model, const Eigen::VectorXd& theta,
              const Eigen::MatrixXd& Y, const GaussianDensity& prior);

}  // namespace peiv

#endif  // PEIV_SMOOTHER_HPP
