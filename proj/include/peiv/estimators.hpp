#ifndef PEIV_ESTIMATORS_HPP
#define PEIV_ESTIMATORS_HPP

#include <vector>

#include <Eigen/Dense>

#include "peiv/batch.hpp"
#include "peiv/model.hpp"
#include "peiv/smoother.hpp"

namespace peiv {

// Iteration settings shared by the coordinate-wise estimators.
struct IterConfig {
  int max_iter = 100;
  double tol = 1e-8;            // relative theta-change threshold
  Eigen::VectorXd theta_init;   // empty means zeros(d)
};

// Joint state and parameter estimate returned by every method.
struct JointEstimate {
  Eigen::VectorXd theta_hat;           // empty when d = 0
  Eigen::MatrixXd theta_cov;
  SmoothResult state;                  // smoothed states at theta_hat
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
  // ASEKS also reports the smoothed parameter at k = 0 (theta_hat itself is
  // the k = N component); empty for the other methods.
  Eigen::VectorXd theta_hat_initial;

  Eigen::VectorXd xhat0() const { return state.means.col(0); }
};

// Weighted least squares for theta given a fixed state stack:
// theta = (Phi^T W Phi)^{-1} Phi^T W (Ybar - c), cov = (Phi^T W Phi)^{-1}.
// Throws UnidentifiableError when Phi^T W Phi is rank deficient.
struct ParamLsResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd cov;
};
ParamLsResult param_ls(const BatchSystem& sys, const Eigen::VectorXd& X);

// One regularized theta update of the PEIV iteration:
// theta = N^{-1} (Sigma_theta^{-1} theta1 + Phi^T W (Ybar - c)),
// N = Sigma_theta^{-1} + Phi^T W Phi. Exposed for the limit tests.
struct PeivUpdate {
  Eigen::VectorXd theta;
  Eigen::MatrixXd precision;  // N
};
PeivUpdate peiv_theta_update(const BatchSystem& sys, const Eigen::VectorXd& X,
                             const GaussianDensity& theta_prior);

// Exact M-step of EM: expectations of the parameter normal equations under
// the smoothed state posterior. The trace corrections consume only the
// marginal and lag-one covariance blocks.
struct EmUpdate {
  Eigen::VectorXd theta;
  Eigen::MatrixXd normal;  // E[Phi^T W Phi]
  Eigen::VectorXd rhs;     // E[Phi^T W (Ybar - c(X))]
};
EmUpdate em_update(const BatchSystem& sys, const Eigen::MatrixXd& means,
                   const std::vector<Eigen::MatrixXd>& covs,
                   const std::vector<Eigen::MatrixXd>& lag1);

// Coordinate iteration of Kalman smoothing and parameter least squares.
JointEstimate jmap_ml(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                      const GaussianDensity& prior, const IterConfig& cfg);

// Expectation maximization ascending log P(Y | theta).
JointEstimate em(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                 const GaussianDensity& prior, const IterConfig& cfg);

// Partial errors-in-variables estimator: smoothing alternated with the
// regularized least squares around the parameter prior. theta_prior.mean is
// both the initialization and the regularization center; its covariance must
// be positive definite.
JointEstimate peiv(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                   const GaussianDensity& prior,
                   const GaussianDensity& theta_prior, const IterConfig& cfg);

// Augmented-state extended Kalman smoother baseline: z = [x; theta] with a
// parameter random walk of variance theta_process_noise (0 keeps the
// parameter constant), one linearized forward-backward pass.
struct AseksOptions {
  double theta_process_noise = 0.0;
};
JointEstimate aseks(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                    const GaussianDensity& prior,
                    const GaussianDensity& theta_prior, const IterConfig& cfg,
                    const AseksOptions& opts = {});

// Jacobians of the augmented dynamics/measurement maps at (x, theta),
// exposed for finite-difference checks.
Eigen::MatrixXd aseks_dynamics_jacobian(const ParamAffineModel& model,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& theta);
Eigen::MatrixXd aseks_measurement_jacobian(const ParamAffineModel& model,
                                           const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& theta);

}  // namespace peiv

#endif  // PEIV_ESTIMATORS_HPP
