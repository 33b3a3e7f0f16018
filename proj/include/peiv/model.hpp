#ifndef PEIV_MODEL_HPP
#define PEIV_MODEL_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "peiv/rng.hpp"

namespace peiv {

// Gaussian density over a vector, used for the initial-state prior and the
// parameter prior.
struct GaussianDensity {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  GaussianDensity() = default;
  GaussianDensity(Eigen::VectorXd mean_in, Eigen::MatrixXd cov_in);

  Eigen::Index dim() const { return mean.size(); }

  // mean + sqrt(cov) * z with z iid standard normal. Exact for singular
  // covariances (a zero covariance yields the mean).
  Eigen::VectorXd sample(Rng& rng) const;
};

// State-space model whose transition and measurement matrices are affine in
// the parameter vector:
//
//   x_{k+1} = F(theta) x_k + v_k,   v_k ~ N(0, Q)
//   y_k     = H(theta) x_k + e_k,   e_k ~ N(0, R)
//   F(theta) = F_0 + sum_i theta_i F_i,  H(theta) = H_0 + sum_i theta_i H_i
struct ParamAffineModel {
  Eigen::Index n = 0;  // state dimension
  Eigen::Index m = 0;  // measurement dimension
  Eigen::Index d = 0;  // parameter dimension
  std::vector<Eigen::MatrixXd> F_basis;  // d+1 matrices, n x n
  std::vector<Eigen::MatrixXd> H_basis;  // d+1 matrices, m x n
  Eigen::MatrixXd Q;                     // n x n process noise covariance
  Eigen::MatrixXd R;                     // m x m measurement noise covariance

  ParamAffineModel() = default;
  ParamAffineModel(std::vector<Eigen::MatrixXd> F_basis_in,
                   std::vector<Eigen::MatrixXd> H_basis_in,
                   Eigen::MatrixXd Q_in, Eigen::MatrixXd R_in);
};

// Simulated states x_0..x_N and measurements y_1..y_N.
struct Trajectory {
  Eigen::MatrixXd states;        // n x (N+1)
  Eigen::MatrixXd measurements;  // m x N
  std::uint64_t seed = 0;

  Eigen::Index length() const { return measurements.cols(); }
};

Eigen::MatrixXd eval_F(const ParamAffineModel& model,
                       const Eigen::VectorXd& theta);

Eigen::MatrixXd eval_H(const ParamAffineModel& model,
                       const Eigen::VectorXd& theta);

// Draws x_0 from x0_draw and rolls the model forward N steps. The same seed
// reproduces the trajectory bit for bit.
Trajectory simulate(const ParamAffineModel& model,
                    const Eigen::VectorXd& theta_true,
                    const GaussianDensity& x0_draw, Eigen::Index N,
                    std::uint64_t seed);

// Solves P = F(theta) P F(theta)^T + Q. Throws NonStationaryError when the
// spectral radius of F(theta) is >= 1.
Eigen::MatrixXd stationary_cov(const ParamAffineModel& model,
                               const Eigen::VectorXd& theta);

}  // namespace peiv

#endif  // PEIV_MODEL_HPP
