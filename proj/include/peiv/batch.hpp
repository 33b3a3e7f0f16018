#ifndef PEIV_BATCH_HPP
#define PEIV_BATCH_HPP

#include <vector>

#include <Eigen/Dense>

#include "peiv/model.hpp"

namespace peiv {

// One dense block of a block-sparse matrix, addressed by block coordinates.
struct BlockEntry {
  int row = 0;  // block row
  int col = 0;  // block column (state index 0..N)
  Eigen::MatrixXd value;
};

// The stacked regression system
//
//   Ybar = Psi(theta) X + eta,   Psi(theta) = Psi_base + sum_i theta_i Psi_i
//
// with Ybar = [Y; 0; m0] and cov(eta) = diag(R..., Q..., P0). Block rows are
// ordered measurement rows (height m, one per y_k), transition rows
// (height n), then the prior row. Block columns are the states x_0..x_N
// (width n). The Kronecker vectorization D(X) vec(Psi) from the parameter
// regression is never materialized; Psi_base plays the role of h and the
// Psi_i columns the role of B.
struct BatchSystem {
  Eigen::Index N = 0;
  Eigen::Index n = 0, m = 0, d = 0;
  Eigen::VectorXd ybar;                            // length L = mN + nN + n
  std::vector<BlockEntry> psi_base;                // sorted by block row
  std::vector<std::vector<BlockEntry>> psi_basis;  // d lists, sorted by row
  Eigen::MatrixXd Rinv, Qinv, P0inv;               // Sigma_eta^{-1} blocks
  bool jittered = false;  // a noise block needed jitter to invert

  Eigen::Index rows() const { return m * N + n * N + n; }
  Eigen::Index cols() const { return n * (N + 1); }
  int block_row_count() const { return static_cast<int>(2 * N + 1); }

  Eigen::Index block_row_offset(int br) const {
    const auto b = static_cast<Eigen::Index>(br);
    return b < N ? m * b : m * N + n * (b - N);
  }
  Eigen::Index block_row_height(int br) const {
    return static_cast<Eigen::Index>(br) < N ? m : n;
  }
  // Sigma_eta^{-1} block acting on block row br.
  const Eigen::MatrixXd& block_weight(int br) const {
    if (static_cast<Eigen::Index>(br) < N) return Rinv;
    if (static_cast<Eigen::Index>(br) < 2 * N) return Qinv;
    return P0inv;
  }
};

// Assembles the system for measurements Y (m x N, columns y_1..y_N) and the
// initial-state prior. N = 0 (prior row only) is allowed.
BatchSystem assemble(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                     const GaussianDensity& prior);

// (Psi_base + sum_i theta_i Psi_i) X without forming anything dense.
Eigen::VectorXd apply_Psi(const BatchSystem& sys, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& X);

// Psi(theta) X rewritten as Phi(X) theta + c(X).
struct Regressor {
  Eigen::MatrixXd Phi;  // L x d, column i = Psi_i X
  Eigen::VectorXd c;    // Psi_base X
};

Regressor regressor_Phi(const BatchSystem& sys, const Eigen::VectorXd& X);

// Sigma_eta^{-1} r, applied block-row-wise.
Eigen::VectorXd apply_weight(const BatchSystem& sys, const Eigen::VectorXd& r);
Eigen::MatrixXd apply_weight(const BatchSystem& sys, const Eigen::MatrixXd& R);

// ||r||^2 weighted by Sigma_eta^{-1}.
double weighted_sq_norm(const BatchSystem& sys, const Eigen::VectorXd& r);

}  // namespace peiv

#endif  // PEIV_BATCH_HPP
