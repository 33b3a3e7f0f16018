#ifndef PEIV_LINALG_HPP
#define PEIV_LINALG_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace peiv {

inline constexpr double kPdJitter = 1e-12;

bool is_symmetric(const Eigen::MatrixXd& M, double tol = 1e-10);

double min_eigenvalue(const Eigen::MatrixXd& M);

// Throws ContractViolation unless M is symmetric with eigenvalues >= -tol.
void require_symmetric_psd(const Eigen::MatrixXd& M, const std::string& name);

// Symmetric square root of a PSD matrix; negative rounding noise is clamped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M);

// Inverse of a symmetric positive (semi)definite matrix via Cholesky.
// A singular but PSD input gets kPdJitter * I added and *jittered set.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& M, bool* jittered = nullptr);

// Spectral radius by power iteration (1e-12 tolerance, 1000 iteration cap).
// Growth rates are averaged in log space so complex-pair oscillation settles.
double spectral_radius(const Eigen::MatrixXd& F);

// Symmetric block-tridiagonal system: diag blocks D_0..D_K (n x n each) and
// super-diagonal blocks U_0..U_{K-1} with block (k+1,k) = U_k^T implied.
struct BlockTridiag {
  std::vector<Eigen::MatrixXd> diag;
  std::vector<Eigen::MatrixXd> upper;
};

// Block Cholesky sweep, O(K n^3). Throws NumericalError if a pivot block is
// not positive definite.
Eigen::VectorXd solve_block_tridiag(const BlockTridiag& T,
                                    const Eigen::VectorXd& rhs);

// Same factorization applied to many right-hand sides (used to materialize
// the full covariance in diagnostics and tests).
Eigen::MatrixXd solve_block_tridiag(const BlockTridiag& T,
                                    const Eigen::MatrixXd& rhs);

}  // namespace peiv

#endif  // PEIV_LINALG_HPP
