#include "peiv/linalg.hpp"

#include <cmath>

#include "peiv/errors.hpp"

namespace peiv {

bool is_symmetric(const Eigen::MatrixXd& M, double tol) {
  if (M.rows() != M.cols()) return false;
  if (M.size() == 0) return true;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double min_eigenvalue(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M,
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void require_symmetric_psd(const Eigen::MatrixXd& M, const std::string& name) {
  if (M.rows() != M.cols())
    throw ContractViolation(name + " must be square");
  if (!is_symmetric(M))
    throw ContractViolation(name + " must be symmetric");
  if (M.size() == 0) return;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if (min_eigenvalue(M) < -1e-10 * scale)
    throw ContractViolation(name + " must be positive semidefinite");
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return M;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& M, bool* jittered) {
  const Eigen::Index n = M.rows();
  if (jittered) *jittered = false;
  if (n == 0) return M;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success || min_eigenvalue(M) <= 0.0) {
    Eigen::MatrixXd Mj = M + kPdJitter * Eigen::MatrixXd::Identity(n, n);
    llt.compute(Mj);
    if (llt.info() != Eigen::Success)
      throw NumericalError("matrix is not positive semidefinite");
    if (jittered) *jittered = true;
  }
  return llt.solve(Eigen::MatrixXd::Identity(n, n));
}

double spectral_radius(const Eigen::MatrixXd& F) {
  if (F.rows() != F.cols())
    throw ContractViolation("spectral_radius: matrix must be square");
  const Eigen::Index n = F.rows();
  if (n == 0) return 0.0;

  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] += 1e-3 * static_cast<double>(i);
  v.normalize();

  double log_sum = 0.0;
  int steps = 0;
  double est = 0.0;
  for (int it = 1; it <= 1000; ++it) {
    Eigen::VectorXd w = F * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;  // hit a nilpotent direction
    v = w / nw;
    log_sum += std::log(nw);
    ++steps;
    const double next = std::exp(log_sum / steps);
    if (it > 8 && std::abs(next - est) <= 1e-12 * std::max(1.0, next))
      return next;
    est = next;
  }
  return est;
}

namespace {

struct TridiagFactor {
  std::vector<Eigen::LLT<Eigen::MatrixXd>> pivots;  // LLT of Schur blocks S_k
  const BlockTridiag* T = nullptr;
};

TridiagFactor factorize(const BlockTridiag& T) {
  const std::size_t K = T.diag.size();
  if (K == 0) throw ContractViolation("block tridiagonal system is empty");
  if (T.upper.size() + 1 != K)
    throw ContractViolation("block tridiagonal: diag/upper size mismatch");

  TridiagFactor f;
  f.T = &T;
  f.pivots.reserve(K);
  Eigen::MatrixXd S = T.diag[0];
  for (std::size_t k = 0; k < K; ++k) {
    if (k > 0) {
      // S_k = D_k - U_{k-1}^T S_{k-1}^{-1} U_{k-1}
      Eigen::MatrixXd W = f.pivots[k - 1].solve(T.upper[k - 1]);
      S = T.diag[k] - T.upper[k - 1].transpose() * W;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
      throw NumericalError("block tridiagonal system is not positive definite");
    f.pivots.push_back(std::move(llt));
  }
  return f;
}

Eigen::MatrixXd solve_factored(const TridiagFactor& f,
                               const Eigen::MatrixXd& rhs) {
  const BlockTridiag& T = *f.T;
  const std::size_t K = T.diag.size();
  const Eigen::Index n = T.diag[0].rows();
  if (rhs.rows() != static_cast<Eigen::Index>(K) * n)
    throw ContractViolation("block tridiagonal: rhs length mismatch");

  // Forward substitution: z_k = b_k - U_{k-1}^T S_{k-1}^{-1} z_{k-1}.
  Eigen::MatrixXd z = rhs;
  for (std::size_t k = 1; k < K; ++k) {
    Eigen::MatrixXd prev = f.pivots[k - 1].solve(z.middleRows((k - 1) * n, n));
    z.middleRows(k * n, n).noalias() -= T.upper[k - 1].transpose() * prev;
  }
  // Back substitution: x_k = S_k^{-1} (z_k - U_k x_{k+1}).
  Eigen::MatrixXd x = z;
  x.middleRows((K - 1) * n, n) = f.pivots[K - 1].solve(z.middleRows((K - 1) * n, n));
  for (std::size_t k = K - 1; k-- > 0;) {
    Eigen::MatrixXd t = z.middleRows(k * n, n);
    t.noalias() -= T.upper[k] * x.middleRows((k + 1) * n, n);
    x.middleRows(k * n, n) = f.pivots[k].solve(t);
  }
  return x;
}

}  // namespace

Eigen::VectorXd solve_block_tridiag(const BlockTridiag& T,
                                    const Eigen::VectorXd& rhs) {
  return solve_factored(factorize(T), rhs);
}

Eigen::MatrixXd solve_block_tridiag(const BlockTridiag& T,
                                    const Eigen::MatrixXd& rhs) {
  return solve_factored(factorize(T), rhs);
}

}  // namespace peiv
