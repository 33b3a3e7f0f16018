#include "peiv/batch.hpp"

#include "peiv/errors.hpp"
#include "peiv/linalg.hpp"

namespace peiv {

BatchSystem assemble(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                     const GaussianDensity& prior) {
  if (prior.dim() != model.n)
    throw ContractViolation("assemble: prior dimension must equal n");
  if (Y.cols() > 0 && Y.rows() != model.m)
    throw ContractViolation("assemble: Y row count must equal m");

  BatchSystem sys;
  sys.N = Y.cols();
  sys.n = model.n;
  sys.m = model.m;
  sys.d = model.d;

  bool j1 = false, j2 = false, j3 = false;
  sys.Rinv = spd_inverse(model.R, &j1);
  sys.Qinv = spd_inverse(model.Q, &j2);
  sys.P0inv = spd_inverse(prior.cov, &j3);
  sys.jittered = j1 || j2 || j3;

  const Eigen::Index N = sys.N, n = sys.n, m = sys.m;

  sys.ybar.resize(sys.rows());
  for (Eigen::Index k = 0; k < N; ++k) sys.ybar.segment(m * k, m) = Y.col(k);
  sys.ybar.segment(m * N, n * N).setZero();
  sys.ybar.tail(n) = prior.mean;

  // Base slice: H_0 on the measurement rows, F_0 and -I on the transition
  // rows, I on the prior row. Measurement row k regresses y_{k+1} on state
  // column k+1; the first block column of the measurement part stays zero.
  sys.psi_base.reserve(3 * N + 1);
  for (Eigen::Index k = 0; k < N; ++k)
    sys.psi_base.push_back({static_cast<int>(k), static_cast<int>(k + 1),
                            model.H_basis[0]});
  for (Eigen::Index k = 0; k < N; ++k) {
    sys.psi_base.push_back({static_cast<int>(N + k), static_cast<int>(k),
                            model.F_basis[0]});
    sys.psi_base.push_back({static_cast<int>(N + k), static_cast<int>(k + 1),
                            -Eigen::MatrixXd::Identity(n, n)});
  }
  sys.psi_base.push_back({static_cast<int>(2 * N), 0,
                          Eigen::MatrixXd::Identity(n, n)});

  // Parameter slices hold only the H_i / F_i contributions.
  sys.psi_basis.resize(sys.d);
  for (Eigen::Index i = 0; i < sys.d; ++i) {
    auto& list = sys.psi_basis[i];
    list.reserve(2 * N);
    for (Eigen::Index k = 0; k < N; ++k)
      list.push_back({static_cast<int>(k), static_cast<int>(k + 1),
                      model.H_basis[i + 1]});
    for (Eigen::Index k = 0; k < N; ++k)
      list.push_back({static_cast<int>(N + k), static_cast<int>(k),
                      model.F_basis[i + 1]});
  }
  return sys;
}

namespace {

void accumulate(const BatchSystem& sys, const std::vector<BlockEntry>& entries,
                double scale, const Eigen::VectorXd& X, Eigen::VectorXd& out) {
  const Eigen::Index n = sys.n;
  for (const auto& e : entries) {
    out.segment(sys.block_row_offset(e.row), e.value.rows()).noalias() +=
        scale * (e.value * X.segment(e.col * n, n));
  }
}

}  // namespace

Eigen::VectorXd apply_Psi(const BatchSystem& sys, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& X) {
  if (X.size() != sys.cols())
    throw ContractViolation("apply_Psi: state stack length mismatch");
  if (theta.size() != sys.d)
    throw ContractViolation("apply_Psi: theta length mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sys.rows());
  accumulate(sys, sys.psi_base, 1.0, X, out);
  for (Eigen::Index i = 0; i < sys.d; ++i)
    accumulate(sys, sys.psi_basis[i], theta[i], X, out);
  return out;
}

Regressor regressor_Phi(const BatchSystem& sys, const Eigen::VectorXd& X) {
  if (X.size() != sys.cols())
    throw ContractViolation("regressor_Phi: state stack length mismatch");
  Regressor reg;
  reg.Phi = Eigen::MatrixXd::Zero(sys.rows(), sys.d);
  reg.c = Eigen::VectorXd::Zero(sys.rows());
  accumulate(sys, sys.psi_base, 1.0, X, reg.c);
  for (Eigen::Index i = 0; i < sys.d; ++i) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(sys.rows());
    accumulate(sys, sys.psi_basis[i], 1.0, X, col);
    reg.Phi.col(i) = col;
  }
  return reg;
}

Eigen::VectorXd apply_weight(const BatchSystem& sys,
                             const Eigen::VectorXd& r) {
  if (r.size() != sys.rows())
    throw ContractViolation("apply_weight: residual length mismatch");
  Eigen::VectorXd out(r.size());
  for (int br = 0; br < sys.block_row_count(); ++br) {
    const Eigen::Index off = sys.block_row_offset(br);
    const Eigen::Index h = sys.block_row_height(br);
    out.segment(off, h).noalias() = sys.block_weight(br) * r.segment(off, h);
  }
  return out;
}

Eigen::MatrixXd apply_weight(const BatchSystem& sys,
                             const Eigen::MatrixXd& R) {
  if (R.rows() != sys.rows())
    throw ContractViolation("apply_weight: residual length mismatch");
  Eigen::MatrixXd out(R.rows(), R.cols());
  for (int br = 0; br < sys.block_row_count(); ++br) {
    const Eigen::Index off = sys.block_row_offset(br);
    const Eigen::Index h = sys.block_row_height(br);
    out.middleRows(off, h).noalias() =
        sys.block_weight(br) * R.middleRows(off, h);
  }
  return out;
}

double weighted_sq_norm(const BatchSystem& sys, const Eigen::VectorXd& r) {
  return r.dot(apply_weight(sys, r));
}

}  // namespace peiv
