#include "peiv/model.hpp"

#include <string>
#include <utility>

#include "peiv/errors.hpp"
#include "peiv/linalg.hpp"

namespace peiv {

GaussianDensity::GaussianDensity(Eigen::VectorXd mean_in,
                                 Eigen::MatrixXd cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ContractViolation("GaussianDensity: mean/cov dimensions disagree");
  require_symmetric_psd(cov, "GaussianDensity.cov");
}

Eigen::VectorXd GaussianDensity::sample(Rng& rng) const {
  return mean + psd_sqrt(cov) * rng.gaussian_vector(mean.size());
}

ParamAffineModel::ParamAffineModel(std::vector<Eigen::MatrixXd> F_basis_in,
                                   std::vector<Eigen::MatrixXd> H_basis_in,
                                   Eigen::MatrixXd Q_in, Eigen::MatrixXd R_in)
    : F_basis(std::move(F_basis_in)),
      H_basis(std::move(H_basis_in)),
      Q(std::move(Q_in)),
      R(std::move(R_in)) {
  if (F_basis.empty() || H_basis.empty())
    throw ContractViolation("ParamAffineModel: basis lists must hold F_0/H_0");
  if (F_basis.size() != H_basis.size())
    throw ContractViolation(
        "ParamAffineModel: F and H basis lists must have equal length");
  n = F_basis[0].rows();
  m = H_basis[0].rows();
  d = static_cast<Eigen::Index>(F_basis.size()) - 1;
  for (const auto& Fi : F_basis)
    if (Fi.rows() != n || Fi.cols() != n)
      throw ContractViolation("ParamAffineModel: every F_i must be n x n");
  for (const auto& Hi : H_basis)
    if (Hi.rows() != m || Hi.cols() != n)
      throw ContractViolation("ParamAffineModel: every H_i must be m x n");
  // Zero noise is admitted (handled downstream by jitter); indefinite or
  // non-symmetric noise is a construction error.
  require_symmetric_psd(Q, "ParamAffineModel.Q");
  require_symmetric_psd(R, "ParamAffineModel.R");
  if (Q.rows() != n) throw ContractViolation("ParamAffineModel: Q must be n x n");
  if (R.rows() != m) throw ContractViolation("ParamAffineModel: R must be m x m");
}

namespace {

Eigen::MatrixXd eval_affine(const std::vector<Eigen::MatrixXd>& basis,
                            const Eigen::VectorXd& theta, const char* what) {
  if (theta.size() + 1 != static_cast<Eigen::Index>(basis.size()))
    throw ContractViolation(std::string(what) +
                            ": theta length does not match basis count");
  Eigen::MatrixXd M = basis[0];
  for (Eigen::Index i = 0; i < theta.size(); ++i) M += theta[i] * basis[i + 1];
  return M;
}

}  // namespace

Eigen::MatrixXd eval_F(const ParamAffineModel& model,
                       const Eigen::VectorXd& theta) {
  return eval_affine(model.F_basis, theta, "eval_F");
}

Eigen::MatrixXd eval_H(const ParamAffineModel& model,
                       const Eigen::VectorXd& theta) {
  return eval_affine(model.H_basis, theta, "eval_H");
}

Trajectory simulate(const ParamAffineModel& model,
                    const Eigen::VectorXd& theta_true,
                    const GaussianDensity& x0_draw, Eigen::Index N,
                    std::uint64_t seed) {
  if (N < 1) throw ContractViolation("simulate: N must be >= 1");
  if (x0_draw.dim() != model.n)
    throw ContractViolation("simulate: x0 prior dimension mismatch");
  const Eigen::MatrixXd F = eval_F(model, theta_true);
  const Eigen::MatrixXd H = eval_H(model, theta_true);
  const Eigen::MatrixXd Lq = psd_sqrt(model.Q);
  const Eigen::MatrixXd Lr = psd_sqrt(model.R);

  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.states.resize(model.n, N + 1);
  traj.measurements.resize(model.m, N);
  traj.states.col(0) = x0_draw.sample(rng);
  for (Eigen::Index k = 0; k < N; ++k) {
    traj.states.col(k + 1) =
        F * traj.states.col(k) + Lq * rng.gaussian_vector(model.n);
    traj.measurements.col(k) =
        H * traj.states.col(k + 1) + Lr * rng.gaussian_vector(model.m);
  }
  return traj;
}

Eigen::MatrixXd stationary_cov(const ParamAffineModel& model,
                               const Eigen::VectorXd& theta) {
  const Eigen::MatrixXd F = eval_F(model, theta);
  const double rho = spectral_radius(F);
  if (!(rho < 1.0))
    throw NonStationaryError(
        "stationary_cov: spectral radius of F(theta) is >= 1");

  // vec(P) = (I - F (x) F)^{-1} vec(Q); n is small so the n^2 x n^2 solve is
  // the straightforward choice.
  const Eigen::Index n = model.n;
  Eigen::MatrixXd K(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      K.block(i * n, j * n, n, n) = F(i, j) * F;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n * n, n * n) - K;
  Eigen::VectorXd q(Eigen::Map<const Eigen::VectorXd>(model.Q.data(), n * n));
  Eigen::VectorXd p = A.partialPivLu().solve(q);
  Eigen::MatrixXd P(Eigen::Map<const Eigen::MatrixXd>(p.data(), n, n));
  return 0.5 * (P + P.transpose());
}

}  // namespace peiv
