#include "peiv/smoother.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "peiv/errors.hpp"
#include "peiv/linalg.hpp"

namespace peiv {

Eigen::VectorXd SmoothResult::stacked_means() const {
  Eigen::VectorXd x(means.size());
  for (Eigen::Index k = 0; k < means.cols(); ++k)
    x.segment(k * means.rows(), means.rows()) = means.col(k);
  return x;
}

namespace {

// Normal equations Psi^T Sigma^-1 Psi (block tridiagonal) and
// Psi^T Sigma^-1 Ybar, accumulated from the block-sparse slices.
struct NormalSystem {
  BlockTridiag T;
  Eigen::VectorXd rhs;
};

NormalSystem normal_equations(const BatchSystem& sys,
                              const Eigen::VectorXd& theta) {
  if (theta.size() != sys.d)
    throw ContractViolation("smooth_batch: theta length mismatch");
  const Eigen::Index n = sys.n;
  const Eigen::Index K = sys.N + 1;

  // Merge Psi(theta) = Psi_base + sum theta_i Psi_i per (block row, col).
  std::map<std::pair<int, int>, Eigen::MatrixXd> merged;
  auto add = [&](const BlockEntry& e, double scale) {
    auto key = std::make_pair(e.row, e.col);
    auto it = merged.find(key);
    if (it == merged.end())
      merged.emplace(key, scale * e.value);
    else
      it->second += scale * e.value;
  };
  for (const auto& e : sys.psi_base) add(e, 1.0);
  for (Eigen::Index i = 0; i < sys.d; ++i)
    for (const auto& e : sys.psi_basis[i]) add(e, theta[i]);

  // Re-bucket by block row.
  std::vector<std::vector<std::pair<int, const Eigen::MatrixXd*>>> rows(
      sys.block_row_count());
  for (const auto& [key, value] : merged)
    rows[key.first].emplace_back(key.second, &value);

  NormalSystem ns;
  ns.T.diag.assign(K, Eigen::MatrixXd::Zero(n, n));
  ns.T.upper.assign(K - 1, Eigen::MatrixXd::Zero(n, n));
  ns.rhs = Eigen::VectorXd::Zero(n * K);

  for (int br = 0; br < sys.block_row_count(); ++br) {
    const Eigen::MatrixXd& W = sys.block_weight(br);
    const Eigen::Index off = sys.block_row_offset(br);
    const Eigen::Index h = sys.block_row_height(br);
    const Eigen::VectorXd wy = W * sys.ybar.segment(off, h);
    for (const auto& [c1, B1] : rows[br]) {
      ns.rhs.segment(c1 * n, n).noalias() += B1->transpose() * wy;
      for (const auto& [c2, B2] : rows[br]) {
        if (c1 == c2)
          ns.T.diag[c1].noalias() += B1->transpose() * W * (*B2);
        else if (c2 == c1 + 1)
          ns.T.upper[c1].noalias() += B1->transpose() * W * (*B2);
        else if (c2 != c1 - 1)
          throw NumericalError(
              "smooth_batch: normal matrix is not block tridiagonal");
      }
    }
  }
  return ns;
}

}  // namespace

Eigen::VectorXd smooth_batch(const BatchSystem& sys,
                             const Eigen::VectorXd& theta) {
  NormalSystem ns = normal_equations(sys, theta);
  return solve_block_tridiag(ns.T, ns.rhs);
}

BatchSmooth smooth_batch_with_cov(const BatchSystem& sys,
                                  const Eigen::VectorXd& theta) {
  NormalSystem ns = normal_equations(sys, theta);
  BatchSmooth out;
  out.xhat = solve_block_tridiag(ns.T, ns.rhs);
  const Eigen::Index dim = sys.cols();
  out.cov = solve_block_tridiag(
      ns.T, Eigen::MatrixXd(Eigen::MatrixXd::Identity(dim, dim)));
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

namespace {

struct ForwardPass {
  Eigen::MatrixXd xf;                // n x (N+1), filtered means
  std::vector<Eigen::MatrixXd> Pf;   // filtered covariances
  Eigen::MatrixXd xp;                // n x N, predicted means x_{k+1|k}
  std::vector<Eigen::MatrixXd> Pp;   // predicted covariances
  double loglik = 0.0;
  bool jittered = false;
};

Eigen::MatrixXd jitter_if_singular(const Eigen::MatrixXd& M, bool* flagged) {
  if (M.size() == 0) return M;
  if (min_eigenvalue(M) > 0.0) return M;
  *flagged = true;
  return M + kPdJitter * Eigen::MatrixXd::Identity(M.rows(), M.cols());
}

ForwardPass kalman_forward(const ParamAffineModel& model,
                           const Eigen::VectorXd& theta,
                           const Eigen::MatrixXd& Y,
                           const GaussianDensity& prior, bool store) {
  if (prior.dim() != model.n)
    throw ContractViolation("smoother: prior dimension must equal n");
  if (Y.cols() > 0 && Y.rows() != model.m)
    throw ContractViolation("smoother: Y row count must equal m");
  const Eigen::Index N = Y.cols();
  const Eigen::Index n = model.n, m = model.m;

  ForwardPass fp;
  const Eigen::MatrixXd F = eval_F(model, theta);
  const Eigen::MatrixXd H = eval_H(model, theta);
  const Eigen::MatrixXd Qj = jitter_if_singular(model.Q, &fp.jittered);
  const Eigen::MatrixXd Rj = jitter_if_singular(model.R, &fp.jittered);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  if (store) {
    fp.xf.resize(n, N + 1);
    fp.Pf.resize(N + 1);
    fp.xp.resize(n, N);
    fp.Pp.resize(N);
  }

  Eigen::VectorXd x = prior.mean;
  Eigen::MatrixXd P = prior.cov;
  if (store) {
    fp.xf.col(0) = x;
    fp.Pf[0] = P;
  }

  // Scratch the loop reuses; nothing below allocates per step.
  Eigen::VectorXd xpred(n), nu(m);
  Eigen::MatrixXd Ppred(n, n), S(m, m), HP(m, n), K(n, m), IKH(n, n),
      Ptmp(n, n);
  Eigen::LLT<Eigen::MatrixXd> lltS(m);
  const double log2pi = std::log(2.0 * M_PI);

  for (Eigen::Index k = 0; k < N; ++k) {
    xpred.noalias() = F * x;
    Ptmp.noalias() = P * F.transpose();
    Ppred.noalias() = F * Ptmp;
    Ppred += Qj;

    HP.noalias() = H * Ppred;
    S.noalias() = HP * H.transpose();
    S += Rj;
    lltS.compute(S);
    if (lltS.info() != Eigen::Success)
      throw NumericalError("smoother: innovation covariance is not PD");

    nu = Y.col(k);
    nu.noalias() -= H * xpred;

    double logdet = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      logdet += std::log(lltS.matrixLLT()(i, i));
    logdet *= 2.0;
    fp.loglik -=
        0.5 * (m * log2pi + logdet + nu.dot(lltS.solve(nu)));

    K = lltS.solve(HP).transpose();  // Ppred H^T S^{-1}
    x = xpred;
    x.noalias() += K * nu;
    IKH = I;
    IKH.noalias() -= K * H;
    // Joseph form keeps P symmetric PSD even at tiny R.
    Ptmp.noalias() = IKH * Ppred;
    P.noalias() = Ptmp * IKH.transpose();
    Ptmp.noalias() = K * Rj;
    P.noalias() += Ptmp * K.transpose();
    P = 0.5 * (P + P.transpose()).eval();

    if (store) {
      fp.xp.col(k) = xpred;
      fp.Pp[k] = Ppred;
      fp.xf.col(k + 1) = x;
      fp.Pf[k + 1] = P;
    }
  }
  return fp;
}

Eigen::LLT<Eigen::MatrixXd> llt_with_retry(const Eigen::MatrixXd& M) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    const double bump = 1e-14 * std::max(1.0, M.trace());
    llt.compute(M + bump * Eigen::MatrixXd::Identity(M.rows(), M.cols()));
    if (llt.info() != Eigen::Success)
      throw NumericalError("smoother: predicted covariance is not PD");
  }
  return llt;
}

}  // namespace

SmoothResult smooth_rts(const ParamAffineModel& model,
                        const Eigen::VectorXd& theta, const Eigen::MatrixXd& Y,
                        const GaussianDensity& prior) {
  const Eigen::Index N = Y.cols();
  const Eigen::Index n = model.n;
  ForwardPass fp = kalman_forward(model, theta, Y, prior, true);
  const Eigen::MatrixXd F = eval_F(model, theta);

  SmoothResult sr;
  sr.loglik = fp.loglik;
  sr.jittered = fp.jittered;
  sr.means.resize(n, N + 1);
  sr.covs.resize(N + 1);
  sr.lag1.resize(N);

  sr.means.col(N) = fp.xf.col(N);
  sr.covs[N] = fp.Pf[N];
  for (Eigen::Index k = N; k-- > 0;) {
    // Backward gain G_k = P_{k|k} F^T P_{k+1|k}^{-1}.
    auto llt = llt_with_retry(fp.Pp[k]);
    Eigen::MatrixXd G = llt.solve(F * fp.Pf[k]).transpose();
    sr.means.col(k) =
        fp.xf.col(k) + G * (sr.means.col(k + 1) - fp.xp.col(k));
    Eigen::MatrixXd P =
        fp.Pf[k] + G * (sr.covs[k + 1] - fp.Pp[k]) * G.transpose();
    sr.covs[k] = 0.5 * (P + P.transpose());
    sr.lag1[k] = G * sr.covs[k + 1];  // cov(x_k, x_{k+1} | Y)
  }
  return sr;
}

double loglik(const ParamAffineModel& model, const Eigen::VectorXd& theta,
              const Eigen::MatrixXd& Y, const GaussianDensity& prior) {
  return kalman_forward(model, theta, Y, prior, false).loglik;
}

}  // namespace peiv
