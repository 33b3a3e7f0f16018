#include "peiv/estimators.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "peiv/errors.hpp"
#include "peiv/linalg.hpp"

namespace peiv {

namespace {

double rel_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev) {
  if (prev.size() == 0) return 0.0;
  return (next - prev).norm() / (1.0 + prev.norm());
}

Eigen::VectorXd resolve_init(const IterConfig& cfg, Eigen::Index d,
                             const char* what) {
  if (cfg.theta_init.size() == 0) return Eigen::VectorXd::Zero(d);
  if (cfg.theta_init.size() != d)
    throw ContractViolation(std::string(what) + ": theta_init length mismatch");
  return cfg.theta_init;
}

void check_cfg(const IterConfig& cfg) {
  if (cfg.max_iter < 1)
    throw ContractViolation("IterConfig: max_iter must be >= 1");
  if (!(cfg.tol > 0.0)) throw ContractViolation("IterConfig: tol must be > 0");
}

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": normal matrix is not PD");
  return llt.solve(B);
}

// Fills the estimate with a plain smoother run; shared by the d = 0 paths.
JointEstimate smoother_only(const ParamAffineModel& model,
                            const Eigen::MatrixXd& Y,
                            const GaussianDensity& prior) {
  JointEstimate est;
  est.theta_hat.resize(0);
  est.theta_cov.resize(0, 0);
  est.state = smooth_rts(model, Eigen::VectorXd(), Y, prior);
  est.iterations = 1;
  est.converged = true;
  est.objective_trace = {est.state.loglik};
  return est;
}

}  // namespace

ParamLsResult param_ls(const BatchSystem& sys, const Eigen::VectorXd& X) {
  Regressor reg = regressor_Phi(sys, X);
  ParamLsResult out;
  if (sys.d == 0) {
    out.theta.resize(0);
    out.cov.resize(0, 0);
    return out;
  }
  const Eigen::MatrixXd WPhi = apply_weight(sys, reg.Phi);
  Eigen::MatrixXd A = reg.Phi.transpose() * WPhi;
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::VectorXd b = WPhi.transpose() * (sys.ybar - reg.c);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  if (!(emax > 0.0) || emin <= 1e-12 * std::max(emax, 1.0))
    throw UnidentifiableError(
        "param_ls: regressor is rank deficient, parameter not identifiable");

  out.theta = solve_spd(A, b, "param_ls");
  out.cov = solve_spd(A, Eigen::MatrixXd::Identity(sys.d, sys.d), "param_ls");
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

PeivUpdate peiv_theta_update(const BatchSystem& sys, const Eigen::VectorXd& X,
                             const GaussianDensity& theta_prior) {
  if (theta_prior.dim() != sys.d)
    throw ContractViolation("peiv: theta prior dimension must equal d");
  if (sys.d > 0 && min_eigenvalue(theta_prior.cov) <= 0.0)
    throw ConfigError("peiv: theta prior covariance must be positive definite");

  Regressor reg = regressor_Phi(sys, X);
  const Eigen::MatrixXd WPhi = apply_weight(sys, reg.Phi);
  const Eigen::MatrixXd Sinv = spd_inverse(theta_prior.cov);

  PeivUpdate up;
  up.precision = Sinv + reg.Phi.transpose() * WPhi;
  up.precision = 0.5 * (up.precision + up.precision.transpose()).eval();
  const Eigen::VectorXd rhs =
      Sinv * theta_prior.mean + WPhi.transpose() * (sys.ybar - reg.c);
  up.theta = solve_spd(up.precision, rhs, "peiv");
  return up;
}

namespace {

// Cov(x_b, x_a) from the block-tridiagonal part of the smoothed covariance.
const Eigen::MatrixXd& cov_block(const std::vector<Eigen::MatrixXd>& covs,
                                 const std::vector<Eigen::MatrixXd>& lag1,
                                 int b, int a, Eigen::MatrixXd& scratch) {
  if (b == a) return covs[a];
  if (b == a - 1) return lag1[b];  // cov(x_{a-1}, x_a)
  if (b == a + 1) {
    scratch = lag1[a].transpose();  // cov(x_{a+1}, x_a)
    return scratch;
  }
  throw NumericalError("em_update: needed covariance block beyond lag one");
}

}  // namespace

EmUpdate em_update(const BatchSystem& sys, const Eigen::MatrixXd& means,
                   const std::vector<Eigen::MatrixXd>& covs,
                   const std::vector<Eigen::MatrixXd>& lag1) {
  if (means.cols() != sys.N + 1 || means.rows() != sys.n)
    throw ContractViolation("em_update: mean stack shape mismatch");
  if (static_cast<Eigen::Index>(covs.size()) != sys.N + 1 ||
      static_cast<Eigen::Index>(lag1.size()) != sys.N)
    throw ContractViolation("em_update: covariance list length mismatch");
  const Eigen::Index d = sys.d;

  Eigen::VectorXd X(sys.cols());
  for (Eigen::Index k = 0; k <= sys.N; ++k)
    X.segment(k * sys.n, sys.n) = means.col(k);

  Regressor reg = regressor_Phi(sys, X);
  const Eigen::MatrixXd WPhi = apply_weight(sys, reg.Phi);

  EmUpdate up;
  up.normal = reg.Phi.transpose() * WPhi;
  up.rhs = WPhi.transpose() * (sys.ybar - reg.c);
  if (d == 0) {
    up.theta.resize(0);
    return up;
  }

  // Index the slices per block row: each Psi_i has at most one entry per
  // row, Psi_base at most two.
  const int rows = sys.block_row_count();
  std::vector<std::vector<const BlockEntry*>> base_by_row(rows);
  for (const auto& e : sys.psi_base) base_by_row[e.row].push_back(&e);
  std::vector<std::vector<const BlockEntry*>> basis_by_row(
      static_cast<std::size_t>(d) * rows);
  for (Eigen::Index i = 0; i < d; ++i)
    for (const auto& e : sys.psi_basis[i])
      basis_by_row[i * rows + e.row].push_back(&e);

  Eigen::MatrixXd scratch, inner;
  for (int br = 0; br < rows; ++br) {
    const Eigen::MatrixXd& W = sys.block_weight(br);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (const BlockEntry* ei : basis_by_row[i * rows + br]) {
        const Eigen::MatrixXd EiW = ei->value.transpose() * W;
        // E[Phi^T W Phi] needs + tr(Ei^T W Ej cov(x_cj, x_ci)).
        for (Eigen::Index j = 0; j < d; ++j) {
          for (const BlockEntry* ej : basis_by_row[j * rows + br]) {
            inner.noalias() = EiW * ej->value;
            const Eigen::MatrixXd& C =
                cov_block(covs, lag1, ej->col, ei->col, scratch);
            up.normal(i, j) += inner.cwiseProduct(C.transpose()).sum();
          }
        }
        // E[Phi^T W c(X)] needs the analogous correction against Psi_base.
        for (const BlockEntry* eb : base_by_row[br]) {
          inner.noalias() = EiW * eb->value;
          const Eigen::MatrixXd& C =
              cov_block(covs, lag1, eb->col, ei->col, scratch);
          up.rhs(i) -= inner.cwiseProduct(C.transpose()).sum();
        }
      }
    }
  }

  up.normal = 0.5 * (up.normal + up.normal.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(up.normal);
  const double emax = es.eigenvalues().maxCoeff();
  if (!(emax > 0.0) ||
      es.eigenvalues().minCoeff() <= 1e-12 * std::max(emax, 1.0))
    throw UnidentifiableError("em_update: expected information is singular");
  up.theta = solve_spd(up.normal, Eigen::MatrixXd(up.rhs), "em_update");
  return up;
}

JointEstimate jmap_ml(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                      const GaussianDensity& prior, const IterConfig& cfg) {
  check_cfg(cfg);
  if (model.d == 0) return smoother_only(model, Y, prior);
  const BatchSystem sys = assemble(model, Y, prior);

  JointEstimate est;
  Eigen::VectorXd theta = resolve_init(cfg, model.d, "jmap_ml");
  for (int it = 1; it <= cfg.max_iter; ++it) {
    SmoothResult sr = smooth_rts(model, theta, Y, prior);
    const Eigen::VectorXd X = sr.stacked_means();
    ParamLsResult ls = param_ls(sys, X);
    est.objective_trace.push_back(
        weighted_sq_norm(sys, sys.ybar - apply_Psi(sys, ls.theta, X)));
    const double change = rel_change(ls.theta, theta);
    theta = ls.theta;
    est.theta_cov = ls.cov;
    est.iterations = it;
    if (change < cfg.tol) {
      est.converged = true;
      break;
    }
  }
  est.theta_hat = theta;
  est.state = smooth_rts(model, theta, Y, prior);
  return est;
}

JointEstimate em(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                 const GaussianDensity& prior, const IterConfig& cfg) {
  check_cfg(cfg);
  if (model.d == 0) return smoother_only(model, Y, prior);
  const BatchSystem sys = assemble(model, Y, prior);

  JointEstimate est;
  Eigen::VectorXd theta = resolve_init(cfg, model.d, "em");
  for (int it = 1; it <= cfg.max_iter; ++it) {
    SmoothResult sr = smooth_rts(model, theta, Y, prior);
    est.objective_trace.push_back(sr.loglik);
    EmUpdate up = em_update(sys, sr.means, sr.covs, sr.lag1);
    const double change = rel_change(up.theta, theta);
    theta = up.theta;
    est.theta_cov = solve_spd(
        up.normal, Eigen::MatrixXd::Identity(model.d, model.d), "em");
    est.iterations = it;
    if (change < cfg.tol) {
      est.converged = true;
      break;
    }
  }
  est.theta_hat = theta;
  est.state = smooth_rts(model, theta, Y, prior);
  est.objective_trace.push_back(est.state.loglik);
  return est;
}

JointEstimate peiv(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                   const GaussianDensity& prior,
                   const GaussianDensity& theta_prior, const IterConfig& cfg) {
  check_cfg(cfg);
  if (theta_prior.dim() != model.d)
    throw ContractViolation("peiv: theta prior dimension must equal d");
  if (model.d == 0) return smoother_only(model, Y, prior);
  if (min_eigenvalue(theta_prior.cov) <= 0.0)
    throw ConfigError("peiv: theta prior covariance must be positive definite");
  const BatchSystem sys = assemble(model, Y, prior);
  const Eigen::MatrixXd Sinv = spd_inverse(theta_prior.cov);
  const Eigen::VectorXd& theta1 = theta_prior.mean;

  JointEstimate est;
  Eigen::MatrixXd precision;
  Eigen::VectorXd theta = theta1;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    SmoothResult sr = smooth_rts(model, theta, Y, prior);
    const Eigen::VectorXd X = sr.stacked_means();
    PeivUpdate up = peiv_theta_update(sys, X, theta_prior);
    const Eigen::VectorXd dtheta = up.theta - theta1;
    est.objective_trace.push_back(
        dtheta.dot(Sinv * dtheta) +
        weighted_sq_norm(sys, sys.ybar - apply_Psi(sys, up.theta, X)));
    const double change = rel_change(up.theta, theta);
    theta = up.theta;
    precision = up.precision;
    est.iterations = it;
    if (change < cfg.tol) {
      est.converged = true;
      break;
    }
  }
  est.theta_hat = theta;
  est.theta_cov =
      solve_spd(precision, Eigen::MatrixXd::Identity(model.d, model.d), "peiv");
  est.theta_cov = 0.5 * (est.theta_cov + est.theta_cov.transpose()).eval();
  est.state = smooth_rts(model, theta, Y, prior);
  return est;
}

Eigen::MatrixXd aseks_dynamics_jacobian(const ParamAffineModel& model,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& theta) {
  const Eigen::Index n = model.n, d = model.d;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + d, n + d);
  J.topLeftCorner(n, n) = eval_F(model, theta);
  for (Eigen::Index i = 0; i < d; ++i)
    J.block(0, n + i, n, 1).noalias() = model.F_basis[i + 1] * x;
  J.bottomRightCorner(d, d).setIdentity();
  return J;
}

Eigen::MatrixXd aseks_measurement_jacobian(const ParamAffineModel& model,
                                           const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& theta) {
  const Eigen::Index n = model.n, d = model.d;
  Eigen::MatrixXd J(model.m, n + d);
  J.leftCols(n) = eval_H(model, theta);
  for (Eigen::Index i = 0; i < d; ++i)
    J.block(0, n + i, model.m, 1).noalias() = model.H_basis[i + 1] * x;
  return J;
}

JointEstimate aseks(const ParamAffineModel& model, const Eigen::MatrixXd& Y,
                    const GaussianDensity& prior,
                    const GaussianDensity& theta_prior, const IterConfig& cfg,
                    const AseksOptions& opts) {
  check_cfg(cfg);
  if (theta_prior.dim() != model.d)
    throw ContractViolation("aseks: theta prior dimension must equal d");
  if (prior.dim() != model.n)
    throw ContractViolation("aseks: prior dimension must equal n");
  if (Y.cols() > 0 && Y.rows() != model.m)
    throw ContractViolation("aseks: Y row count must equal m");
  const Eigen::Index n = model.n, m = model.m, d = model.d, na = n + d;
  const Eigen::Index N = Y.cols();

  auto fail_if = [](bool bad, const char* msg) {
    if (bad) throw DivergenceError(msg);
  };

  bool jittered = false;
  Eigen::MatrixXd Qa = Eigen::MatrixXd::Zero(na, na);
  {
    Eigen::MatrixXd Qx = model.Q;
    if (min_eigenvalue(Qx) <= 0.0) {
      Qx += kPdJitter * Eigen::MatrixXd::Identity(n, n);
      jittered = true;
    }
    Qa.topLeftCorner(n, n) = Qx;
    Qa.bottomRightCorner(d, d) =
        opts.theta_process_noise * Eigen::MatrixXd::Identity(d, d);
  }
  Eigen::MatrixXd Rj = model.R;
  if (min_eigenvalue(Rj) <= 0.0) {
    Rj += kPdJitter * Eigen::MatrixXd::Identity(m, m);
    jittered = true;
  }

  // Forward extended Kalman filter on z = [x; theta].
  Eigen::MatrixXd zf(na, N + 1), zp(na, N);
  std::vector<Eigen::MatrixXd> Pf(N + 1), Pp(N), Phis(N);
  zf.col(0) << prior.mean, theta_prior.mean;
  Pf[0] = Eigen::MatrixXd::Zero(na, na);
  Pf[0].topLeftCorner(n, n) = prior.cov;
  Pf[0].bottomRightCorner(d, d) = theta_prior.cov;

  double ll = 0.0;
  const double log2pi = std::log(2.0 * M_PI);
  const Eigen::MatrixXd Ia = Eigen::MatrixXd::Identity(na, na);
  for (Eigen::Index k = 0; k < N; ++k) {
    const Eigen::VectorXd x = zf.col(k).head(n);
    const Eigen::VectorXd th = zf.col(k).tail(d);
    const Eigen::MatrixXd Phi = aseks_dynamics_jacobian(model, x, th);
    Eigen::VectorXd zpred(na);
    zpred << eval_F(model, th) * x, th;  // exact mean propagation
    Eigen::MatrixXd Ppred = Phi * Pf[k] * Phi.transpose() + Qa;

    const Eigen::VectorXd xpred = zpred.head(n);
    const Eigen::VectorXd thpred = zpred.tail(d);
    const Eigen::MatrixXd Ha =
        aseks_measurement_jacobian(model, xpred, thpred);
    Eigen::MatrixXd S = Ha * Ppred * Ha.transpose() + Rj;
    Eigen::LLT<Eigen::MatrixXd> lltS(S);
    fail_if(lltS.info() != Eigen::Success,
            "aseks: innovation covariance is not PD");
    const Eigen::VectorXd nu = Y.col(k) - eval_H(model, thpred) * xpred;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      logdet += std::log(lltS.matrixLLT()(i, i));
    ll -= 0.5 * (m * log2pi + 2.0 * logdet + nu.dot(lltS.solve(nu)));

    const Eigen::MatrixXd K = lltS.solve(Ha * Ppred).transpose();
    zf.col(k + 1) = zpred + K * nu;
    const Eigen::MatrixXd IKH = Ia - K * Ha;
    Eigen::MatrixXd P =
        IKH * Ppred * IKH.transpose() + K * Rj * K.transpose();
    Pf[k + 1] = 0.5 * (P + P.transpose());
    fail_if(!zf.col(k + 1).allFinite() || !Pf[k + 1].allFinite(),
            "aseks: filter produced non-finite values");

    zp.col(k) = zpred;
    Pp[k] = Ppred;
    Phis[k] = Phi;
  }

  // Backward pass.
  Eigen::MatrixXd zs(na, N + 1);
  std::vector<Eigen::MatrixXd> Ps(N + 1), lag(N);
  zs.col(N) = zf.col(N);
  Ps[N] = Pf[N];
  for (Eigen::Index k = N; k-- > 0;) {
    Eigen::LLT<Eigen::MatrixXd> llt(Pp[k]);
    if (llt.info() != Eigen::Success) {
      const double bump = 1e-14 * std::max(1.0, Pp[k].trace());
      llt.compute(Pp[k] + bump * Ia);
      fail_if(llt.info() != Eigen::Success,
              "aseks: predicted covariance is not PD");
    }
    const Eigen::MatrixXd G = llt.solve(Phis[k] * Pf[k]).transpose();
    zs.col(k) = zf.col(k) + G * (zs.col(k + 1) - zp.col(k));
    Eigen::MatrixXd P = Pf[k] + G * (Ps[k + 1] - Pp[k]) * G.transpose();
    Ps[k] = 0.5 * (P + P.transpose());
    lag[k] = G * Ps[k + 1];
    fail_if(!zs.col(k).allFinite() || !Ps[k].allFinite(),
            "aseks: smoother produced non-finite values");
  }

  JointEstimate est;
  est.theta_hat = zs.col(N).tail(d);
  est.theta_hat_initial = zs.col(0).tail(d);
  est.theta_cov = Ps[N].bottomRightCorner(d, d);
  est.iterations = 1;
  est.converged = true;
  est.objective_trace = {ll};
  est.state.means = zs.topRows(n);
  est.state.covs.resize(N + 1);
  est.state.lag1.resize(N);
  for (Eigen::Index k = 0; k <= N; ++k)
    est.state.covs[k] = Ps[k].topLeftCorner(n, n);
  for (Eigen::Index k = 0; k < N; ++k)
    est.state.lag1[k] = lag[k].topLeftCorner(n, n);
  est.state.loglik = ll;
  est.state.jittered = jittered;
  return est;
}

}  // namespace peiv
