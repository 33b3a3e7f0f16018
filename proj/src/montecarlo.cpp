#include "peiv/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "peiv/errors.hpp"
#include "peiv/linalg.hpp"

namespace peiv {

std::string to_string(Method method) {
  switch (method) {
    case Method::Peiv: return "peiv";
    case Method::JmapMl: return "jmapml";
    case Method::Em: return "em";
    case Method::Aseks: return "aseks";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "peiv") return Method::Peiv;
  if (name == "jmapml") return Method::JmapMl;
  if (name == "em") return Method::Em;
  if (name == "aseks") return Method::Aseks;
  throw ConfigError("unknown method '" + name +
                    "' (expected peiv|jmapml|em|aseks)");
}

std::vector<double> quantiles(std::vector<double> samples,
                              const std::vector<double>& probs) {
  if (samples.empty())
    throw ContractViolation("quantiles: empty sample set");
  std::sort(samples.begin(), samples.end());
  std::vector<double> out;
  out.reserve(probs.size());
  const auto nm1 = static_cast<double>(samples.size() - 1);
  for (double p : probs) {
    if (p < 0.0 || p > 1.0)
      throw ContractViolation("quantiles: probability outside [0, 1]");
    const double h = nm1 * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    out.push_back(samples[lo] + (h - lo) * (samples[hi] - samples[lo]));
  }
  return out;
}

double rmse(const std::vector<Eigen::VectorXd>& estimates,
            const Eigen::VectorXd& truth) {
  if (estimates.empty()) throw ContractViolation("rmse: empty sample set");
  double s = 0.0;
  for (const auto& e : estimates) s += (e - truth).squaredNorm();
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

Ellipse error_ellipse(const std::vector<Eigen::Vector2d>& samples,
                      double confidence) {
  if (samples.size() < 3)
    throw ContractViolation("error_ellipse: need at least 3 samples");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw ContractViolation("error_ellipse: confidence must be in (0, 1)");

  Ellipse e;
  e.center.setZero();
  for (const auto& z : samples) e.center += z;
  e.center /= static_cast<double>(samples.size());
  e.cov.setZero();
  for (const auto& z : samples) {
    const Eigen::Vector2d r = z - e.center;
    e.cov += r * r.transpose();
  }
  e.cov /= static_cast<double>(samples.size() - 1);
  // Chi-square(2) inverse CDF has the closed form -2 log(1 - p).
  e.radius_scale = -2.0 * std::log1p(-confidence);
  const double tr = e.cov.trace();
  e.degenerate = !(e.cov.determinant() > 1e-15 * std::max(tr * tr, 1e-300));
  return e;
}

namespace {

struct RepOutcome {
  bool failed = true;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd x0_err;
  double reported_var = 0.0;
  double theta_err0 = 0.0;  // first-component error, for the ellipse
};

struct RepInput {
  Eigen::MatrixXd Y;
  GaussianDensity prior;
  GaussianDensity theta_prior;
  Eigen::VectorXd x0_true;
};

// Everything random about replication r at batch size N is derived from
// (seed, N, r) streams, so scheduling cannot change results.
RepInput make_replication(const McConfig& cfg, int N, int r,
                          const Eigen::MatrixXd& stationary) {
  const auto base =
      static_cast<std::uint64_t>(N) * 0x100000000ULL +
      static_cast<std::uint64_t>(r) * 4ULL;
  const std::uint64_t traj_seed = Rng::derive(cfg.seed, base);

  GaussianDensity x0_draw(Eigen::VectorXd::Zero(cfg.model.n), stationary);
  Trajectory traj = simulate(cfg.model, cfg.theta_true, x0_draw, N, traj_seed);

  Rng prior_rng(cfg.seed, base + 1);
  Eigen::VectorXd theta1 =
      cfg.theta_true + psd_sqrt(cfg.sigma_theta) *
                           prior_rng.gaussian_vector(cfg.model.d);

  RepInput in;
  in.theta_prior = GaussianDensity(theta1, cfg.sigma_theta);
  switch (cfg.prior_mode) {
    case PriorMode::kFirstMeasurement: {
      if (cfg.model.m != cfg.model.n)
        throw ConfigError(
            "prior_mode first_measurement requires m == n");
      in.prior = GaussianDensity(traj.measurements.col(0), 2.0 * stationary);
      break;
    }
    case PriorMode::kStationary:
      in.prior =
          GaussianDensity(Eigen::VectorXd::Zero(cfg.model.n), stationary);
      break;
    case PriorMode::kFixed:
      if (!cfg.fixed_prior)
        throw ConfigError("prior_mode fixed requires a prior density");
      in.prior = *cfg.fixed_prior;
      break;
  }

  if (cfg.use_first_measurement) {
    in.Y = traj.measurements;
    in.x0_true = traj.states.col(0);
  } else {
    // y_1 seeds the prior only; the batch starts one step later.
    in.Y = traj.measurements.rightCols(N - 1);
    in.x0_true = traj.states.col(1);
  }
  return in;
}

RepOutcome run_one(const McConfig& cfg, Method method, const RepInput& in) {
  RepOutcome out;
  try {
    JointEstimate est;
    switch (method) {
      case Method::Peiv:
        est = peiv(cfg.model, in.Y, in.prior, in.theta_prior, cfg.iter);
        break;
      case Method::JmapMl: {
        IterConfig it = cfg.iter;
        it.theta_init = in.theta_prior.mean;
        est = jmap_ml(cfg.model, in.Y, in.prior, it);
        break;
      }
      case Method::Em: {
        IterConfig it = cfg.iter;
        it.theta_init = in.theta_prior.mean;
        est = em(cfg.model, in.Y, in.prior, it);
        break;
      }
      case Method::Aseks: {
        AseksOptions opts;
        opts.theta_process_noise = cfg.aseks_theta_noise;
        est = aseks(cfg.model, in.Y, in.prior, in.theta_prior, cfg.iter, opts);
        break;
      }
    }
    const Eigen::VectorXd x0 = est.xhat0();
    if (!est.theta_hat.allFinite() || !x0.allFinite()) return out;
    out.failed = false;
    out.theta_hat = est.theta_hat;
    out.x0_err = x0 - in.x0_true;
    out.theta_err0 = est.theta_hat[0] - cfg.theta_true[0];
    out.reported_var = est.theta_cov.size() > 0 ? est.theta_cov(0, 0) : 0.0;
  } catch (const Error&) {
    // counted as a failure
  }
  return out;
}

void validate(const McConfig& cfg) {
  if (cfg.model.d < 1)
    throw ConfigError("run_mc: model must have at least one parameter");
  if (cfg.theta_true.size() != cfg.model.d)
    throw ConfigError("run_mc: theta_true length must equal d");
  if (cfg.replications < 2)
    throw ConfigError("run_mc: need at least 2 replications");
  if (cfg.batch_sizes.empty())
    throw ConfigError("run_mc: batch size list is empty");
  for (int N : cfg.batch_sizes)
    if (N < 2) throw ConfigError("run_mc: batch sizes must be >= 2");
  if (cfg.sigma_theta.rows() != cfg.model.d ||
      cfg.sigma_theta.cols() != cfg.model.d)
    throw ConfigError("run_mc: sigma_theta must be d x d");
  require_symmetric_psd(cfg.sigma_theta, "sigma_theta");
  if (min_eigenvalue(cfg.sigma_theta) <= 0.0)
    throw ConfigError("run_mc: sigma_theta must be positive definite");
  if (cfg.methods.empty()) throw ConfigError("run_mc: no methods enabled");
}

}  // namespace

McReport run_mc(const McConfig& cfg) {
  validate(cfg);
  const Eigen::MatrixXd stationary = stationary_cov(cfg.model, cfg.theta_true);
  const int M = cfg.replications;
  const auto n_sizes = cfg.batch_sizes.size();
  const auto n_methods = cfg.methods.size();

  // outcomes[size][method][replication]
  std::vector<std::vector<std::vector<RepOutcome>>> outcomes(n_sizes);
  for (auto& per_size : outcomes) {
    per_size.resize(n_methods);
    for (auto& v : per_size) v.resize(M);
  }

  const auto total = static_cast<long>(n_sizes) * M;
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      const long job = next.fetch_add(1);
      if (job >= total) break;
      const auto si = static_cast<std::size_t>(job / M);
      const int r = static_cast<int>(job % M);
      const int N = cfg.batch_sizes[si];
      const RepInput in = make_replication(cfg, N, r, stationary);
      for (std::size_t mi = 0; mi < n_methods; ++mi)
        outcomes[si][mi][r] = run_one(cfg, cfg.methods[mi], in);
    }
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Sequential reduction in replication order keeps results independent of
  // the thread count.
  McReport report;
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    for (std::size_t si = 0; si < n_sizes; ++si) {
      const auto& reps = outcomes[si][mi];
      McCell cell;
      cell.method = cfg.methods[mi];
      cell.batch_size = cfg.batch_sizes[si];
      double sum_rep = 0.0, sum_t = 0.0, sum_t2 = 0.0;
      std::vector<Eigen::VectorXd> thetas;
      std::vector<Eigen::VectorXd> x0errs;
      std::vector<double> theta0;
      std::vector<Eigen::Vector2d> errs;
      theta0.reserve(reps.size());
      for (const auto& rep : reps) {
        if (rep.failed) {
          ++cell.failures;
          continue;
        }
        ++cell.effective;
        thetas.push_back(rep.theta_hat);
        x0errs.push_back(rep.x0_err);
        sum_rep += rep.reported_var;
        sum_t += rep.theta_hat[0];
        sum_t2 += rep.theta_hat[0] * rep.theta_hat[0];
        theta0.push_back(rep.theta_hat[0]);
        errs.emplace_back(rep.x0_err[0], rep.theta_err0);
      }
      if (cell.effective > 0) {
        cell.rmse_theta = rmse(thetas, cfg.theta_true);
        cell.rmse_x0 =
            rmse(x0errs, Eigen::VectorXd::Zero(cfg.model.n));
        cell.mean_reported_var = sum_rep / cell.effective;
        const auto q = quantiles(theta0, {0.05, 0.95});
        cell.q05 = q[0];
        cell.q95 = q[1];
      }
      if (cell.effective > 1) {
        const double mean = sum_t / cell.effective;
        cell.var_theta =
            (sum_t2 - cell.effective * mean * mean) / (cell.effective - 1);
      }
      report.cells.push_back(cell);

      if (cell.batch_size == cfg.ellipse_batch_size && errs.size() >= 3) {
        McEllipse me;
        me.method = cfg.methods[mi];
        me.batch_size = cell.batch_size;
        me.ellipse = error_ellipse(errs, cfg.ellipse_confidence);
        report.ellipses.push_back(me);
      }
    }
  }
  return report;
}

}  // namespace peiv
