// Command-line front end: simulate trajectories, run a single estimator, or
// run the full Monte Carlo benchmark. Exit codes: 0 success, 2 usage/config
// error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "peiv/config.hpp"
#include "peiv/errors.hpp"
#include "peiv/io.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  bool quiet = false;
};

void info(const CommonOpts& opts, const std::string& msg) {
  if (!opts.quiet) std::cerr << msg << "\n";
}

int resolve_threads(std::optional<int> flag) {
  if (flag) return std::max(1, *flag);
  if (const char* env = std::getenv("PEIV_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (...) {
      throw peiv::ConfigError("PEIV_THREADS is not an integer");
    }
  }
  return 1;
}

// The simulate command draws x0 from the configured prior when present,
// otherwise from the stationary distribution at theta_true.
peiv::GaussianDensity x0_density(const peiv::ExperimentConfig& cfg) {
  if (cfg.prior) return *cfg.prior;
  return peiv::GaussianDensity(
      Eigen::VectorXd::Zero(cfg.model.n),
      peiv::stationary_cov(cfg.model, cfg.theta_true));
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 int steps, const std::string& out, const CommonOpts& opts) {
  peiv::ExperimentConfig cfg = peiv::load_experiment_config(config_path);
  const std::uint64_t use_seed = seed ? *seed : cfg.seed;
  peiv::Trajectory traj = peiv::simulate(cfg.model, cfg.theta_true,
                                         x0_density(cfg), steps, use_seed);
  peiv::write_trajectory_csv(out, traj);

  nlohmann::json meta;
  meta["config"] = peiv::resolved_json(cfg);
  meta["seed"] = use_seed;
  meta["steps"] = steps;
  peiv::write_json(out + ".meta.json", meta);
  info(opts, "wrote " + out);
  if (opts.quiet) std::cout << out << "\n";
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& method,
                 const std::string& data, const std::string& out,
                 const CommonOpts& opts) {
  peiv::ExperimentConfig cfg = peiv::load_experiment_config(config_path);
  peiv::Trajectory traj =
      peiv::read_trajectory_csv(data, cfg.model.n, cfg.model.m);
  const Eigen::MatrixXd& Y = traj.measurements;
  if (Y.cols() < 1) throw peiv::ConfigError("data file holds no measurements");

  // theta_prior provides both the initialization and, for PEIV/ASEKS, the
  // regularization; plain iterative methods fall back to theta_init.
  peiv::GaussianDensity theta_prior =
      cfg.theta_prior
          ? *cfg.theta_prior
          : peiv::GaussianDensity(
                cfg.iter.theta_init.size() > 0
                    ? cfg.iter.theta_init
                    : Eigen::VectorXd::Zero(cfg.model.d),
                cfg.sigma_theta);
  peiv::IterConfig iter = cfg.iter;
  if (iter.theta_init.size() == 0) iter.theta_init = theta_prior.mean;

  peiv::GaussianDensity prior;
  if (cfg.prior) {
    prior = *cfg.prior;
  } else {
    if (cfg.model.m != cfg.model.n)
      throw peiv::ConfigError(
          "no 'prior' configured and the first-measurement rule needs m == n");
    prior = peiv::GaussianDensity(
        Y.col(0),
        2.0 * peiv::stationary_cov(cfg.model, theta_prior.mean));
  }

  const peiv::Method which = peiv::method_from_string(method);
  peiv::JointEstimate est;
  switch (which) {
    case peiv::Method::Peiv:
      est = peiv::peiv(cfg.model, Y, prior, theta_prior, iter);
      break;
    case peiv::Method::JmapMl:
      est = peiv::jmap_ml(cfg.model, Y, prior, iter);
      break;
    case peiv::Method::Em:
      est = peiv::em(cfg.model, Y, prior, iter);
      break;
    case peiv::Method::Aseks: {
      peiv::AseksOptions aopts;
      aopts.theta_process_noise = cfg.aseks_theta_noise;
      est = peiv::aseks(cfg.model, Y, prior, theta_prior, iter, aopts);
      break;
    }
  }

  fs::path xhat_path = fs::path(out);
  xhat_path.replace_extension(".xhat.csv");
  peiv::write_state_csv(xhat_path.string(), est.state.means);

  nlohmann::json j = peiv::estimate_json(method, est, xhat_path.string());
  j["config"] = peiv::resolved_json(cfg);
  peiv::write_json(out, j);
  info(opts, "wrote " + out + (est.converged ? "" : " (not converged)"));
  if (opts.quiet) std::cout << out << "\n";
  return 0;
}

int cmd_benchmark(const std::string& config_path, std::optional<std::string> out_dir,
                  std::optional<int> threads, const CommonOpts& opts) {
  peiv::ExperimentConfig cfg = peiv::load_experiment_config(config_path);
  std::string dir;
  if (out_dir)
    dir = *out_dir;
  else if (cfg.output_dir)
    dir = *cfg.output_dir;
  else
    throw peiv::ConfigError("benchmark needs --out-dir or config output_dir");
  fs::create_directories(dir);

  if (cfg.batch_sizes.empty())
    throw peiv::ConfigError("mc.batch_sizes is required for benchmark");

  peiv::McConfig mc = peiv::make_mc_config(cfg);
  mc.threads = resolve_threads(threads);
  info(opts, "running " + std::to_string(cfg.batch_sizes.size()) + " batch sizes x " +
                 std::to_string(cfg.replications) + " replications on " +
                 std::to_string(mc.threads) + " thread(s)");
  peiv::McReport report = peiv::run_mc(mc);

  const fs::path base(dir);
  peiv::write_rmse_csv((base / "rmse.csv").string(), report);
  peiv::write_ellipse_csv((base / "ellipse.csv").string(), report);
  peiv::write_json((base / "meta.json").string(), peiv::resolved_json(cfg));
  info(opts, "wrote " + (base / "rmse.csv").string());
  if (opts.quiet) std::cout << (base / "rmse.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint state and parameter estimation for parameter-affine "
               "linear Gaussian state-space models"};
  app.require_subcommand(1);
  CommonOpts opts;
  app.add_flag("--quiet", opts.quiet,
               "machine output only on stdout, diagnostics stay on stderr");

  std::string config_path, out, data, method;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  int steps = 0;

  auto* sim = app.add_subcommand("simulate", "simulate a trajectory to CSV");
  sim->add_option("config", config_path, "experiment config (JSON)")->required();
  sim->add_option("--seed", seed, "override the config seed");
  sim->add_option("--steps", steps, "number of measurements N")->required();
  sim->add_option("--out", out, "output CSV path")->required();

  auto* est = app.add_subcommand("estimate", "run one estimator on a data file");
  est->add_option("config", config_path, "experiment config (JSON)")->required();
  est->add_option("--method", method, "peiv|jmapml|em|aseks")->required();
  est->add_option("--data", data, "trajectory CSV")->required();
  est->add_option("--out", out, "output JSON path")->required();

  auto* bench = app.add_subcommand("benchmark", "run the Monte Carlo benchmark");
  bench->add_option("config", config_path, "experiment config (JSON)")->required();
  bench->add_option("--out-dir", out_dir, "output directory");
  bench->add_option("--threads", threads,
                    "worker threads (PEIV_THREADS as fallback, default 1)");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(config_path, seed, steps, out, opts);
    if (est->parsed()) return cmd_estimate(config_path, method, data, out, opts);
    if (bench->parsed()) return cmd_benchmark(config_path, out_dir, threads, opts);
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  } catch (const peiv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const peiv::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const peiv::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
