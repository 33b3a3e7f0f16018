#ifndef PEIV_CONFIG_HPP
#define PEIV_CONFIG_HPP

#include <optional>
#include <string>

#include <json.hpp>

#include "peiv/montecarlo.hpp"

namespace peiv {

// Fully resolved experiment description, parsed from a JSON config file.
// Unknown keys anywhere in the file are rejected.
struct ExperimentConfig {
  ParamAffineModel model;
  Eigen::VectorXd theta_true;
  std::optional<GaussianDensity> prior;        // initial-state prior
  std::optional<GaussianDensity> theta_prior;  // parameter prior
  IterConfig iter;
  double aseks_theta_noise = 0.0;
  // Monte Carlo settings.
  std::vector<int> batch_sizes;
  int replications = 1000;
  std::uint64_t seed = 0;
  Eigen::MatrixXd sigma_theta;
  std::vector<Method> methods;
  int ellipse_batch_size = 30;
  double ellipse_confidence = 0.95;
  PriorMode prior_mode = PriorMode::kFirstMeasurement;
  bool use_first_measurement = true;
  std::optional<std::string> output_dir;
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

// The resolved configuration, defaults included, as written to meta files.
nlohmann::json resolved_json(const ExperimentConfig& cfg);

McConfig make_mc_config(const ExperimentConfig& cfg);

}  // namespace peiv

#endif  // PEIV_CONFIG_HPP
