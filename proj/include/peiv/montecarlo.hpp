#ifndef PEIV_MONTECARLO_HPP
#define PEIV_MONTECARLO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peiv/estimators.hpp"
#include "peiv/model.hpp"

namespace peiv {

enum class Method { Peiv, JmapMl, Em, Aseks };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

// How the estimators' initial-state prior is formed for each replication.
enum class PriorMode {
  kFirstMeasurement,  // mean = y_1, cov = 2 * stationary cov (needs m == n)
  kStationary,        // mean = 0, cov = stationary cov
  kFixed,             // user-provided density
};

struct McConfig {
  ParamAffineModel model;
  Eigen::VectorXd theta_true;
  std::vector<int> batch_sizes;
  int replications = 1000;
  std::uint64_t seed = 0;
  Eigen::MatrixXd sigma_theta;  // d x d prior covariance for theta-hat-1 draws
  std::vector<Method> methods = {Method::Peiv, Method::JmapMl, Method::Em,
                                 Method::Aseks};
  IterConfig iter;
  double aseks_theta_noise = 0.0;
  int ellipse_batch_size = 30;
  double ellipse_confidence = 0.95;
  PriorMode prior_mode = PriorMode::kFirstMeasurement;
  std::optional<GaussianDensity> fixed_prior;
  // When false, y_1 seeds the prior only and the batch regresses y_2..y_N.
  bool use_first_measurement = true;
  int threads = 1;
};

// Confidence ellipse of 2-d samples: the set
// { z : (z - center)^T cov^{-1} (z - center) <= radius_scale }.
struct Ellipse {
  Eigen::Vector2d center;
  Eigen::Matrix2d cov;
  double radius_scale = 0.0;
  bool degenerate = false;
};

// Aggregates for one (method, batch size) cell.
struct McCell {
  Method method = Method::Peiv;
  int batch_size = 0;
  int effective = 0;  // replications that produced an estimate
  int failures = 0;
  double rmse_theta = 0.0;
  double rmse_x0 = 0.0;
  double q05 = 0.0;  // 5% quantile of theta-hat (first component)
  double q95 = 0.0;
  double var_theta = 0.0;           // sample variance of theta-hat
  double mean_reported_var = 0.0;   // mean of reported cov(theta)(0,0)
};

struct McEllipse {
  Method method = Method::Peiv;
  int batch_size = 0;
  Ellipse ellipse;  // of (x0 error, theta error) samples
};

struct McReport {
  std::vector<McCell> cells;       // methods x batch sizes, config order
  std::vector<McEllipse> ellipses; // one per method at ellipse_batch_size
};

// Runs the seeded replication grid. The report is a pure function of the
// config; the thread count never changes any output bit.
McReport run_mc(const McConfig& cfg);

Ellipse error_ellipse(const std::vector<Eigen::Vector2d>& samples,
                      double confidence);

// Linear-interpolation sample quantiles (type 7).
std::vector<double> quantiles(std::vector<double> samples,
                              const std::vector<double>& probs);

// sqrt((1/M) sum ||estimate_i - truth||^2).
double rmse(const std::vector<Eigen::VectorXd>& estimates,
            const Eigen::VectorXd& truth);

}  // namespace peiv

#endif  // PEIV_MONTECARLO_HPP
