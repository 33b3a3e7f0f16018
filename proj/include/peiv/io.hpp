#ifndef PEIV_IO_HPP
#define PEIV_IO_HPP

#include <string>

#include <json.hpp>

#include "peiv/estimators.hpp"
#include "peiv/model.hpp"
#include "peiv/montecarlo.hpp"

namespace peiv {

// Doubles are printed with 17 significant digits so files round-trip exactly.
std::string format_double(double v);

// Header `k,x_1..x_n,y_1..y_m`; the k = 0 row has empty y fields.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// Reads measurements (and states, which callers may ignore) back. Column
// counts are checked against the given dimensions.
Trajectory read_trajectory_csv(const std::string& path, Eigen::Index n,
                               Eigen::Index m);

void write_rmse_csv(const std::string& path, const McReport& report);
void write_ellipse_csv(const std::string& path, const McReport& report);

// Smoothed state means, one row per k.
void write_state_csv(const std::string& path, const Eigen::MatrixXd& means);

void write_json(const std::string& path, const nlohmann::json& j);

nlohmann::json estimate_json(const std::string& method,
                             const JointEstimate& est,
                             const std::string& xhat_path);

}  // namespace peiv

#endif  // PEIV_IO_HPP
