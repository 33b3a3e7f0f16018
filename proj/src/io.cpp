#include "peiv/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "peiv/errors.hpp"

namespace peiv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  return out;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out = open_out(path);
  const Eigen::Index n = traj.states.rows();
  const Eigen::Index m = traj.measurements.rows();
  const Eigen::Index N = traj.length();

  out << "k";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",y_" << i;
  out << "\n";
  for (Eigen::Index k = 0; k <= N; ++k) {
    out << k;
    for (Eigen::Index i = 0; i < n; ++i)
      out << "," << format_double(traj.states(i, k));
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ",";
      if (k >= 1) out << format_double(traj.measurements(i, k - 1));
    }
    out << "\n";
  }
}

Trajectory read_trajectory_csv(const std::string& path, Eigen::Index n,
                               Eigen::Index m) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("data file '" + path + "' is empty");

  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!s.empty() && s.back() == ',') fields.push_back("");
    return fields;
  };

  const auto header = split(line);
  if (static_cast<Eigen::Index>(header.size()) != 1 + n + m)
    throw ConfigError("data file '" + path +
                      "' column count does not match the model dimensions");

  std::vector<std::vector<double>> xrows;
  std::vector<std::vector<double>> yrows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line);
    if (static_cast<Eigen::Index>(fields.size()) != 1 + n + m)
      throw ConfigError("data file '" + path + "': ragged row");
    std::vector<double> x(n), y;
    for (Eigen::Index i = 0; i < n; ++i) x[i] = std::stod(fields[1 + i]);
    bool has_y = !fields[1 + n].empty();
    if (has_y) {
      y.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) y[i] = std::stod(fields[1 + n + i]);
    }
    xrows.push_back(std::move(x));
    if (has_y) yrows.push_back(std::move(y));
  }
  if (xrows.size() != yrows.size() + 1)
    throw ConfigError("data file '" + path +
                      "': expected one more state row than measurement rows");

  Trajectory traj;
  traj.states.resize(n, xrows.size());
  for (std::size_t k = 0; k < xrows.size(); ++k)
    for (Eigen::Index i = 0; i < n; ++i) traj.states(i, k) = xrows[k][i];
  traj.measurements.resize(m, yrows.size());
  for (std::size_t k = 0; k < yrows.size(); ++k)
    for (Eigen::Index i = 0; i < m; ++i) traj.measurements(i, k) = yrows[k][i];
  return traj;
}

void write_rmse_csv(const std::string& path, const McReport& report) {
  std::ofstream out = open_out(path);
  out << "method,N,M_effective,rmse_theta,rmse_x0,q05,q95,failures\n";
  for (const auto& cell : report.cells) {
    out << to_string(cell.method) << "," << cell.batch_size << ","
        << cell.effective << "," << format_double(cell.rmse_theta) << ","
        << format_double(cell.rmse_x0) << "," << format_double(cell.q05) << ","
        << format_double(cell.q95) << "," << cell.failures << "\n";
  }
}

void write_ellipse_csv(const std::string& path, const McReport& report) {
  std::ofstream out = open_out(path);
  out << "method,N,center_x0,center_theta,cov_x0x0,cov_x0theta,cov_thetatheta,"
         "radius_scale\n";
  for (const auto& me : report.ellipses) {
    const Ellipse& e = me.ellipse;
    out << to_string(me.method) << "," << me.batch_size << ","
        << format_double(e.center[0]) << "," << format_double(e.center[1])
        << "," << format_double(e.cov(0, 0)) << ","
        << format_double(e.cov(0, 1)) << "," << format_double(e.cov(1, 1))
        << "," << format_double(e.radius_scale) << "\n";
  }
}

void write_state_csv(const std::string& path, const Eigen::MatrixXd& means) {
  std::ofstream out = open_out(path);
  out << "k";
  for (Eigen::Index i = 1; i <= means.rows(); ++i) out << ",xhat_" << i;
  out << "\n";
  for (Eigen::Index k = 0; k < means.cols(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < means.rows(); ++i)
      out << "," << format_double(means(i, k));
    out << "\n";
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

nlohmann::json estimate_json(const std::string& method,
                             const JointEstimate& est,
                             const std::string& xhat_path) {
  nlohmann::json j;
  j["method"] = method;
  j["theta_hat"] = std::vector<double>(
      est.theta_hat.data(), est.theta_hat.data() + est.theta_hat.size());
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index r = 0; r < est.theta_cov.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < est.theta_cov.cols(); ++c)
      row.push_back(est.theta_cov(r, c));
    cov.push_back(row);
  }
  j["theta_cov"] = cov;
  j["iterations"] = est.iterations;
  j["converged"] = est.converged;
  j["loglik"] = est.state.loglik;
  j["objective_trace"] = est.objective_trace;
  j["xhat_path"] = xhat_path;
  return j;
}

}  // namespace peiv
