#include "peiv/config.hpp"

#include <fstream>
#include <set>

#include "peiv/errors.hpp"

namespace peiv {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

double as_double(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] =
        as_double(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

// Row-major nested arrays.
Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + " must be a non-empty nested array");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw ConfigError(where + " rows must be arrays");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(where + " rows must all have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_double(j[r][c], where);
  }
  return M;
}

std::vector<Eigen::MatrixXd> parse_matrix_list(const json& j,
                                               const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + " must be a non-empty array of matrices");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_matrix(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

GaussianDensity parse_density(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"mean", "cov"}, where);
  if (!j.contains("mean") || !j.contains("cov"))
    throw ConfigError(where + " needs 'mean' and 'cov'");
  try {
    return GaussianDensity(parse_vector(j["mean"], where + ".mean"),
                           parse_matrix(j["cov"], where + ".cov"));
  } catch (const ContractViolation& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json density_json(const GaussianDensity& g) {
  json j;
  j["mean"] = std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size());
  json cov = json::array();
  for (Eigen::Index r = 0; r < g.cov.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < g.cov.cols(); ++c) row.push_back(g.cov(r, c));
    cov.push_back(row);
  }
  j["cov"] = cov;
  return j;
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

PriorMode prior_mode_from_string(const std::string& s) {
  if (s == "first_measurement") return PriorMode::kFirstMeasurement;
  if (s == "stationary") return PriorMode::kStationary;
  if (s == "fixed") return PriorMode::kFixed;
  throw ConfigError("mc.prior_mode must be first_measurement|stationary|fixed");
}

std::string prior_mode_to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::kFirstMeasurement: return "first_measurement";
    case PriorMode::kStationary: return "stationary";
    case PriorMode::kFixed: return "fixed";
  }
  return "unknown";
}

}  // namespace

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"model", "theta_true", "prior", "theta_prior",
                       "estimator", "mc", "output_dir"},
                      "config");
  if (!j.contains("model")) throw ConfigError("config needs a 'model' section");

  ExperimentConfig cfg;
  {
    const json& jm = j["model"];
    reject_unknown_keys(jm, {"n", "m", "d", "F_basis", "H_basis", "Q", "R"},
                        "model");
    for (const char* key : {"n", "m", "d", "F_basis", "H_basis", "Q", "R"})
      if (!jm.contains(key))
        throw ConfigError(std::string("model needs '") + key + "'");
    try {
      cfg.model = ParamAffineModel(
          parse_matrix_list(jm["F_basis"], "model.F_basis"),
          parse_matrix_list(jm["H_basis"], "model.H_basis"),
          parse_matrix(jm["Q"], "model.Q"), parse_matrix(jm["R"], "model.R"));
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    if (jm["n"].get<Eigen::Index>() != cfg.model.n ||
        jm["m"].get<Eigen::Index>() != cfg.model.m ||
        jm["d"].get<Eigen::Index>() != cfg.model.d)
      throw ConfigError("model: declared n/m/d do not match the matrices");
  }

  if (!j.contains("theta_true"))
    throw ConfigError("config needs 'theta_true'");
  cfg.theta_true = parse_vector(j["theta_true"], "theta_true");
  if (cfg.theta_true.size() != cfg.model.d)
    throw ConfigError("theta_true length must equal d");

  if (j.contains("prior")) cfg.prior = parse_density(j["prior"], "prior");
  if (j.contains("theta_prior"))
    cfg.theta_prior = parse_density(j["theta_prior"], "theta_prior");
  if (cfg.prior && cfg.prior->dim() != cfg.model.n)
    throw ConfigError("prior dimension must equal n");
  if (cfg.theta_prior && cfg.theta_prior->dim() != cfg.model.d)
    throw ConfigError("theta_prior dimension must equal d");

  if (j.contains("estimator")) {
    const json& je = j["estimator"];
    reject_unknown_keys(je, {"max_iter", "tol", "theta_init",
                             "aseks_theta_noise"},
                        "estimator");
    if (je.contains("max_iter")) cfg.iter.max_iter = je["max_iter"].get<int>();
    if (je.contains("tol")) cfg.iter.tol = as_double(je["tol"], "estimator.tol");
    if (je.contains("theta_init"))
      cfg.iter.theta_init = parse_vector(je["theta_init"], "estimator.theta_init");
    if (je.contains("aseks_theta_noise"))
      cfg.aseks_theta_noise =
          as_double(je["aseks_theta_noise"], "estimator.aseks_theta_noise");
    if (cfg.iter.max_iter < 1) throw ConfigError("estimator.max_iter must be >= 1");
    if (!(cfg.iter.tol > 0.0)) throw ConfigError("estimator.tol must be > 0");
    if (cfg.iter.theta_init.size() != 0 &&
        cfg.iter.theta_init.size() != cfg.model.d)
      throw ConfigError("estimator.theta_init length must equal d");
  }

  // MC defaults usable even when the section is absent.
  cfg.sigma_theta = 0.04 * Eigen::MatrixXd::Identity(cfg.model.d, cfg.model.d);
  cfg.methods = {Method::Peiv, Method::JmapMl, Method::Em, Method::Aseks};
  if (j.contains("mc")) {
    const json& jm = j["mc"];
    reject_unknown_keys(jm,
                        {"batch_sizes", "replications", "seed", "sigma_theta",
                         "methods", "ellipse_batch_size", "ellipse_confidence",
                         "prior_mode", "use_first_measurement"},
                        "mc");
    if (jm.contains("batch_sizes")) {
      cfg.batch_sizes.clear();
      for (const auto& v : jm["batch_sizes"])
        cfg.batch_sizes.push_back(v.get<int>());
    }
    if (jm.contains("replications"))
      cfg.replications = jm["replications"].get<int>();
    if (jm.contains("seed")) cfg.seed = jm["seed"].get<std::uint64_t>();
    if (jm.contains("sigma_theta"))
      cfg.sigma_theta = parse_matrix(jm["sigma_theta"], "mc.sigma_theta");
    if (jm.contains("methods")) {
      cfg.methods.clear();
      for (const auto& v : jm["methods"])
        cfg.methods.push_back(method_from_string(v.get<std::string>()));
      if (cfg.methods.empty()) throw ConfigError("mc.methods is empty");
    }
    if (jm.contains("ellipse_batch_size"))
      cfg.ellipse_batch_size = jm["ellipse_batch_size"].get<int>();
    if (jm.contains("ellipse_confidence"))
      cfg.ellipse_confidence =
          as_double(jm["ellipse_confidence"], "mc.ellipse_confidence");
    if (jm.contains("prior_mode"))
      cfg.prior_mode = prior_mode_from_string(jm["prior_mode"].get<std::string>());
    if (jm.contains("use_first_measurement"))
      cfg.use_first_measurement = jm["use_first_measurement"].get<bool>();
  }
  if (cfg.sigma_theta.rows() != cfg.model.d ||
      cfg.sigma_theta.cols() != cfg.model.d)
    throw ConfigError("mc.sigma_theta must be d x d");
  if (cfg.prior_mode == PriorMode::kFixed && !cfg.prior)
    throw ConfigError("mc.prior_mode fixed requires a 'prior' section");

  if (j.contains("output_dir"))
    cfg.output_dir = j["output_dir"].get<std::string>();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  try {
    return parse_experiment_config(j);
  } catch (const nlohmann::json::exception& e) {
    // wrong value types surface here
    throw ConfigError("config error in '" + path + "': " + e.what());
  }
}

nlohmann::json resolved_json(const ExperimentConfig& cfg) {
  json j;
  json jm;
  jm["n"] = cfg.model.n;
  jm["m"] = cfg.model.m;
  jm["d"] = cfg.model.d;
  json fb = json::array(), hb = json::array();
  for (const auto& M : cfg.model.F_basis) fb.push_back(matrix_json(M));
  for (const auto& M : cfg.model.H_basis) hb.push_back(matrix_json(M));
  jm["F_basis"] = fb;
  jm["H_basis"] = hb;
  jm["Q"] = matrix_json(cfg.model.Q);
  jm["R"] = matrix_json(cfg.model.R);
  j["model"] = jm;
  j["theta_true"] = std::vector<double>(
      cfg.theta_true.data(), cfg.theta_true.data() + cfg.theta_true.size());
  if (cfg.prior) j["prior"] = density_json(*cfg.prior);
  if (cfg.theta_prior) j["theta_prior"] = density_json(*cfg.theta_prior);

  json je;
  je["max_iter"] = cfg.iter.max_iter;
  je["tol"] = cfg.iter.tol;
  if (cfg.iter.theta_init.size() > 0)
    je["theta_init"] = std::vector<double>(
        cfg.iter.theta_init.data(),
        cfg.iter.theta_init.data() + cfg.iter.theta_init.size());
  je["aseks_theta_noise"] = cfg.aseks_theta_noise;
  j["estimator"] = je;

  json jmc;
  jmc["batch_sizes"] = cfg.batch_sizes;
  jmc["replications"] = cfg.replications;
  jmc["seed"] = cfg.seed;
  jmc["sigma_theta"] = matrix_json(cfg.sigma_theta);
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  jmc["methods"] = methods;
  jmc["ellipse_batch_size"] = cfg.ellipse_batch_size;
  jmc["ellipse_confidence"] = cfg.ellipse_confidence;
  jmc["prior_mode"] = prior_mode_to_string(cfg.prior_mode);
  jmc["use_first_measurement"] = cfg.use_first_measurement;
  j["mc"] = jmc;

  if (cfg.output_dir) j["output_dir"] = *cfg.output_dir;
  return j;
}

McConfig make_mc_config(const ExperimentConfig& cfg) {
  McConfig mc;
  mc.model = cfg.model;
  mc.theta_true = cfg.theta_true;
  mc.batch_sizes = cfg.batch_sizes;
  mc.replications = cfg.replications;
  mc.seed = cfg.seed;
  mc.sigma_theta = cfg.sigma_theta;
  mc.methods = cfg.methods;
  mc.iter = cfg.iter;
  mc.aseks_theta_noise = cfg.aseks_theta_noise;
  mc.ellipse_batch_size = cfg.ellipse_batch_size;
  mc.ellipse_confidence = cfg.ellipse_confidence;
  mc.prior_mode = cfg.prior_mode;
  if (cfg.prior) mc.fixed_prior = cfg.prior;
  mc.use_first_measurement = cfg.use_first_measurement;
  return mc;
}

}  // namespace peiv
