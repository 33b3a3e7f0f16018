#ifndef PEIV_TESTS_TEST_SUPPORT_HPP
#define PEIV_TESTS_TEST_SUPPORT_HPP

#include <Eigen/Dense>

#include "peiv/model.hpp"

namespace test_support {

// Scalar benchmark model: x_{k+1} = theta x_k + v, y_k = x_k + e.
inline peiv::ParamAffineModel scalar_model(double q = 0.2, double r = 0.09) {
  std::vector<Eigen::MatrixXd> Fb = {Eigen::MatrixXd::Zero(1, 1),
                                     Eigen::MatrixXd::Identity(1, 1)};
  std::vector<Eigen::MatrixXd> Hb = {Eigen::MatrixXd::Identity(1, 1),
                                     Eigen::MatrixXd::Zero(1, 1)};
  Eigen::MatrixXd Q(1, 1), R(1, 1);
  Q << q;
  R << r;
  return peiv::ParamAffineModel(Fb, Hb, Q, R);
}

inline Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd t(1);
  t << v;
  return t;
}

inline Eigen::MatrixXd mat1(double v) {
  Eigen::MatrixXd M(1, 1);
  M << v;
  return M;
}

}  // namespace test_support

#endif  // PEIV_TESTS_TEST_SUPPORT_HPP
