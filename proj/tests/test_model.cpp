#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "peiv/errors.hpp"
#include "peiv/linalg.hpp"
#include "peiv/model.hpp"

using namespace peiv;

namespace {

// The scalar benchmark model: x_{k+1} = theta x_k + v, y_k = x_k + e.
ParamAffineModel scalar_model(double q = 0.2, double r = 0.09) {
  std::vector<Eigen::MatrixXd> Fb = {Eigen::MatrixXd::Zero(1, 1),
                                     Eigen::MatrixXd::Identity(1, 1)};
  std::vector<Eigen::MatrixXd> Hb = {Eigen::MatrixXd::Identity(1, 1),
                                     Eigen::MatrixXd::Zero(1, 1)};
  Eigen::MatrixXd Q(1, 1), R(1, 1);
  Q << q;
  R << r;
  return ParamAffineModel(Fb, Hb, Q, R);
}

Eigen::VectorXd theta1(double v) {
  Eigen::VectorXd t(1);
  t << v;
  return t;
}

}  // namespace

TEST_CASE("eval_F / eval_H on the scalar model") {
  ParamAffineModel model = scalar_model();
  CHECK(eval_F(model, theta1(0.9))(0, 0) == doctest::Approx(0.9));
  CHECK(eval_H(model, theta1(0.9))(0, 0) == doctest::Approx(1.0));
  // theta = 0 returns the base matrices.
  CHECK(eval_F(model, theta1(0.0))(0, 0) == doctest::Approx(0.0));
  CHECK(eval_H(model, theta1(0.0))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("eval_F / eval_H match the naive summation oracle") {
  auto rm = oracles::random_model(91, 2, 2, 2);
  CHECK((eval_F(rm.model, rm.theta) -
         oracles::naive_affine(rm.model.F_basis, rm.theta))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  CHECK((eval_H(rm.model, rm.theta) -
         oracles::naive_affine(rm.model.H_basis, rm.theta))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("eval_F is affine in theta") {
  auto rm = oracles::random_model(17, 3, 2, 2);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd t1 = rng.gaussian_vector(2);
    Eigen::VectorXd t2 = rng.gaussian_vector(2);
    const double a = rng.next_double() * 2.0 - 0.5;
    Eigen::MatrixXd lhs = eval_F(rm.model, a * t1 + (1.0 - a) * t2);
    Eigen::MatrixXd rhs =
        a * eval_F(rm.model, t1) + (1.0 - a) * eval_F(rm.model, t2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("eval_F rejects wrong theta length") {
  ParamAffineModel model = scalar_model();
  CHECK_THROWS_AS(eval_F(model, Eigen::VectorXd::Zero(2)), ContractViolation);
}

TEST_CASE("model construction rejects indefinite noise") {
  std::vector<Eigen::MatrixXd> Fb = {Eigen::MatrixXd::Zero(1, 1),
                                     Eigen::MatrixXd::Identity(1, 1)};
  std::vector<Eigen::MatrixXd> Hb = {Eigen::MatrixXd::Identity(1, 1),
                                     Eigen::MatrixXd::Zero(1, 1)};
  Eigen::MatrixXd Qbad(1, 1), R(1, 1);
  Qbad << -0.1;
  R << 0.09;
  CHECK_THROWS_AS(ParamAffineModel(Fb, Hb, Qbad, R), ContractViolation);
}

TEST_CASE("simulate: noise-free recursion is exact") {
  ParamAffineModel model = scalar_model(0.0, 0.0);
  GaussianDensity x0(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 1));
  Trajectory traj = simulate(model, theta1(0.9), x0, 3, 1);
  CHECK(traj.states(0, 0) == doctest::Approx(1.0));
  CHECK(traj.states(0, 1) == doctest::Approx(0.9));
  CHECK(traj.states(0, 2) == doctest::Approx(0.81));
  CHECK(traj.states(0, 3) == doctest::Approx(0.729));
  CHECK(traj.measurements(0, 0) == doctest::Approx(0.9));
  CHECK(traj.measurements(0, 1) == doctest::Approx(0.81));
  CHECK(traj.measurements(0, 2) == doctest::Approx(0.729));
}

TEST_CASE("simulate: same seed gives a bit-identical trajectory") {
  ParamAffineModel model = scalar_model();
  GaussianDensity x0(Eigen::VectorXd::Zero(1),
                     Eigen::MatrixXd::Identity(1, 1));
  Trajectory a = simulate(model, theta1(0.9), x0, 50, 777);
  Trajectory b = simulate(model, theta1(0.9), x0, 50, 777);
  CHECK((a.states.array() == b.states.array()).all());
  CHECK((a.measurements.array() == b.measurements.array()).all());
  Trajectory c = simulate(model, theta1(0.9), x0, 50, 778);
  CHECK_FALSE((a.states.array() == c.states.array()).all());
}

TEST_CASE("simulate: long-run variance approaches the stationary value") {
  ParamAffineModel model = scalar_model(0.2, 0.09);
  GaussianDensity x0(Eigen::VectorXd::Zero(1),
                     Eigen::MatrixXd::Identity(1, 1) * (0.2 / (1 - 0.81)));
  Trajectory traj = simulate(model, theta1(0.9), x0, 100000, 4242);
  const double var =
      traj.states.row(0).array().square().mean();
  CHECK(var == doctest::Approx(0.2 / (1 - 0.81)).epsilon(0.05));
}

TEST_CASE("stationary_cov: scalar closed form and memoryless case") {
  ParamAffineModel model = scalar_model();
  Eigen::MatrixXd P = stationary_cov(model, theta1(0.9));
  CHECK(P(0, 0) == doctest::Approx(1.0526315789473684).epsilon(1e-12));

  Eigen::MatrixXd P0 = stationary_cov(model, theta1(0.0));
  CHECK(P0(0, 0) == doctest::Approx(0.2));
}

TEST_CASE("stationary_cov: Lyapunov residual and fixed-point oracle, n = 2") {
  auto rm = oracles::random_model(55, 2, 2, 2);
  // random_model keeps F(theta) stable for its own theta
  Eigen::MatrixXd F = eval_F(rm.model, rm.theta);
  REQUIRE(spectral_radius(F) < 1.0);
  Eigen::MatrixXd P = stationary_cov(rm.model, rm.theta);
  Eigen::MatrixXd residual = P - F * P * F.transpose() - rm.model.Q;
  CHECK(residual.cwiseAbs().maxCoeff() <
        1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff()));
  Eigen::MatrixXd Pfix = oracles::lyapunov_fixed_point(F, rm.model.Q);
  CHECK((P - Pfix).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stationary_cov: unstable dynamics raise") {
  ParamAffineModel model = scalar_model();
  CHECK_THROWS_AS(stationary_cov(model, theta1(1.0)), NonStationaryError);
  CHECK_THROWS_AS(stationary_cov(model, theta1(1.5)), NonStationaryError);
}
