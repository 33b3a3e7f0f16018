#include <doctest.h>

#include "oracles.hpp"
#include "peiv/batch.hpp"
#include "peiv/errors.hpp"
#include "peiv/model.hpp"

using namespace peiv;

namespace {

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

// BatchSystem for the scalar model with N = 1, y1, m0 given.
BatchSystem scalar_n1(double y1 = 0.5, double m0 = 0.3) {
  ParamAffineModel model = scalar_model();
  Eigen::MatrixXd Y(1, 1);
  Y << y1;
  GaussianDensity prior((Eigen::VectorXd(1) << m0).finished(),
                        Eigen::MatrixXd::Identity(1, 1));
  return assemble(model, Y, prior);
}

// Stacks [C(theta); A(theta); [I, 0]] row block by row block.
Eigen::MatrixXd brute_force_psi(const ParamAffineModel& model,
                                const Eigen::VectorXd& theta,
                                Eigen::Index N) {
  const Eigen::Index n = model.n, m = model.m;
  const Eigen::MatrixXd F = eval_F(model, theta);
  const Eigen::MatrixXd H = eval_H(model, theta);
  Eigen::MatrixXd Psi =
      Eigen::MatrixXd::Zero(m * N + n * N + n, n * (N + 1));
  for (Eigen::Index k = 0; k < N; ++k)  // C: H on x_1..x_N
    Psi.block(m * k, n * (k + 1), m, n) = H;
  for (Eigen::Index k = 0; k < N; ++k) {  // A: F x_k - x_{k+1}
    Psi.block(m * N + n * k, n * k, n, n) = F;
    Psi.block(m * N + n * k, n * (k + 1), n, n) =
        -Eigen::MatrixXd::Identity(n, n);
  }
  Psi.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  return Psi;
}

}  // namespace

TEST_CASE("assemble: scalar N = 1 layout matches the hand-built system") {
  BatchSystem sys = scalar_n1(0.5, 0.3);
  Eigen::VectorXd theta(1);
  theta << 0.9;

  Eigen::MatrixXd Psi = oracles::dense_psi(sys, theta);
  Eigen::MatrixXd expected(3, 2);
  expected << 0.0, 1.0, 0.9, -1.0, 1.0, 0.0;
  CHECK((Psi - expected).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd base = oracles::dense_from_blocks(sys, sys.psi_base);
  Eigen::MatrixXd base_expected(3, 2);
  base_expected << 0.0, 1.0, 0.0, -1.0, 1.0, 0.0;
  CHECK((base - base_expected).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd slice = oracles::dense_from_blocks(sys, sys.psi_basis[0]);
  Eigen::MatrixXd slice_expected(3, 2);
  slice_expected << 0.0, 0.0, 1.0, 0.0, 0.0, 0.0;
  CHECK((slice - slice_expected).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::VectorXd ybar_expected(3);
  ybar_expected << 0.5, 0.0, 0.3;
  CHECK((sys.ybar - ybar_expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("assemble: random N = 3, n = 2, d = 2 matches the dense loop") {
  auto rm = oracles::random_model(7, 2, 2, 2);
  Rng rng(8);
  Eigen::MatrixXd Y = oracles::random_matrix(rng, 2, 3);
  GaussianDensity prior(rng.gaussian_vector(2), oracles::random_spd(rng, 2));
  BatchSystem sys = assemble(rm.model, Y, prior);

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd theta = rng.gaussian_vector(2);
    Eigen::MatrixXd got = oracles::dense_psi(sys, theta);
    Eigen::MatrixXd want = brute_force_psi(rm.model, theta, 3);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("apply_Psi: scalar N = 1 worked example") {
  BatchSystem sys = scalar_n1(0.5, 0.3);
  Eigen::VectorXd theta(1), X(2);
  theta << 0.9;
  X << 2.0, 3.0;
  Eigen::VectorXd out = apply_Psi(sys, theta, X);
  CHECK(out[0] == doctest::Approx(3.0));
  CHECK(out[1] == doctest::Approx(-1.2));
  CHECK(out[2] == doctest::Approx(2.0));

  // theta = 0 applies the base slice alone.
  Eigen::VectorXd base = apply_Psi(sys, Eigen::VectorXd::Zero(1), X);
  CHECK((base - oracles::dense_from_blocks(sys, sys.psi_base) * X)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("apply_Psi equals the dense Kronecker vectorization") {
  auto rm = oracles::random_model(21, 2, 1, 2);
  Rng rng(22);
  Eigen::MatrixXd Y = oracles::random_matrix(rng, 1, 4);
  GaussianDensity prior(rng.gaussian_vector(2), oracles::random_spd(rng, 2));
  BatchSystem sys = assemble(rm.model, Y, prior);
  const Eigen::Index L = sys.rows();

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd theta = rng.gaussian_vector(2);
    Eigen::VectorXd X = rng.gaussian_vector(sys.cols());
    Eigen::VectorXd got = apply_Psi(sys, theta, X);
    Eigen::VectorXd want = oracles::dense_D(X, L) *
                           oracles::vec(oracles::dense_psi(sys, theta));
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("regressor_Phi: scalar N = 1 worked example and zero state") {
  BatchSystem sys = scalar_n1(0.5, 0.3);
  Eigen::VectorXd X(2);
  X << 2.0, 3.0;
  Regressor reg = regressor_Phi(sys, X);
  CHECK(reg.Phi(0, 0) == doctest::Approx(0.0));
  CHECK(reg.Phi(1, 0) == doctest::Approx(2.0));
  CHECK(reg.Phi(2, 0) == doctest::Approx(0.0));
  CHECK(reg.c[0] == doctest::Approx(3.0));
  CHECK(reg.c[1] == doctest::Approx(-3.0));
  CHECK(reg.c[2] == doctest::Approx(2.0));

  Regressor zero = regressor_Phi(sys, Eigen::VectorXd::Zero(2));
  CHECK(zero.Phi.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("regressor_Phi matches the dense D(X) B and D(X) h oracle") {
  auto rm = oracles::random_model(31, 2, 2, 2);
  Rng rng(32);
  Eigen::MatrixXd Y = oracles::random_matrix(rng, 2, 3);
  GaussianDensity prior(rng.gaussian_vector(2), oracles::random_spd(rng, 2));
  BatchSystem sys = assemble(rm.model, Y, prior);
  const Eigen::Index L = sys.rows();

  Eigen::VectorXd X = rng.gaussian_vector(sys.cols());
  Regressor reg = regressor_Phi(sys, X);

  const Eigen::MatrixXd D = oracles::dense_D(X, L);
  const Eigen::VectorXd h =
      oracles::vec(oracles::dense_from_blocks(sys, sys.psi_base));
  Eigen::MatrixXd B(h.size(), sys.d);
  for (Eigen::Index i = 0; i < sys.d; ++i)
    B.col(i) = oracles::vec(oracles::dense_from_blocks(sys, sys.psi_basis[i]));

  CHECK((reg.Phi - D * B).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((reg.c - D * h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("property: apply_Psi(theta, X) == Phi(X) theta + c(X)") {
  auto rm = oracles::random_model(41, 2, 2, 2);
  Rng rng(42);
  Eigen::MatrixXd Y = oracles::random_matrix(rng, 2, 5);
  GaussianDensity prior(rng.gaussian_vector(2), oracles::random_spd(rng, 2));
  BatchSystem sys = assemble(rm.model, Y, prior);

  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd theta = rng.gaussian_vector(2);
    Eigen::VectorXd X = rng.gaussian_vector(sys.cols());
    Regressor reg = regressor_Phi(sys, X);
    Eigen::VectorXd lhs = apply_Psi(sys, theta, X);
    Eigen::VectorXd rhs = reg.Phi * theta + reg.c;
    const double scale = 1.0 + lhs.cwiseAbs().maxCoeff();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
}

TEST_CASE("Psi(theta) has full column rank with the prior row present") {
  auto rm = oracles::random_model(51, 2, 1, 2);
  Rng rng(52);
  Eigen::MatrixXd Y = oracles::random_matrix(rng, 1, 3);
  GaussianDensity prior(rng.gaussian_vector(2), oracles::random_spd(rng, 2));
  BatchSystem sys = assemble(rm.model, Y, prior);
  Eigen::MatrixXd Psi = oracles::dense_psi(sys, rm.theta);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Psi);
  CHECK(lu.rank() == sys.cols());
}

TEST_CASE("assemble and apply_Psi reject dimension mismatches") {
  BatchSystem sys = scalar_n1();
  CHECK_THROWS_AS(apply_Psi(sys, Eigen::VectorXd::Zero(1),
                            Eigen::VectorXd::Zero(5)),
                  ContractViolation);
  CHECK_THROWS_AS(apply_Psi(sys, Eigen::VectorXd::Zero(3),
                            Eigen::VectorXd::Zero(2)),
                  ContractViolation);
  ParamAffineModel model = scalar_model();
  GaussianDensity bad(Eigen::VectorXd::Zero(2),
                      Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(assemble(model, Eigen::MatrixXd::Zero(1, 1), bad),
                  ContractViolation);
}
