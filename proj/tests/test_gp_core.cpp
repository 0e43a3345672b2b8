#include <doctest.h>

#include "dpgp/error.hpp"
#include "dpgp/gp_core.hpp"
#include "dpgp/linalg.hpp"
#include "oracles.hpp"

using namespace dpgp;

namespace {

struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  KernelSpec spec;
};

Problem random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index dims) {
  Problem p;
  p.X = oracle::random_inputs(n, dims, rng);
  p.y = oracle::random_vector(n, rng);
  p.spec = KernelSpec::eq_isotropic(1.0, 0.3, 0.05, dims);
  return p;
}

}  // namespace

TEST_CASE("zero outputs give zero weights and a zero mean") {
  std::mt19937_64 rng(1);
  auto p = random_problem(rng, 5, 1);
  const GPModel m = GPModel::fit(p.X, Eigen::VectorXd::Zero(5), p.spec);
  CHECK(m.alpha().isZero(0.0));
  CHECK(m.predict_mean(oracle::random_inputs(3, 1, rng)).isZero(0.0));
}

TEST_CASE("single noiseless point interpolates") {
  Eigen::MatrixXd X(1, 1);
  X << 0.3;
  Eigen::VectorXd y(1);
  y << 1.7;
  const GPModel m = GPModel::fit(X, y, KernelSpec::eq_isotropic(1.0, 0.5, 0.0));
  CHECK(m.alpha()[0] == doctest::Approx(1.7));
  CHECK(m.predict_mean(X)[0] == doctest::Approx(1.7));
}

TEST_CASE("weights and mean agree with a dense solve") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    auto p = random_problem(rng, 3 + t, 1 + t % 2);
    const GPModel m = GPModel::fit(p.X, p.y, p.spec);
    Eigen::MatrixXd K = oracle::eq_cross(p.X, p.X, 1.0, p.spec.lengthscales);
    K.diagonal().array() += p.spec.noise_variance;
    const Eigen::VectorXd alpha = oracle::inverse(K) * p.y;
    CHECK((m.alpha() - alpha).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + alpha.cwiseAbs().maxCoeff()));
    CHECK((K * m.alpha() - p.y).norm() < 1e-9);
    CHECK((m.chol() * m.chol().transpose() - K).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(!m.jittered());

    const Eigen::MatrixXd Xs = oracle::random_inputs(4, p.X.cols(), rng);
    const Eigen::VectorXd ref =
        oracle::gp_mean(p.X, p.y, Xs, 1.0, p.spec.lengthscales, p.spec.noise_variance);
    CHECK((m.predict_mean(Xs) - ref).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("far from the data the mean reverts to zero and the variance to the prior") {
  std::mt19937_64 rng(3);
  auto p = random_problem(rng, 10, 1);
  const GPModel m = GPModel::fit(p.X, p.y, p.spec);
  Eigen::MatrixXd far(1, 1);
  far << 1.0 + 20.0 * 0.3;
  CHECK(std::abs(m.predict_mean(far)[0]) < 1e-3 * p.y.cwiseAbs().maxCoeff());
  CHECK(m.predict_var(far)[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("posterior covariance agrees with the explicit formula") {
  std::mt19937_64 rng(4);
  auto p = random_problem(rng, 8, 2);
  const GPModel m = GPModel::fit(p.X, p.y, p.spec);
  const Eigen::MatrixXd Xs = oracle::random_inputs(5, 2, rng);
  Eigen::MatrixXd K = oracle::eq_cross(p.X, p.X, 1.0, p.spec.lengthscales);
  K.diagonal().array() += p.spec.noise_variance;
  const Eigen::MatrixXd Ks = oracle::eq_cross(Xs, p.X, 1.0, p.spec.lengthscales);
  const Eigen::MatrixXd ref =
      oracle::eq_cross(Xs, Xs, 1.0, p.spec.lengthscales) - Ks * oracle::inverse(K) * Ks.transpose();
  const Eigen::MatrixXd S = m.predict_cov(Xs);
  CHECK((S - ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(S == S.transpose());
  CHECK((m.predict_var(Xs) - ref.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("noiseless coincident test point has no posterior variance") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd X = oracle::random_inputs(4, 1, rng);
  const GPModel m =
      GPModel::fit(X, oracle::random_vector(4, rng), KernelSpec::eq_isotropic(1.0, 0.2, 0.0));
  CHECK(std::abs(m.predict_var(X.topRows(1))[0]) < 1e-8);
}

TEST_CASE("cloaking matrix reproduces the mean and single-output refits") {
  std::mt19937_64 rng(6);
  auto p = random_problem(rng, 9, 1);
  const GPModel m = GPModel::fit(p.X, p.y, p.spec);
  const Eigen::MatrixXd Xs = oracle::random_inputs(4, 1, rng);
  const Eigen::MatrixXd C = m.cloaking_matrix(Xs);
  REQUIRE(C.rows() == 4);
  REQUIRE(C.cols() == 9);
  CHECK((C * p.y - m.predict_mean(Xs)).cwiseAbs().maxCoeff() < 1e-10);
  const double d = 0.8;
  for (Eigen::Index i = 0; i < 9; ++i) {
    Eigen::VectorXd y2 = p.y;
    y2[i] += d;
    const Eigen::VectorXd moved = GPModel::fit(p.X, y2, p.spec).predict_mean(Xs);
    CHECK((moved - m.predict_mean(Xs) - d * C.col(i)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("cloaking matrix of a coincident noiseless point is a unit row") {
  Eigen::MatrixXd X(1, 1);
  X << 0.5;
  const GPModel m = GPModel::fit(X, Eigen::VectorXd::Ones(1), KernelSpec::eq_isotropic(1.0, 1.0, 0.0));
  CHECK(m.cloaking_matrix(X)(0, 0) == doctest::Approx(1.0));
  Eigen::MatrixXd far(1, 1);
  far << 30.0;
  CHECK(m.cloaking_matrix(far).norm() < 1e-3);
}

TEST_CASE("inverse covariance and solve") {
  std::mt19937_64 rng(7);
  auto p = random_problem(rng, 6, 1);
  const GPModel m = GPModel::fit(p.X, p.y, p.spec);
  Eigen::MatrixXd K = oracle::eq_cross(p.X, p.X, 1.0, p.spec.lengthscales);
  K.diagonal().array() += p.spec.noise_variance;
  CHECK((m.inverse_covariance() - oracle::inverse(K)).cwiseAbs().maxCoeff() < 1e-8);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Random(6, 2);
  CHECK((K * m.solve(B) - B).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("duplicated noiseless inputs fall back to jitter") {
  Eigen::MatrixXd X(3, 1);
  X << 0.2, 0.2, 0.7;
  Eigen::VectorXd y(3);
  y << 1.0, 1.0, -1.0;
  const GPModel m = GPModel::fit(X, y, KernelSpec::eq_isotropic(1.0, 0.5, 0.0));
  CHECK(m.alpha().allFinite());
  CHECK(m.predict_mean(X.bottomRows(1))[0] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("an indefinite matrix survives neither attempt") {
  Eigen::Matrix2d A;
  A << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky_with_jitter(A, 1e-8), NotPositiveDefinite);
}

TEST_CASE("shape errors") {
  const auto spec = KernelSpec::eq_isotropic(1.0, 1.0, 0.1);
  CHECK_THROWS_AS(GPModel::fit(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(2), spec),
                  DimensionError);
  CHECK_THROWS_AS(GPModel::fit(Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3), spec),
                  DimensionError);
  const GPModel m = GPModel::fit(Eigen::MatrixXd::Zero(2, 1) + Eigen::MatrixXd::Identity(2, 1),
                                 Eigen::VectorXd::Zero(2), spec);
  CHECK_THROWS_AS(m.predict_mean(Eigen::MatrixXd::Zero(1, 2)), DimensionError);
}

TEST_CASE("property: the mean is linear in the outputs") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    auto p = random_problem(rng, 7, 2);
    const Eigen::VectorXd y2 = oracle::random_vector(7, rng);
    const double a = 1.7, b = -0.4;
    const Eigen::MatrixXd Xs = oracle::random_inputs(3, 2, rng);
    const auto mean = [&](const Eigen::VectorXd& y) {
      return GPModel::fit(p.X, y, p.spec).predict_mean(Xs);
    };
    CHECK((mean(a * p.y + b * y2) - a * mean(p.y) - b * mean(y2)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("property: the posterior covariance ignores the outputs") {
  std::mt19937_64 rng(9);
  auto p = random_problem(rng, 7, 1);
  const Eigen::MatrixXd Xs = oracle::random_inputs(4, 1, rng);
  const Eigen::MatrixXd S1 = GPModel::fit(p.X, p.y, p.spec).predict_cov(Xs);
  const Eigen::MatrixXd S2 =
      GPModel::fit(p.X, oracle::random_vector(7, rng, -50, 50), p.spec).predict_cov(Xs);
  CHECK(S1 == S2);
}
