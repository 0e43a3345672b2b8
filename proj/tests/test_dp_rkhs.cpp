#include <doctest.h>

#include <cmath>

#include "dpgp/dp_rkhs.hpp"
#include "dpgp/error.hpp"
#include "oracles.hpp"

using namespace dpgp;

TEST_CASE("c(delta) for both release variants") {
  CHECK(c_delta(0.01, GaussianVariant::rkhs) == doctest::Approx(std::sqrt(2.0 * std::log(125.0))));
  CHECK(c_delta(0.01, GaussianVariant::rkhs) == doctest::Approx(3.1075).epsilon(1e-4));
  CHECK(c_delta(0.01, GaussianVariant::cloaking) == doctest::Approx(3.2552).epsilon(1e-4));
  CHECK(c_delta(2.0 * std::exp(-2.0), GaussianVariant::cloaking) == doctest::Approx(2.0));
  CHECK_THROWS_AS(c_delta(0.0, GaussianVariant::rkhs), std::invalid_argument);
  CHECK_THROWS_AS(c_delta(1.0, GaussianVariant::cloaking), std::invalid_argument);
  CHECK_THROWS_AS(c_delta(-0.5, GaussianVariant::cloaking), std::invalid_argument);
}

TEST_CASE("privacy parameters are validated") {
  CHECK_THROWS_AS((DPParams{0.0, 0.01, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((DPParams{1.0, 1.5, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((DPParams{1.0, 0.01, 0.0}).validate(), std::invalid_argument);
  CHECK_NOTHROW((DPParams{1.0, 0.01, 1.0}).validate());
}

TEST_CASE("bound_b examples") {
  CHECK(bound_b(Eigen::MatrixXd::Identity(4, 4), true) == 1.0);
  Eigen::Matrix2d K;
  K << 1.0, 0.5, 0.5, 1.0;
  const Eigen::MatrixXd Kinv = oracle::inverse(K);
  CHECK(bound_b(Kinv, true) == doctest::Approx(4.0 / 3.0));
  CHECK(bound_b(Kinv, false) == doctest::Approx(2.0));
  CHECK_THROWS_AS(bound_b(Eigen::MatrixXd::Zero(2, 3), true), DimensionError);
}

TEST_CASE("bound_b covers brute-force neighbour perturbations") {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> coord(0, 4);
  std::uniform_real_distribution<double> mag(-1.0, 1.0);
  const auto spec = KernelSpec::eq_isotropic(1.0, 0.4, 0.1);
  const double d = 2.0;
  int violations = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd X = oracle::random_inputs(5, 1, rng);
    Eigen::MatrixXd K = oracle::eq_cross(X, X, 1.0, spec.lengthscales);
    K.diagonal().array() += spec.noise_variance;
    const Eigen::MatrixXd Kinv = oracle::inverse(K);
    const double b = bound_b(Kinv, true);
    const Eigen::MatrixXd Xs = oracle::random_inputs(10, 1, rng, -0.5, 1.5);
    const Eigen::MatrixXd Ks = oracle::eq_cross(Xs, X, 1.0, spec.lengthscales);
    for (int t = 0; t < 1000; ++t) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
      e[coord(rng)] = d * mag(rng);
      const double change = (Ks * Kinv * e).cwiseAbs().maxCoeff();
      if (change > d * b * (1.0 + 1e-12)) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("varah bound examples") {
  CHECK(varah_bound(2.0 * Eigen::MatrixXd::Identity(3, 3)) == doctest::Approx(0.5));
  Eigen::Matrix2d J;
  J << 2.0, -1.0, -1.0, 2.0;
  CHECK(varah_bound(J) == doctest::Approx(1.0));
  CHECK(oracle::inverse(J).cwiseAbs().rowwise().sum().maxCoeff() == doctest::Approx(1.0));
  Eigen::Matrix2d bad;
  bad << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(varah_bound(bad), NotDiagonallyDominant);
  CHECK_THROWS_AS(varah_bound(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
}

TEST_CASE("varah bound dominates the exact inverse norm") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0), slack(0.01, 2.0);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd J(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) J.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < 6; ++i) {
      const double off = J.row(i).cwiseAbs().sum() - std::abs(J(i, i));
      J(i, i) = (u(rng) < 0 ? -1.0 : 1.0) * (off + slack(rng));
    }
    const double exact = oracle::inverse(J).cwiseAbs().rowwise().sum().maxCoeff();
    CHECK(varah_bound(J) >= exact * (1.0 - 1e-12));
  }
}

TEST_CASE("prior samples") {
  const auto spec = KernelSpec::eq_isotropic(1.0, 0.5, 0.0);
  Eigen::MatrixXd one(1, 1);
  one << 0.3;
  Rng rng(4);
  const int draws = 100000;
  double ss = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = sample_prior(spec, one, rng)[0];
    ss += v * v;
  }
  CHECK(ss / draws == doctest::Approx(1.0).epsilon(0.02));

  Eigen::MatrixXd twin(2, 1);
  twin << 0.7, 0.7;
  const Eigen::VectorXd s = sample_prior(spec, twin, rng);
  CHECK(s[0] == doctest::Approx(s[1]).epsilon(1e-9));

  Rng a(99), b(99);
  const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  CHECK(sample_prior(spec, Xs, a) == sample_prior(spec, Xs, b));
}

namespace {

GPModel small_model(std::mt19937_64& rng, Eigen::Index n = 8) {
  const Eigen::MatrixXd X = oracle::random_inputs(n, 1, rng);
  return GPModel::fit(X, oracle::random_vector(n, rng, -0.5, 0.5),
                      KernelSpec::eq_isotropic(1.0, 0.3, 0.1));
}

}  // namespace

TEST_CASE("release constants") {
  std::mt19937_64 rng(13);
  const GPModel m = small_model(rng);
  const DPParams dp{2.0, 0.01, 1.5};
  const RkhsRelease r(m, Eigen::VectorXd::LinSpaced(4, 0.0, 1.0), dp);
  CHECK(r.bound() == doctest::Approx(bound_b(m.inverse_covariance(), true)));
  CHECK(r.bound() >= 0.0);
  CHECK(r.sensitivity() == doctest::Approx(1.5 * r.bound()));
  CHECK(r.scale() == r.sensitivity() * r.info().c / dp.epsilon);
  CHECK(r.info().c == c_delta(0.01, GaussianVariant::rkhs));
}

TEST_CASE("release requires a unit-variance kernel") {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  const GPModel m = GPModel::fit(X, Eigen::VectorXd::Zero(2), KernelSpec::eq_isotropic(2.0, 1.0, 0.1));
  Rng rng(1);
  CHECK_THROWS_AS(release_rkhs(m, X, DPParams{}, rng), std::invalid_argument);
}

TEST_CASE("huge epsilon returns the posterior mean") {
  std::mt19937_64 gen(14);
  const GPModel m = small_model(gen);
  const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
  Rng rng(5);
  const DPParams dp{1e6, 0.01, 1.0};
  const ReleaseResult r = release_rkhs(m, Xs, dp, rng);
  CHECK((r.predictions - m.predict_mean(Xs)).cwiseAbs().maxCoeff() < 1e-3 * dp.d);
}

TEST_CASE("release distribution: mean and covariance") {
  std::mt19937_64 gen(15);
  const GPModel m = small_model(gen);
  const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(4, -0.2, 1.2);
  const RkhsRelease r(m, Xs, DPParams{1.0, 0.01, 1.0});
  const int draws = 100000;
  Eigen::MatrixXd D(4, draws);
  Rng rng(6);
  for (int i = 0; i < draws; ++i) D.col(i) = r.draw(rng).predictions;
  const Eigen::MatrixXd prior = oracle::eq_cross(Xs, Xs, 1.0, m.spec().lengthscales);
  const Eigen::MatrixXd target = r.scale() * r.scale() * prior;
  CHECK(oracle::rel_frobenius(oracle::empirical_cov(D, r.mean()), target) < 0.05);
  const Eigen::VectorXd avg = D.rowwise().mean();
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double se = std::sqrt(target(j, j) / draws);
    CHECK(std::abs(avg[j] - m.predict_mean(Xs)[j]) < 3.0 * se);
  }
}

TEST_CASE("property: scale decreases in epsilon and increases in d") {
  std::mt19937_64 gen(16);
  const GPModel m = small_model(gen);
  const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    const double s = RkhsRelease(m, Xs, DPParams{eps, 0.01, 1.0}).scale();
    CHECK(s < prev);
    prev = s;
  }
  prev = 0.0;
  for (double d : {0.1, 1.0, 5.0, 50.0}) {
    const double s = RkhsRelease(m, Xs, DPParams{1.0, 0.01, d}).scale();
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("zero noise multiplier is the non-private mean") {
  std::mt19937_64 gen(17);
  const GPModel m = small_model(gen);
  const Eigen::MatrixXd Xs = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
  Rng rng(1);
  const ReleaseResult r = RkhsRelease(m, Xs, DPParams{}, 0.0).draw(rng);
  CHECK(r.predictions == r.mean);
  CHECK(r.info.noise_multiplier == 0.0);
}
