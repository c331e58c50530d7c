#include <doctest.h>

#include <cmath>
#include <random>

#include "bullseye/nlls.hpp"
#include "support.hpp"

using namespace bullseye;

namespace {

// r_i = sum_j A_ij p_j - b_i.
fit::Problem linear_problem(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  fit::Problem pr;
  pr.num_residuals = static_cast<std::size_t>(a.rows());
  pr.residual = [a, b](std::span<const double> p, std::span<double> r) {
    const Eigen::VectorXd v = a * Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())) - b;
    for (Eigen::Index i = 0; i < v.size(); ++i) r[static_cast<std::size_t>(i)] = v[i];
  };
  pr.jacobian = [a](std::span<const double>, Eigen::MatrixXd& j) { j = a; };
  return pr;
}

fit::Problem rosenbrock() {
  fit::Problem pr;
  pr.num_residuals = 2;
  pr.residual = [](std::span<const double> p, std::span<double> r) {
    r[0] = 10.0 * (p[1] - p[0] * p[0]);
    r[1] = 1.0 - p[0];
  };
  pr.jacobian = [](std::span<const double> p, Eigen::MatrixXd& j) {
    j.resize(2, 2);
    j << -20.0 * p[0], 10.0, -1.0, 0.0;
  };
  return pr;
}

}  // namespace

TEST_CASE("linear least squares matches the normal equations") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(40, 4);
  Eigen::VectorXd b(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) a(i, j) = g(rng);
    b[i] = g(rng);
  }
  const Eigen::VectorXd exact = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  const auto res = fit::nlls_minimize(linear_problem(a, b), {0.0, 0.0, 0.0, 0.0});
  for (int j = 0; j < 4; ++j) CHECK(res.params[static_cast<std::size_t>(j)] == doctest::Approx(exact[j]).epsilon(1e-10));

  // Covariance is sigma^2 (A^T A)^-1 with sigma^2 = |r|^2 / (m - n).
  const double s2 = 2.0 * res.cost / 36.0;
  const Eigen::MatrixXd cov = s2 * (a.transpose() * a).inverse();
  CHECK((res.covariance - cov).norm() < 1e-10 * cov.norm());
  CHECK(res.sigma(2) == doctest::Approx(std::sqrt(cov(2, 2))).epsilon(1e-10));
}

TEST_CASE("starting at the optimum takes no steps") {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3);
  b << 1, 2, 3;
  const auto res = fit::nlls_minimize(linear_problem(a, b), {1.0, 2.0});
  CHECK(res.iterations == 0);
  CHECK(res.params == std::vector<double>{1.0, 2.0});
}

TEST_CASE("Rosenbrock converges from the classic start") {
  const auto res = fit::nlls_minimize(rosenbrock(), {-1.2, 1.0});
  CHECK(res.params[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.params[1] == doctest::Approx(1.0).epsilon(1e-6));

  // Same answer without the analytic Jacobian.
  auto numeric = rosenbrock();
  numeric.jacobian = nullptr;
  const auto res2 = fit::nlls_minimize(numeric, {-1.2, 1.0});
  CHECK(res2.params[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bounds are respected") {
  // Unconstrained optimum at x = 1; the box stops it at 0.5.
  const auto res = fit::nlls_minimize(rosenbrock(), {-1.2, 1.0}, {{-2.0, -2.0}, {0.5, 2.0}});
  CHECK(res.params[0] <= 0.5);
  CHECK(res.params[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(res.params[1] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("iteration cap raises NoConvergence with the best point") {
  fit::Options o;
  o.max_iterations = 2;
  try {
    fit::nlls_minimize(rosenbrock(), {-1.2, 1.0}, {}, o);
    FAIL("expected NoConvergence");
  } catch (const fit::NoConvergence& e) {
    CHECK(e.kind() == ErrorKind::NoConvergence);
    CHECK(e.best().size() == 2);
    CHECK(e.cost() < 0.5 * (4.4 * 4.4 + 2.2 * 2.2));
  }
}

TEST_CASE("rank-deficient Jacobian has no covariance") {
  Eigen::MatrixXd j(3, 2);
  j << 1, 2, 2, 4, 3, 6;
  CHECK_ERROR_KIND(fit::covariance_from_jacobian(j, 1.0), ErrorKind::SingularNormalMatrix);
}
