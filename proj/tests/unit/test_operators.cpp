#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "qdgf/errors.hpp"
#include "qdgf/operators.hpp"

using namespace qdgf;

namespace {

Field field_from(GridPtr g, const std::function<Eigen::Vector3d(double, double, double)>& f) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(g->dof_count()));
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    const auto x = g->coordinates(i);
    const Eigen::Vector3d val = f(x[0], x[1], x[2]);
    for (int m = 0; m < 3; ++m) v[static_cast<Eigen::Index>(g->dof(i, m))] = val[m];
  }
  return Field(g, v);
}

}  // namespace

TEST_CASE("scalar covariance trace equals |box| C(0)") {
  auto g = build_grid(1, {3.0}, {61}, 1, FieldKind::complex);
  const CovarianceOperator c(g, gaussian_kernel(1.0));
  CHECK(c.trace() == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(c.modes().mu[0] > 0.0);
}

TEST_CASE("narrow kernel gives a nearly diagonal covariance") {
  auto g = build_grid(1, {1.0}, {11}, 1, FieldKind::real);
  const CovarianceOperator c(g, gaussian_kernel(0.01));
  const Eigen::MatrixXd& w = c.weighted_matrix();
  CHECK((w - Eigen::MatrixXd(w.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-80);  // neighbours: exp(-200)
  for (std::size_t i = 0; i < g->node_count(); ++i) CHECK(w(i, i) == doctest::Approx(g->weight(i)));
}

TEST_CASE("flow covariance trace equals 2E |box|") {
  auto g = build_grid(3, {1, 1, 1}, {5, 5, 5}, 3, FieldKind::real);
  const CovarianceOperator c(g, make_flow_kernel(3.0, 1.0).as_kernel());
  CHECK(c.trace() == doctest::Approx(2.0 * 3.0 * 8.0).epsilon(1e-10));
  const auto* any = &c;
  CHECK(any->modes().most_negative > -1e-8 * any->modes().mu[0]);
}

TEST_CASE("covariance modes are orthonormal and reconstruct the matrix") {
  auto g = build_grid(2, {1.5, 1.5}, {9, 9}, 1, FieldKind::real);
  const CovarianceOperator c(g, exponential_kernel(0.7));
  const auto& m = c.modes();
  const Eigen::MatrixXd gram = m.vectors.transpose() * m.vectors;
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd r = m.vectors * m.mu.asDiagonal() * m.vectors.transpose();
  CHECK((r - c.weighted_matrix()).cwiseAbs().maxCoeff() <= 1e-8 * m.mu[0]);
  for (Eigen::Index i = 1; i < m.mu.size(); ++i) CHECK(m.mu[i - 1] >= m.mu[i]);
}

TEST_CASE("square root applied twice matches the covariance") {
  auto g = build_grid(1, {2.0}, {41}, 1, FieldKind::complex);
  const CovarianceOperator c(g, exponential_kernel(0.5));
  Eigen::VectorXcd v = Eigen::VectorXcd::Random(41);
  CHECK((c.apply_sqrt(c.apply_sqrt(v)) - c.apply(v)).norm() <= 1e-8 * c.modes().mu[0] * v.norm());
  CHECK(c.apply_sqrt(Eigen::VectorXcd::Zero(41)).norm() == 0.0);
  const Eigen::VectorXcd m1 = c.modes().vectors.col(0).cast<std::complex<double>>();
  CHECK((c.apply_sqrt(c.apply_sqrt(m1)) - c.modes().mu[0] * m1).norm() < 1e-10);
}

TEST_CASE("lazy covariance entries match the dense matrix") {
  auto g = build_grid(3, {1, 1, 1}, {3, 3, 3}, 3, FieldKind::real);
  const auto k = make_flow_kernel(2.0, 0.9).as_kernel();
  const CovarianceOperator dense(g, k);
  CovarianceAssembly lazy_opts;
  lazy_opts.materialize = false;
  lazy_opts.decompose = false;
  const CovarianceOperator lazy(g, k, lazy_opts);
  CHECK_FALSE(lazy.materialized());
  for (std::size_t q : {0ul, 13ul, 40ul, 80ul}) CHECK((lazy.column(q) - dense.weighted_matrix().col(q)).norm() < 1e-14);
  std::vector<std::pair<std::size_t, double>> x = {{3, 1.5}, {50, -0.5}};
  Eigen::VectorXd xd = Eigen::VectorXd::Zero(81);
  xd[3] = 1.5;
  xd[50] = -0.5;
  CHECK((lazy.apply_sparse(x) - dense.weighted_matrix() * xd).norm() < 1e-13);
}

TEST_CASE("indefinite explicit covariance is rejected") {
  auto g = build_grid(1, {1.0}, {3}, 1, FieldKind::real);
  Eigen::MatrixXd w = Eigen::Vector3d(1.0, 0.5, -0.1).asDiagonal();
  CHECK_THROWS_AS(CovarianceOperator(g, w), NumericalError);
}

TEST_CASE("point intensity form") {
  auto g = build_grid(1, {3.0}, {61}, 1, FieldKind::complex);
  const QuadraticForm o = point_intensity_form(g);
  CHECK(o.rank() == 1);
  CHECK(o.value(Field(g, Eigen::VectorXcd::Ones(61))) == doctest::Approx(1.0));
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(61);
  v[static_cast<Eigen::Index>(g->origin_node())] = 0.0;
  CHECK(o.value(Field(g, v)) == doctest::Approx(0.0));
  Eigen::VectorXcd c(61);
  for (std::size_t i = 0; i < 61; ++i) c[static_cast<Eigen::Index>(i)] = std::exp(-0.5 * std::pow(g->coordinate(i, 0), 2));
  CHECK(o.value(Field(g, c)) == doctest::Approx(1.0));
  // dense and factored evaluations agree
  const Eigen::VectorXcd x = Field(g, c).weighted();
  CHECK(o.value_weighted(x) == doctest::Approx(x.dot(o.weighted_matrix() * x).real()));
}

TEST_CASE("helicity form on simple flows") {
  auto g = build_grid(3, {1, 1, 1}, {11, 11, 11}, 3, FieldKind::real);
  const QuadraticForm o = helicity_form(g);
  CHECK(o.rank() == 6);
  const Field rot = field_from(g, [](double x1, double x2, double) { return Eigen::Vector3d(-x2, x1, 0); });
  CHECK(std::abs(o.value(rot)) < 1e-14);
  const Field shifted = field_from(g, [](double x1, double x2, double) { return Eigen::Vector3d(1 - x2, x1, 0); });
  CHECK(std::abs(o.value(shifted)) < 1e-14);
  // v = (1, 0, x2): curl = (1, 0, 0) is exact for linear fields
  const Field twist = field_from(g, [](double, double x2, double) { return Eigen::Vector3d(1, 0, x2); });
  CHECK(o.value(twist) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("discrete helicity converges at second order") {
  // v = (1 + sin x2, sin x3, sin x1): v(0) = e1, curl v(0) = (-1, -1, -1), helicity -1.
  auto helicity = [](int n) {
    auto g = build_grid(3, {1, 1, 1}, {n, n, n}, 3, FieldKind::real);
    const Field v = field_from(g, [](double x1, double x2, double x3) {
      return Eigen::Vector3d(1 + std::sin(x2), std::sin(x3), std::sin(x1));
    });
    return helicity_form(g).value(v);
  };
  const double h = 0.2;
  CHECK(helicity(11) == doctest::Approx(-std::sin(h) / h).epsilon(1e-12));
  const double e1 = std::abs(helicity(11) + 1.0), e2 = std::abs(helicity(21) + 1.0);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("symmetrization") {
  auto g = build_grid(1, {1.0}, {3}, 1, FieldKind::real);
  Eigen::MatrixXcd s(3, 3);
  s << 1, 2, 0, 2, 3, 1, 0, 1, 5;
  CHECK((symmetric_part(s) - s).norm() == 0.0);
  Eigen::MatrixXcd a(3, 3);
  a << 0, 1, 0, -1, 0, 2, 0, -2, 0;
  CHECK(symmetric_part(a).norm() == 0.0);
  Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(2, 2);
  n(0, 1) = 1.0;
  Eigen::MatrixXcd expected(2, 2);
  expected << 0, 0.5, 0.5, 0;
  CHECK((symmetric_part(n) - expected).norm() == 0.0);
  CHECK((symmetrize(g, s).weighted_matrix() - s).norm() == 0.0);
}

TEST_CASE("factored forms validate their inputs") {
  auto g = build_grid(1, {1.0}, {3}, 1, FieldKind::real);
  Eigen::MatrixXd s(1, 2);
  s << 1, 0;
  CHECK_THROWS_AS(QuadraticForm::factored(g, {LinearFunctional{{{0, 1.0}}, "a"}}, s), InvalidArgument);
  CHECK_THROWS_AS(QuadraticForm::factored(g, {LinearFunctional{{{7, 1.0}}, "a"}}, Eigen::MatrixXd::Ones(1, 1)),
                  InvalidArgument);
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 0, 0;
  CHECK_THROWS_AS(QuadraticForm::factored(g, {LinearFunctional{{{0, 1.0}}, "a"}, LinearFunctional{{{1, 1.0}}, "b"}}, asym),
                  InvalidArgument);
}
