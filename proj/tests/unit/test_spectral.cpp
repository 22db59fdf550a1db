#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "qdgf/errors.hpp"
#include "qdgf/exemplars.hpp"
#include "qdgf/spectral.hpp"

using namespace qdgf;

namespace {

QuadraticForm random_factored(GridPtr g, int rank, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<std::size_t> pick(0, g->dof_count() - 1);
  std::vector<LinearFunctional> fs;
  for (int a = 0; a < rank; ++a) {
    LinearFunctional f;
    for (int t = 0; t < 4; ++t) f.terms.emplace_back(pick(gen), nd(gen));
    fs.push_back(f);
  }
  Eigen::MatrixXd s = testing::random_symmetric(rank, seed + 1);
  return QuadraticForm::factored(g, fs, s);
}

}  // namespace

TEST_CASE("identity form reproduces the covariance spectrum") {
  auto g = build_grid(1, {2.0}, {21}, 1, FieldKind::real);
  const CovarianceOperator c(g, exponential_kernel(1.0));
  const SignedSpectrum s = build_m_spectrum(c, identity_form(g));
  REQUIRE(s.positive.size() == c.kept_rank());
  CHECK((s.positive - c.modes().mu).cwiseAbs().maxCoeff() < 1e-10 * c.modes().mu[0]);
  CHECK(s.g_plus == 1);
  CHECK(s.g_minus == 0);
  const CoEigenpairs co = restricted_co_spectrum(c, identity_form(g), s);
  // beta_1 = sqrt(mu_1) |mu_1>
  const Eigen::VectorXd m1 = c.modes().vectors.col(0);
  const std::complex<double> ov = co.betas.col(0).dot(m1.cast<std::complex<double>>());
  CHECK(std::abs(ov) == doctest::Approx(std::sqrt(c.modes().mu[0])).epsilon(1e-10));
}

TEST_CASE("point exemplar spectrum and fundamental field") {
  auto g = build_grid(1, {3.0}, {61}, 1, FieldKind::complex);
  const CovarianceOperator c(g, gaussian_kernel(1.0));
  const QuadraticForm o = point_intensity_form(g);
  const SignedSpectrum s = build_m_spectrum(c, o);
  CHECK(s.leading(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.g_plus == 1);
  CHECK(s.nonzero_count() == 1);
  CHECK(s.trace_abs == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.values().sum() == doctest::Approx(s.trace_product).epsilon(1e-8));

  const FundamentalBasis b = fundamental_basis(s, c, 1);
  REQUIRE(b.degeneracy() == 1);
  const Field beta = b.field(0);
  const auto b0 = beta.value(g->origin_node(), 0);
  double sup = 0.0;
  for (std::size_t i = 0; i < g->node_count(); ++i)
    sup = std::max(sup, std::abs(beta.value(i, 0) * std::abs(b0) / b0 - std::exp(-0.5 * std::pow(g->coordinate(i, 0), 2))));
  CHECK(sup <= 1e-5);
  CHECK_THROWS_AS(fundamental_basis(s, c, -1), InvalidArgument);
}

TEST_CASE("dense and low-rank routes agree on random factored forms") {
  auto g = build_grid(1, {2.0}, {41}, 1, FieldKind::real);
  const CovarianceOperator c(g, gaussian_kernel(0.6));
  for (unsigned seed : {1u, 2u, 3u}) {
    const QuadraticForm o = random_factored(g, 3, seed);
    SpectrumOptions dense;
    dense.path = SpectrumPath::dense;
    SpectrumOptions low;
    low.path = SpectrumPath::low_rank;
    const SignedSpectrum sd = build_m_spectrum(c, o, dense);
    const CoEigenpairs co = low_rank_spectrum(c, o, low);
    REQUIRE(sd.nonzero_count() == co.values.size());
    const double scale = std::abs(sd.values()[0]) + std::abs(sd.values()[sd.nonzero_count() - 1]);
    CHECK((sd.values() - co.values).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    CHECK(co.residuals.maxCoeff() <= 1e-8);
    CHECK(sd.values().sum() == doctest::Approx(sd.trace_product).epsilon(1e-8));
  }
}

TEST_CASE("eigenvectors of the signed spectrum are orthonormal") {
  auto g = build_grid(2, {1.0, 1.0}, {7, 7}, 1, FieldKind::complex);
  const CovarianceOperator c(g, gaussian_kernel(0.5));
  const QuadraticForm o = random_factored(g, 5, 11);
  const SignedSpectrum s = build_m_spectrum(c, o);
  const Eigen::MatrixXcd v = s.vectors;
  CHECK((v.adjoint() * v - Eigen::MatrixXcd::Identity(v.cols(), v.cols())).norm() < 1e-10);
  CHECK((s.g_plus >= 1) == (s.positive.size() > 0));
  for (Eigen::Index i = 1; i < s.positive.size(); ++i) CHECK(s.positive[i - 1] >= s.positive[i]);
  for (Eigen::Index i = 1; i < s.negative.size(); ++i) CHECK(s.negative[i - 1] <= s.negative[i]);
}

TEST_CASE("analytic helicity Gram gives +-sqrt5 E / (3 ell)") {
  for (auto [E, ell] : {std::pair{3.0, 1.0}, std::pair{3.0, 2.0}, std::pair{6.0, 1.0}}) {
    const GramSpectrum gs = gram_spectrum(helicity_analytic_gram(E, ell), helicity_coefficients());
    REQUIRE(gs.values.size() == 6);
    const double lam = std::sqrt(5.0) * E / (3.0 * ell);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(gs.values[i] - lam) < 1e-10);
    for (int i = 3; i < 6; ++i) CHECK(std::abs(gs.values[i] + lam) < 1e-10);
  }
}

TEST_CASE("grid helicity spectrum equals the discrete stencil Gram spectrum") {
  const double E = 3.0, ell = 1.0;
  const auto k = make_flow_kernel(E, ell);
  auto stencil_eigs = [&](double h) {
    const Eigen::MatrixXd root = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(testing::stencil_gram(k, h)).operatorSqrt();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> t(root * helicity_coefficients() * root);
    return t.eigenvalues();
  };
  double prev = 1.0;
  for (int n : {13, 17}) {
    auto g = build_grid(3, {2, 2, 2}, {n, n, n}, 3, FieldKind::real);
    CovarianceAssembly lazy;
    lazy.materialize = false;
    lazy.decompose = false;
    const CovarianceOperator c(g, k.as_kernel(), lazy);
    const CoEigenpairs co = low_rank_spectrum(c, helicity_form(g));
    CHECK(co.g_plus == 3);
    CHECK(co.g_minus == 3);
    const Eigen::VectorXd oracle = stencil_eigs(4.0 / (n - 1));
    CHECK(std::abs(co.values[0] - oracle[5]) < 1e-10);
    CHECK(std::abs(co.values[5] - oracle[0]) < 1e-10);
    const double rel = std::abs(co.values[0] - std::sqrt(5.0)) / std::sqrt(5.0);
    CHECK(rel < prev);
    prev = rel;
    CHECK(co.residuals.maxCoeff() <= 1e-8);
  }
  CHECK(prev < 0.05);
}

TEST_CASE("low-rank route matches dense for the helicity form on a small grid") {
  auto g = build_grid(3, {1, 1, 1}, {5, 5, 5}, 3, FieldKind::real);
  const CovarianceOperator c(g, make_flow_kernel(3.0, 1.0).as_kernel());
  SpectrumOptions dense;
  dense.path = SpectrumPath::dense;
  const SignedSpectrum sd = build_m_spectrum(c, helicity_form(g), dense);
  const CoEigenpairs co = low_rank_spectrum(c, helicity_form(g));
  REQUIRE(sd.nonzero_count() == 6);
  CHECK((sd.values() - co.values).cwiseAbs().maxCoeff() < 1e-9 * std::abs(co.values[0]));
  CHECK(sd.g_plus == 3);
  CHECK(sd.g_minus == 3);
}

TEST_CASE("degeneracy clustering relative to the cluster leader") {
  Eigen::VectorXd b(5);
  b << 3.0, 3.0 * (1 - 1e-8), 2.0, 2.0 * (1 + 5e-7), 1.0;
  const auto ids = cluster_eigenvalues(b, 1e-6);
  CHECK(ids == std::vector<int>{0, 0, 1, 1, 2});
}
