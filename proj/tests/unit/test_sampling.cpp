#include <doctest.h>

#include <cmath>

#include "qdgf/errors.hpp"
#include "qdgf/sampling.hpp"
#include "qdgf/tails.hpp"

using namespace qdgf;

namespace {

struct PointSetup {
  GridPtr grid = build_grid(1, {3.0}, {31}, 1, FieldKind::complex);
  CovarianceOperator cov{grid, gaussian_kernel(1.0)};
  QuadraticForm form = point_intensity_form(grid);
  SignedSpectrum spectrum = build_m_spectrum(cov, form);
};

}  // namespace

TEST_CASE("reconstructed fields reproduce Q and the kernel covariance") {
  auto g = build_grid(1, {2.0}, {9}, 1, FieldKind::real);
  const CovarianceOperator c(g, exponential_kernel(1.0));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
  s(0, 1) = s(1, 0) = 0.5;  // Q = phi(x_a) phi(x_b)
  const QuadraticForm o = QuadraticForm::factored(g, {{{{2, 1.0}}, "a"}, {{{6, 1.0}}, "b"}}, s);
  const SignedSpectrum sp = build_m_spectrum(c, o);
  const SpectralSampler sampler(c, sp);
  RngStream rng(5, 0);
  const int n = 20000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(9, 9);
  double q_err = 0.0;
  for (int i = 0; i < n; ++i) {
    const SpectralCoefficients t = sampler.draw(rng);
    const Field f = sampler.reconstruct(t);
    const Eigen::VectorXd v = f.values().real();
    acc += v * v.transpose();
    q_err = std::max(q_err, std::abs(o.value(f) - sampler.quadratic_value(t)) / (1.0 + std::abs(o.value(f))));
  }
  CHECK(q_err < 1e-10);
  acc /= n;
  double worst = 0.0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const double k = std::exp(-std::abs(g->coordinate(i, 0) - g->coordinate(j, 0)));
      // sd of a product of unit-variance normals is at most sqrt(2)
      worst = std::max(worst, std::abs(acc(i, j) - k) / std::sqrt(2.0 / n));
    }
  CHECK(worst < 5.0);
}

TEST_CASE("complex samples are circular") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  RngStream rng(9, 0);
  const int n = 20000;
  std::complex<double> pseudo = 0.0;
  double power = 0.0;
  const std::size_t o = ps.grid->origin_node();
  for (int i = 0; i < n; ++i) {
    const auto z = sampler.reconstruct(sampler.draw(rng)).value(o, 0);
    power += std::norm(z);
    pseudo += z * z;
  }
  CHECK(power / n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(pseudo / double(n)) < 0.05);
}

TEST_CASE("sample geometry matches field-space computation") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  const FundamentalBasis basis = fundamental_basis(ps.spectrum, ps.cov, 1);
  RngStream rng(3, 1);
  for (int i = 0; i < 20; ++i) {
    const SpectralCoefficients t = sampler.draw(rng);
    const Field phi = sampler.reconstruct(t);
    const Field bar = sampler.fundamental_projection(t, 1);
    const Field bar2 = fundamental_projection(t, ps.spectrum, basis);
    CHECK((bar.values() - bar2.values()).norm() <= 1e-10 * (1.0 + bar.values().norm()));
    const SampleGeometry geo = sampler.geometry(t, 1);
    CHECK(geo.norm == doctest::Approx(l2_norm(phi)).epsilon(1e-10));
    CHECK(geo.fundamental_norm == doctest::Approx(l2_norm(bar)).epsilon(1e-10));
    CHECK(geo.residual_norm == doctest::Approx(l2_norm(residual(phi, bar))).epsilon(1e-9));
    CHECK(geo.distance == doctest::Approx(distance_statistic(phi, bar)).epsilon(1e-9));
    CHECK(geo.overlap == doctest::Approx(inner_product(bar, phi).real()).epsilon(1e-9));
    const double r2 = geo.norm * geo.norm + geo.fundamental_norm * geo.fundamental_norm - 2.0 * geo.overlap;
    CHECK(geo.residual_norm * geo.residual_norm == doctest::Approx(r2).epsilon(1e-8));
  }
  CHECK_THROWS_AS(sampler.fundamental_coordinates(sampler.draw(rng), -1), InvalidArgument);
}

TEST_CASE("distance statistic edge values") {
  auto g = build_grid(1, {1.0}, {5}, 1, FieldKind::complex);
  Eigen::VectorXcd v(5);
  v << 1.0, 2.0, std::complex<double>(0, 1), -1.0, 0.5;
  const Field f(g, v);
  CHECK(distance_statistic(f, Field(g, 3.0 * v)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(distance_statistic(f, Field(g, -v)) == doctest::Approx(2.0));
  CHECK(distance_statistic(f, Field(g, std::complex<double>(0, 1) * v)) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(distance_statistic(f, Field(g)), NumericalError);
}

TEST_CASE("tilt parameter and normalizer") {
  Eigen::VectorXd lam(3);
  lam << 2.0, 1.0, -0.5;
  for (auto kind : {FieldKind::real, FieldKind::complex}) {
    const double c = kind == FieldKind::complex ? 1.0 : 2.0;
    CHECK(tilt_parameter(lam, 1, 1.0, kind) == 0.0);  // below the mean 2.5 / c' scale
    const double th = tilt_parameter(lam, 1, 30.0, kind);
    double m = 0.0;
    for (int i = 0; i < 3; ++i) m += lam[i] / (1.0 - c * th * lam[i]);
    CHECK(m == doctest::Approx(30.0).epsilon(1e-10));
    double lz = 0.0;
    for (int i = 0; i < 3; ++i) lz -= std::log(1.0 - c * th * lam[i]) / c;
    CHECK(tilt_log_normalizer(lam, 1, th, kind) == doctest::Approx(lz).epsilon(1e-12));
  }
  CHECK_THROWS_AS(tilt_parameter(lam, 0, 1.0, FieldKind::real), InvalidArgument);
  CHECK_THROWS_AS(tilt_parameter(Eigen::VectorXd::Constant(2, -1.0), 1, 1.0, FieldKind::real), InvalidArgument);
}

TEST_CASE("conditional ensembles: memoryless single complex mode") {
  // Q = |phi(0)|^2 is Exp(1): P(Q > u) = e^-u and E[Q | Q > u] = u + 1
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  for (auto [method, u] : {std::pair{SamplingMethod::rejection, 2.0}, std::pair{SamplingMethod::tilted, 25.0}}) {
    RngStream rng(17, 4);
    const ConditionalEnsemble ens = conditional_ensemble(sampler, 1, u, method, 4000, rng);
    REQUIRE(ens.samples.size() == 4000);
    std::vector<double> q, w;
    for (const auto& s : ens.samples) {
      CHECK(s.q > u);
      q.push_back(s.q);
      w.push_back(s.weight);
    }
    const WeightedMean m = weighted_mean(q, w);
    CHECK(std::abs(m.mean - (u + 1.0)) < 5.0 * m.error);
    CHECK(std::abs(ens.tail_probability - std::exp(-u)) < 5.0 * ens.tail_error);
    if (method == SamplingMethod::rejection) {
      CHECK(ens.ess == doctest::Approx(4000.0));
    } else {
      // theta = 1 - 1/u, excess X ~ Exp(mean u), w = e^{-theta X}:
      // ESS / n = E[w]^2 / E[w^2] = (2u - 1) / u^2
      CHECK(ens.ess / 4000.0 == doctest::Approx((2.0 * u - 1.0) / (u * u)).epsilon(0.15));
    }
  }
}

TEST_CASE("automatic method switches to tilting above the mean") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  RngStream a(1, 2), b(1, 2);
  const ConditionalEnsemble lo = conditional_ensemble(sampler, 1, 0.5, SamplingMethod::automatic, 10, a);
  CHECK(lo.method == SamplingMethod::rejection);
  const ConditionalEnsemble hi = conditional_ensemble(sampler, 1, 8.0, SamplingMethod::automatic, 10, b);
  CHECK(hi.method == SamplingMethod::tilted);
  CHECK(hi.theta > 0.0);
  CHECK_THROWS_AS(conditional_ensemble(sampler, -1, 1.0, SamplingMethod::rejection, 10, a), InvalidArgument);
  EnsembleOptions tight;
  tight.max_proposals = 50;
  CHECK_THROWS_AS(conditional_ensemble(sampler, 1, 6.0, SamplingMethod::rejection, 10, a, tight), NumericalError);
}

TEST_CASE("ensembles are reproducible from seed and stream") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  RngStream a(42, 7), b(42, 7), c(42, 8);
  const auto ea = conditional_ensemble(sampler, 1, 1.0, SamplingMethod::rejection, 50, a);
  const auto eb = conditional_ensemble(sampler, 1, 1.0, SamplingMethod::rejection, 50, b);
  const auto ec = conditional_ensemble(sampler, 1, 1.0, SamplingMethod::rejection, 50, c);
  bool same = true, differ = false;
  for (std::size_t i = 0; i < 50; ++i) {
    same = same && ea.samples[i].t.values == eb.samples[i].t.values;
    differ = differ || ea.samples[i].q != ec.samples[i].q;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("weight statistics") {
  CHECK(effective_sample_size({1.0, 1.0, 1.0, 1.0}) == doctest::Approx(4.0));
  CHECK(effective_sample_size({0.0, 5.0, 0.0}) == doctest::Approx(1.0));
  CHECK(weighted_median({3.0, 1.0, 2.0}, {1.0, 1.0, 1.0}) == 2.0);
  CHECK(weighted_median({3.0, 1.0, 2.0}, {10.0, 1.0, 1.0}) == 3.0);
  CHECK(weighted_mean({1.0, 3.0}, {1.0, 3.0}).mean == doctest::Approx(2.5));
  CHECK_THROWS_AS(weighted_mean({}, {}), InvalidArgument);
  CHECK_THROWS_AS(weighted_median({1.0}, {1.0, 2.0}), InvalidArgument);
}

TEST_CASE("sampler rejects mismatched coefficients") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  SpectralCoefficients t;
  t.kind = FieldKind::complex;
  t.values = Eigen::VectorXcd::Zero(3);
  CHECK_THROWS_AS(sampler.reconstruct(t), InvalidArgument);
  RngStream rng(1, 1);
  SpectralCoefficients r = sampler.draw(rng);
  r.kind = FieldKind::real;
  CHECK_THROWS_AS(sampler.quadratic_value(r), InvalidArgument);
}

TEST_CASE("reconstruction of unit and zero coefficients") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  SpectralCoefficients t;
  t.kind = FieldKind::complex;
  t.values = Eigen::VectorXcd::Zero(sampler.mode_count());
  CHECK(sampler.reconstruct(t).values().norm() == 0.0);
  t.values[0] = 1.0;
  const Field phi = sampler.reconstruct(t);
  const auto z0 = phi.value(ps.grid->origin_node(), 0);
  const auto phase = z0 / std::abs(z0);
  double sup = 0.0;
  for (std::size_t i = 0; i < ps.grid->node_count(); ++i) {
    const double x = ps.grid->coordinate(i, 0);
    sup = std::max(sup, std::abs(phi.value(i, 0) / phase - std::exp(-0.5 * x * x)));
  }
  CHECK(sup < 1e-5);
  CHECK(sampler.quadratic_value(t) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("quadratic value equals the observable on the reconstructed field") {
  SUBCASE("point intensity: Q = |phi(0)|^2") {
    PointSetup ps;
    const SpectralSampler sampler(ps.cov, ps.spectrum);
    RngStream rng(2, 2);
    for (int i = 0; i < 50; ++i) {
      const auto t = sampler.draw(rng);
      const double q = std::norm(sampler.reconstruct(t).value(ps.grid->origin_node(), 0));
      CHECK(sampler.quadratic_value(t) == doctest::Approx(q).epsilon(1e-8));
    }
  }
  SUBCASE("helicity: Q = v(0) . curl_h v(0)") {
    auto g = build_grid(3, {1.0}, {5}, 3, FieldKind::real);
    const CovarianceOperator c(g, make_flow_kernel(3.0, 1.0).as_kernel());
    const SpectralSampler sampler(c, build_m_spectrum(c, helicity_form(g)));
    const double h = g->spacing(0);
    RngStream rng(2, 3);
    for (int i = 0; i < 20; ++i) {
      const auto t = sampler.draw(rng);
      const Field v = sampler.reconstruct(t);
      auto at = [&](int ax, int step, int comp) {
        std::vector<int> off(3, 0);
        off[static_cast<std::size_t>(ax)] = step;
        return v.value(g->node_at_offset(off), comp).real();
      };
      auto d = [&](int ax, int comp) { return (at(ax, 1, comp) - at(ax, -1, comp)) / (2 * h); };
      const Eigen::Vector3d curl(d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0));
      const Eigen::Vector3d v0(at(0, 0, 0), at(0, 0, 1), at(0, 0, 2));
      CHECK(sampler.quadratic_value(t) == doctest::Approx(v0.dot(curl)).epsilon(1e-8));
    }
  }
}

TEST_CASE("fundamental split: supported coefficients and the distance bound") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  RngStream rng(8, 8);
  SpectralCoefficients t = sampler.draw(rng);
  SpectralCoefficients inside = t;
  inside.values.tail(inside.values.size() - 1).setZero();
  CHECK(sampler.geometry(inside, 1).residual_norm < 1e-12);
  CHECK(sampler.geometry(inside, 1).distance < 1e-6);
  SpectralCoefficients outside = t;
  outside.values[0] = 0.0;
  CHECK(sampler.fundamental_projection(outside, 1).values().norm() == 0.0);
  CHECK_THROWS_AS(sampler.geometry(outside, 1), NumericalError);

  const QuadraticForm form = point_intensity_form(ps.grid);
  bool bound = true;
  for (int i = 0; i < 10000; ++i) {
    t = sampler.draw(rng);
    const SampleGeometry geo = sampler.geometry(t, 1);
    bound = bound && geo.distance <= 2.0 * geo.residual_norm / geo.fundamental_norm + 1e-12;
    if (i < 20) {
      const double q_bar = form.value(sampler.fundamental_projection(t, 1));
      CHECK(q_bar == doctest::Approx(sampler.eigenvalues()[0] * std::norm(t.values[0])).epsilon(1e-8));
    }
  }
  CHECK(bound);
}

TEST_CASE("tilt closed forms") {
  CHECK(tilt_parameter(Eigen::VectorXd::Ones(1), 1, 10.0, FieldKind::complex) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(tilt_parameter(Eigen::VectorXd::Ones(1), 1, 9.0, FieldKind::real) == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
  CHECK(tilt_parameter(Eigen::VectorXd::Ones(1), 1, 0.7, FieldKind::complex) == 0.0);
}

TEST_CASE("rejection acceptance and the tilted tail estimate") {
  PointSetup ps;
  const SpectralSampler sampler(ps.cov, ps.spectrum);
  RngStream rng(4, 4);
  const auto all = conditional_ensemble(sampler, 1, 0.0, SamplingMethod::rejection, 500, rng);
  CHECK(all.acceptance_rate == 1.0);
  const auto e3 = conditional_ensemble(sampler, 1, 3.0, SamplingMethod::rejection, 2000, rng);
  CHECK(std::abs(e3.acceptance_rate - std::exp(-3.0)) < 3.0 * e3.tail_error);

  // two complex modes (2, 1): P(Q > 8) = 2 e^-4 - e^-8
  auto g = build_grid(1, {1.0}, {3}, 1, FieldKind::complex);
  const CovarianceOperator c(g, Eigen::MatrixXd(Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal()));
  const SpectralSampler two(c, build_m_spectrum(c, QuadraticForm::dense(g, Eigen::Vector3cd(2.0, 1.0, 0.0).asDiagonal().toDenseMatrix())));
  RngStream r2(6, 6);
  const auto tilted = conditional_ensemble(two, 1, 8.0, SamplingMethod::tilted, 100000, r2);
  const double oracle = 2.0 * std::exp(-4.0) - std::exp(-8.0);
  CHECK(std::abs(tilted.tail_probability - oracle) < 3.0 * tilted.tail_error);
}
