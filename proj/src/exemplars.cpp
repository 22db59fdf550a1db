#include "qdgf/exemplars.hpp"

#include <algorithm>
#include <cmath>

#include "qdgf/errors.hpp"

namespace qdgf {

PointExemplarPrediction point_prediction(const CovarianceKernel& kernel, GridPtr grid) {
  if (grid->components() != 1 || kernel.components() != 1)
    throw InvalidArgument("point exemplar needs a scalar kernel and grid");
  Eigen::VectorXcd values(static_cast<Eigen::Index>(grid->node_count()));
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const auto x = grid->coordinates(i);
    values[static_cast<Eigen::Index>(i)] = kernel.block(x)(0, 0);
  }
  const std::vector<double> zero(static_cast<std::size_t>(grid->dim()), 0.0);
  PointExemplarPrediction p{kernel.block(zero)(0, 0), 1, Field(grid, values)};
  if (!(p.lambda1 > 0.0)) throw InvalidArgument("point exemplar needs C(0) > 0");
  const double norm = l2_norm(p.profile);
  p.profile = Field(grid, values / norm);
  return p;
}

HelicityExemplarPrediction helicity_eigenvalues(double energy, double ell) {
  if (!(energy > 0.0) || !(ell > 0.0)) throw InvalidArgument("helicity exemplar needs E > 0 and ell > 0");
  HelicityExemplarPrediction p;
  p.lambda_plus = std::sqrt(5.0) * energy / (3.0 * ell);
  p.lambda_minus = -p.lambda_plus;
  p.alpha = std::sqrt(3.0) / (2.0 * std::sqrt(energy));
  return p;
}

Eigen::Vector3d helicity_profile(const IsotropicFlowKernel& k, const Eigen::Vector3d& x, int sign,
                                 const Eigen::Vector3d& e_t) {
  if (std::abs(e_t.norm() - 1.0) > 1e-12) throw InvalidArgument("e_t must be a unit vector");
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const double r = x.norm();
  const auto& f = k.profile;
  Eigen::Vector3d u = f.f(r) * e_t;
  if (r > 0.0) {
    const Eigen::Vector3d e = x / r;
    u += 0.5 * r * f.df(r) * (e_t - e.dot(e_t) * e);
    u += sign * (k.taylor_scale / std::sqrt(5.0)) * (2.0 * f.df(r) + 0.5 * r * f.d2f(r)) * e.cross(e_t);
  }
  return u;
}

Field helicity_prediction(const IsotropicFlowKernel& k, GridPtr grid, int sign, const Eigen::Vector3d& e_t) {
  if (grid->dim() != 3 || grid->components() != 3) throw InvalidArgument("helicity prediction needs a 3D vector grid");
  Eigen::VectorXcd v(static_cast<Eigen::Index>(grid->dof_count()));
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const auto c = grid->coordinates(i);
    const Eigen::Vector3d u = helicity_profile(k, Eigen::Vector3d(c[0], c[1], c[2]), sign, e_t);
    for (int m = 0; m < 3; ++m) v[static_cast<Eigen::Index>(grid->dof(i, m))] = u[m];
  }
  return Field(std::move(grid), std::move(v));
}

Eigen::MatrixXd helicity_analytic_gram(double energy, double ell) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 6);
  g.topLeftCorner(3, 3) = (2.0 * energy / 3.0) * Eigen::Matrix3d::Identity();
  g.bottomRightCorner(3, 3) = (10.0 * energy / (3.0 * ell * ell)) * Eigen::Matrix3d::Identity();
  return g;
}

CurlCurlReport curl_curl_identity_check(const IsotropicFlowKernel& k, int nu, const std::vector<double>& hs) {
  if (nu < 1 || nu > 3) throw InvalidArgument("nu must be 1, 2 or 3");
  CurlCurlReport rep;
  rep.limit = 10.0 * k.energy / (3.0 * k.taylor_scale * k.taylor_scale);
  const Eigen::Vector3d e = Eigen::Vector3d::Unit(nu - 1);
  const double t0 = k.block(Eigen::Vector3d::Zero()).trace();
  for (double h : hs) {
    if (!(h > 0.0)) throw InvalidArgument("stencil widths must be positive");
    const double tp = k.block(h * e).trace();
    const double tm = k.block(-h * e).trace();
    const double value = -(tp - 2.0 * t0 + tm) / (h * h);
    rep.h.push_back(h);
    rep.value.push_back(value);
    rep.error.push_back(std::abs(value - rep.limit));
  }
  for (std::size_t i = 1; i < rep.h.size(); ++i)
    rep.order.push_back(std::log(rep.error[i - 1] / rep.error[i]) / std::log(rep.h[i - 1] / rep.h[i]));
  return rep;
}

GramIdentityReport gram_identity_check(const CovarianceOperator& c, const QuadraticForm& helicity, int sign,
                                       double energy, double ell) {
  if (!helicity.is_factored() || helicity.rank() != 6) throw InvalidArgument("expected the rank-6 helicity form");
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  const Grid& g = c.grid();
  const auto N = static_cast<std::size_t>(g.components());
  const double kappa = sign * ell / std::sqrt(5.0);

  std::vector<std::vector<std::pair<std::size_t, double>>> weighted(6);
  for (std::size_t a = 0; a < 6; ++a)
    for (const auto& [dof, coef] : helicity.functionals()[a].terms)
      weighted[a].emplace_back(dof, coef / std::sqrt(g.weight(dof / N)));

  // Candidate eigenfield for direction l, in weighted coordinates.
  std::vector<Eigen::VectorXd> beta(3);
  for (int l = 0; l < 3; ++l) {
    std::vector<std::pair<std::size_t, double>> combo = weighted[static_cast<std::size_t>(l)];
    for (const auto& [dof, coef] : weighted[static_cast<std::size_t>(l + 3)]) combo.emplace_back(dof, kappa * coef);
    beta[static_cast<std::size_t>(l)] = c.apply_sparse(combo);
  }
  auto apply_functional = [&](std::size_t a, const Eigen::VectorXd& field) {
    double s = 0.0;
    for (const auto& [dof, coef] : weighted[a]) s += coef * field[static_cast<Eigen::Index>(dof)];
    return s;
  };

  GramIdentityReport rep;
  for (int gi = 0; gi < 3; ++gi)
    for (int l = 0; l < 3; ++l) {
      const auto& b = beta[static_cast<std::size_t>(l)];
      rep.raw(gi, l) = apply_functional(static_cast<std::size_t>(gi), b) +
                       kappa * apply_functional(static_cast<std::size_t>(gi + 3), b);
    }
  const double alpha = std::sqrt(3.0) / (2.0 * std::sqrt(energy));
  rep.normalized = alpha * alpha * rep.raw;
  rep.expected_diagonal = 4.0 * energy / 3.0;
  const Eigen::Vector3d d = rep.raw.diagonal();
  const double mean = d.mean();
  rep.diagonal_spread = (d.maxCoeff() - d.minCoeff()) / mean;
  double off = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) off = std::max(off, std::abs(rep.raw(i, j)));
  rep.offdiagonal_ratio = off / mean;
  return rep;
}

std::vector<double> principal_angles_degrees(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("subspaces live in different dimensions");
  const Eigen::MatrixXcd qa = Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ() *
                              Eigen::MatrixXcd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXcd qb = Eigen::HouseholderQR<Eigen::MatrixXcd>(b).householderQ() *
                              Eigen::MatrixXcd::Identity(b.rows(), b.cols());
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(qa.adjoint() * qb);
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    angles.push_back(std::acos(std::min(1.0, svd.singularValues()[i])) * 180.0 / M_PI);
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace qdgf
