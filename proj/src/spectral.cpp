#include "qdgf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qdgf/errors.hpp"

namespace qdgf {

namespace {

using cplx = std::complex<double>;

struct Split {
  Eigen::VectorXd positive;
  Eigen::VectorXd negative;
  std::vector<Eigen::Index> order;  // source columns, positive desc then negative asc
};

/// Keeps |lambda| > 1e-12 max|lambda|; throws "degenerate observable" when
/// nothing survives or the spectrum is at roundoff level relative to `scale`.
Split split_branches(const Eigen::VectorXd& values, double scale) {
  const double top = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  if (!(top > 1e-13 * scale) || top == 0.0)
    throw NumericalError("degenerate observable: M = C^{1/2} O C^{1/2} vanishes on the kept modes");
  const double thr = 1e-12 * top;
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > thr) pos.push_back(i);
    else if (values[i] < -thr) neg.push_back(i);
  }
  std::stable_sort(pos.begin(), pos.end(), [&](auto a, auto b) { return values[a] > values[b]; });
  std::stable_sort(neg.begin(), neg.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  Split s;
  s.positive.resize(static_cast<Eigen::Index>(pos.size()));
  s.negative.resize(static_cast<Eigen::Index>(neg.size()));
  for (std::size_t i = 0; i < pos.size(); ++i) s.positive[static_cast<Eigen::Index>(i)] = values[pos[i]];
  for (std::size_t i = 0; i < neg.size(); ++i) s.negative[static_cast<Eigen::Index>(i)] = values[neg[i]];
  s.order = pos;
  s.order.insert(s.order.end(), neg.begin(), neg.end());
  return s;
}

int leading_cluster_size(const std::vector<int>& ids, Eigen::Index offset, Eigen::Index count) {
  if (count == 0) return 0;
  const int lead = ids[static_cast<std::size_t>(offset)];
  int g = 0;
  for (Eigen::Index i = offset; i < offset + count; ++i)
    if (ids[static_cast<std::size_t>(i)] == lead) ++g;
  return g;
}

double form_scale(const QuadraticForm& o) {
  if (!o.is_factored()) return o.dense_matrix().norm();
  const Eigen::MatrixXd f = o.weighted_functionals();
  return o.coefficients().norm() * f.squaredNorm();
}

std::vector<int> cluster_split(const Split& s, double tol) {
  std::vector<int> ids = cluster_eigenvalues(s.positive, tol, 0);
  const int next = ids.empty() ? 0 : ids.back() + 1;
  const std::vector<int> neg = cluster_eigenvalues(s.negative, tol, next);
  ids.insert(ids.end(), neg.begin(), neg.end());
  return ids;
}

}  // namespace

std::vector<int> cluster_eigenvalues(const Eigen::VectorXd& branch, double tol, int first_id) {
  std::vector<int> ids(static_cast<std::size_t>(branch.size()));
  int id = first_id;
  Eigen::Index leader = 0;
  for (Eigen::Index i = 0; i < branch.size(); ++i) {
    if (i > 0 && std::abs(branch[i] - branch[leader]) > tol * std::abs(branch[leader])) {
      ++id;
      leader = i;
    }
    ids[static_cast<std::size_t>(i)] = id;
  }
  return ids;
}

Eigen::VectorXd SignedSpectrum::values() const {
  Eigen::VectorXd v(nonzero_count());
  v << positive, negative;
  return v;
}

double SignedSpectrum::leading(int sign) const {
  if (sign > 0) return positive.size() ? positive[0] : 0.0;
  return negative.size() ? negative[0] : 0.0;
}

GramSpectrum gram_spectrum(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& s) {
  if (gram.rows() != s.rows() || gram.cols() != s.cols()) throw InvalidArgument("Gram and S shapes differ");
  const EigenPairs g = eigensolve(0.5 * (gram + gram.transpose()));
  const double top = g.values.size() ? g.values[0] : 0.0;
  Eigen::Index keep = 0;
  while (keep < g.values.size() && g.values[keep] > 1e-14 * top && g.values[keep] > 0.0) ++keep;
  const Eigen::MatrixXd p = g.vectors.leftCols(keep);
  const Eigen::VectorXd root = g.values.head(keep).cwiseSqrt();
  Eigen::MatrixXd t = root.asDiagonal() * (p.transpose() * s * p) * root.asDiagonal();
  t = 0.5 * (t + t.transpose());
  const EigenPairs te = eigensolve(t);
  GramSpectrum out;
  out.values = te.values;
  out.coefficients = p * root.cwiseInverse().asDiagonal() * te.vectors;
  return out;
}

SignedSpectrum build_m_spectrum(const CovarianceOperator& c, const QuadraticForm& o, const SpectrumOptions& opts) {
  if (!c.grid().same_layout(o.grid())) throw InvalidArgument("covariance and quadratic form grids differ");
  const CovarianceModes& modes = c.modes();
  const Eigen::Index k = modes.mu.size();
  const Eigen::MatrixXd b = modes.vectors * modes.mu.cwiseSqrt().asDiagonal();  // n x k

  SignedSpectrum spec;
  spec.kind = c.grid().kind();
  spec.mode_count = k;
  spec.tol_deg = opts.tol_deg;

  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
  const bool low_rank = o.is_factored() && opts.path != SpectrumPath::dense && o.rank() <= k;
  if (opts.path == SpectrumPath::low_rank && !o.is_factored())
    throw InvalidArgument("low-rank path needs a factored quadratic form");
  if (low_rank) {
    const Eigen::MatrixXd f = o.weighted_functionals();
    const Eigen::MatrixXd gm = b.transpose() * f;  // k x r
    const GramSpectrum gs = gram_spectrum(gm.transpose() * gm, o.coefficients());
    values = gs.values;
    vectors = (gm * gs.coefficients).cast<cplx>();
    spec.trace_product = (o.coefficients() * (f.transpose() * c.weighted_matrix() * f)).trace();
  } else {
    Eigen::MatrixXcd m;
    if (o.is_factored()) {
      const Eigen::MatrixXd gm = b.transpose() * o.weighted_functionals();
      m = (gm * o.coefficients() * gm.transpose()).cast<cplx>();
    } else {
      const Eigen::MatrixXcd bc = b.cast<cplx>();
      m = bc.transpose() * o.dense_matrix() * bc;
    }
    m = 0.5 * (m + m.adjoint());
    const double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    if (m.size() && m.imag().cwiseAbs().maxCoeff() <= 1e-14 * scale) {
      const EigenPairs e = eigensolve(m.real(), opts.backend);
      values = e.values;
      vectors = e.vectors.cast<cplx>();
    } else {
      const HermitianEigenPairs e = eigendecompose_hermitian(m, opts.backend);
      values = e.values;
      vectors = e.vectors;
    }
    const Eigen::MatrixXcd ow = o.weighted_matrix();
    spec.trace_product = (c.weighted_matrix().cast<cplx>().cwiseProduct(ow.transpose())).sum().real();
  }
  spec.low_rank = low_rank;

  const Split s = split_branches(values, modes.mu[0] * form_scale(o));
  spec.positive = s.positive;
  spec.negative = s.negative;
  spec.vectors.resize(k, static_cast<Eigen::Index>(s.order.size()));
  for (std::size_t j = 0; j < s.order.size(); ++j) spec.vectors.col(static_cast<Eigen::Index>(j)) = vectors.col(s.order[j]);
  normalize_phase(spec.vectors);
  spec.cluster_ids = cluster_split(s, opts.tol_deg);
  spec.g_plus = leading_cluster_size(spec.cluster_ids, 0, s.positive.size());
  spec.g_minus = leading_cluster_size(spec.cluster_ids, s.positive.size(), s.negative.size());
  spec.trace_abs = s.positive.sum() - s.negative.sum();
  return spec;
}

CoEigenpairs restricted_co_spectrum(const CovarianceOperator& c, const QuadraticForm& o,
                                    const SignedSpectrum& spectrum) {
  const CovarianceModes& modes = c.modes();
  const Eigen::MatrixXcd b = (modes.vectors * modes.mu.cwiseSqrt().asDiagonal()).cast<cplx>();
  CoEigenpairs co;
  co.values = spectrum.values();
  co.betas = b * spectrum.vectors;
  co.g_plus = spectrum.g_plus;
  co.g_minus = spectrum.g_minus;
  co.cluster_ids = spectrum.cluster_ids;
  const double lead = co.values.cwiseAbs().maxCoeff();
  co.residuals.resize(co.values.size());
  for (Eigen::Index j = 0; j < co.values.size(); ++j) {
    const Eigen::VectorXcd beta = co.betas.col(j);
    const Eigen::VectorXcd r = c.apply(o.apply(beta)) - co.values[j] * beta;
    co.residuals[j] = r.norm() / (lead * beta.norm());
    if (co.residuals[j] > 1e-8) {
      std::ostringstream os;
      os << "restricted C O eigen-equation violated for lambda = " << co.values[j] << " (relative residual "
         << co.residuals[j] << ")";
      throw NumericalError(os.str());
    }
  }
  return co;
}

CoEigenpairs restricted_co_spectrum(const CovarianceOperator& c, const QuadraticForm& o,
                                    const SpectrumOptions& opts) {
  return restricted_co_spectrum(c, o, build_m_spectrum(c, o, opts));
}

CoEigenpairs low_rank_spectrum(const CovarianceOperator& c, const QuadraticForm& o, const SpectrumOptions& opts) {
  if (!o.is_factored()) throw InvalidArgument("low-rank spectrum needs a factored quadratic form");
  if (!c.grid().same_layout(o.grid())) throw InvalidArgument("covariance and quadratic form grids differ");
  const Eigen::Index r = o.rank();
  const auto n = static_cast<Eigen::Index>(c.dimension());
  if (r > n) {
    SpectrumOptions dense = opts;
    dense.path = SpectrumPath::dense;
    return restricted_co_spectrum(c, o, dense);
  }

  const Grid& g = c.grid();
  const auto N = static_cast<std::size_t>(g.components());
  std::vector<std::vector<std::pair<std::size_t, double>>> weighted(static_cast<std::size_t>(r));
  for (Eigen::Index a = 0; a < r; ++a)
    for (const auto& [dof, coef] : o.functionals()[static_cast<std::size_t>(a)].terms)
      weighted[static_cast<std::size_t>(a)].emplace_back(dof, coef / std::sqrt(g.weight(dof / N)));

  Eigen::MatrixXd cf(n, r);  // columns C~ f~_a
  for (Eigen::Index a = 0; a < r; ++a) cf.col(a) = c.apply_sparse(weighted[static_cast<std::size_t>(a)]);
  Eigen::MatrixXd gram(r, r);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b) {
      double s = 0.0;
      for (const auto& [dof, coef] : weighted[static_cast<std::size_t>(b)]) s += coef * cf(static_cast<Eigen::Index>(dof), a);
      gram(b, a) = s;
    }
  gram = 0.5 * (gram + gram.transpose());

  const GramSpectrum gs = gram_spectrum(gram, o.coefficients());
  const double scale = gram.norm() * o.coefficients().norm();
  const Split s = split_branches(gs.values, scale);

  CoEigenpairs co;
  const auto m = static_cast<Eigen::Index>(s.order.size());
  co.values.resize(m);
  Eigen::MatrixXd coef(r, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    co.values[j] = gs.values[s.order[static_cast<std::size_t>(j)]];
    coef.col(j) = gs.coefficients.col(s.order[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd beta = cf * coef.col(j);
    Eigen::Index imax = 0;
    beta.cwiseAbs().maxCoeff(&imax);
    if (beta[imax] < 0) coef.col(j) *= -1.0;
  }
  Eigen::MatrixXcd betas = (cf * coef).cast<cplx>();
  co.betas = std::move(betas);

  // C~ O~ beta = CF S G coef
  const Eigen::MatrixXd lhs = cf * (o.coefficients() * gram * coef);
  const double lead = co.values.cwiseAbs().maxCoeff();
  co.residuals.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd beta = cf * coef.col(j);
    co.residuals[j] = (lhs.col(j) - co.values[j] * beta).norm() / (lead * beta.norm());
    if (co.residuals[j] > 1e-8) {
      std::ostringstream os;
      os << "low-rank C O eigen-equation violated for lambda = " << co.values[j] << " (relative residual "
         << co.residuals[j] << ")";
      throw NumericalError(os.str());
    }
  }
  co.cluster_ids = cluster_split(s, opts.tol_deg);
  co.g_plus = leading_cluster_size(co.cluster_ids, 0, s.positive.size());
  co.g_minus = leading_cluster_size(co.cluster_ids, s.positive.size(), s.negative.size());
  return co;
}

Field FundamentalBasis::field(int n) const { return Field::from_weighted(grid, betas.col(n)); }

namespace {

FundamentalBasis make_basis(const Eigen::MatrixXcd& betas, double eigenvalue, int sign, GridPtr grid) {
  FundamentalBasis basis;
  basis.sign = sign;
  basis.eigenvalue = eigenvalue;
  basis.betas = betas;
  basis.gram = betas.adjoint() * betas;
  basis.grid = std::move(grid);
  for (Eigen::Index j = 0; j < betas.cols(); ++j)
    if (betas.col(j).norm() == 0.0) throw NumericalError("fundamental basis vector vanished");
  return basis;
}

void require_sign(int sign) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
}

}  // namespace

FundamentalBasis fundamental_basis(const SignedSpectrum& spectrum, const CovarianceOperator& c, int sign) {
  require_sign(sign);
  const int g = spectrum.degeneracy(sign);
  if (g == 0) throw InvalidArgument("no fundamental eigenspace for this sign");
  const CovarianceModes& modes = c.modes();
  const Eigen::MatrixXcd b = (modes.vectors * modes.mu.cwiseSqrt().asDiagonal()).cast<cplx>();
  return make_basis(b * spectrum.vectors.middleCols(spectrum.branch_offset(sign), g), spectrum.leading(sign), sign,
                    c.grid_ptr());
}

FundamentalBasis fundamental_basis(const CoEigenpairs& co, const CovarianceOperator& c, int sign) {
  require_sign(sign);
  const int g = sign > 0 ? co.g_plus : co.g_minus;
  if (g == 0) throw InvalidArgument("no fundamental eigenspace for this sign");
  Eigen::Index npos = 0;
  while (npos < co.values.size() && co.values[npos] > 0) ++npos;
  const Eigen::Index offset = sign > 0 ? 0 : npos;
  return make_basis(co.betas.middleCols(offset, g), co.values[offset], sign, c.grid_ptr());
}

}  // namespace qdgf
