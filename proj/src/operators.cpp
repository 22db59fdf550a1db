#include "qdgf/operators.hpp"

#include <cmath>
#include <sstream>

#include "qdgf/errors.hpp"

namespace qdgf {

namespace {

void check_kernel_fits(const Grid& grid, const CovarianceKernel& kernel) {
  if (kernel.components() != grid.components()) {
    std::ostringstream os;
    os << "kernel '" << kernel.name() << "' has " << kernel.components() << " components but the grid has "
       << grid.components();
    throw InvalidArgument(os.str());
  }
  if (kernel.required_dim() != 0 && kernel.required_dim() != grid.dim()) {
    std::ostringstream os;
    os << "kernel '" << kernel.name() << "' needs a " << kernel.required_dim() << "-dimensional grid";
    throw InvalidArgument(os.str());
  }
}

}  // namespace

CovarianceOperator::CovarianceOperator(GridPtr grid, CovarianceKernel kernel, const CovarianceAssembly& opts)
    : grid_(std::move(grid)), kernel_(std::move(kernel)) {
  check_kernel_fits(*grid_, *kernel_);
  std::vector<double> zero(static_cast<std::size_t>(grid_->dim()), 0.0);
  const Eigen::MatrixXd c0 = kernel_->block(zero);
  for (Eigen::Index m = 0; m < c0.rows(); ++m)
    if (!(c0(m, m) > 0.0)) throw InvalidArgument("invalid covariance kernel: C(0) must be positive");
  if (opts.materialize) {
    assemble();
    if (opts.decompose) decompose(opts.backend);
  } else if (opts.decompose) {
    throw InvalidArgument("decomposition requires a materialized covariance");
  }
}

CovarianceOperator::CovarianceOperator(GridPtr grid, Eigen::MatrixXd weighted, bool decompose_now,
                                       EigenBackend backend)
    : grid_(std::move(grid)) {
  const auto n = static_cast<Eigen::Index>(grid_->dof_count());
  if (weighted.rows() != n || weighted.cols() != n)
    throw InvalidArgument("covariance matrix does not match the grid dimension");
  if (max_asymmetry(weighted) > 1e-12 * std::max(weighted.cwiseAbs().maxCoeff(), 1e-300))
    throw InvalidArgument("covariance matrix is not symmetric");
  weighted_ = 0.5 * (weighted + weighted.transpose());
  if (decompose_now) decompose(backend);
}

void CovarianceOperator::assemble() {
  const Grid& g = *grid_;
  const int N = g.components();
  const auto n = static_cast<Eigen::Index>(g.dof_count());
  Eigen::MatrixXd a(n, n);
  std::vector<double> sep(static_cast<std::size_t>(g.dim()));
  std::vector<double> block(static_cast<std::size_t>(N * N));
  std::vector<std::vector<double>> coords(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) coords[i] = g.coordinates(i);

  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (std::size_t j = i; j < g.node_count(); ++j) {
      for (std::size_t k = 0; k < sep.size(); ++k) sep[k] = coords[i][k] - coords[j][k];
      kernel_->evaluate(sep, block);
      const double s = std::sqrt(g.weight(i) * g.weight(j));
      for (int m = 0; m < N; ++m) {
        for (int v = 0; v < N; ++v) {
          const double value = s * block[static_cast<std::size_t>(m * N + v)];
          const auto p = static_cast<Eigen::Index>(g.dof(i, m));
          const auto q = static_cast<Eigen::Index>(g.dof(j, v));
          a(p, q) = value;
          a(q, p) = value;
        }
      }
    }
  }
  weighted_ = std::move(a);
}

void CovarianceOperator::decompose(EigenBackend backend) {
  if (modes_) return;
  const EigenPairs eig = eigensolve(weighted_matrix(), backend);
  const double mu1 = eig.values.size() ? eig.values[0] : 0.0;
  if (!(mu1 > 0.0)) throw NumericalError("invalid covariance kernel: largest eigenvalue is not positive");
  const double most_negative = eig.values[eig.values.size() - 1];
  if (most_negative < -1e-8 * mu1) {
    std::ostringstream os;
    os << "invalid covariance kernel: eigenvalue " << most_negative << " below -1e-8 * mu_1 (mu_1 = " << mu1
       << ")";
    throw NumericalError(os.str());
  }
  CovarianceModes m;
  m.cutoff = 1e-12 * mu1;
  Eigen::Index kept = 0;
  while (kept < eig.values.size() && eig.values[kept] > m.cutoff) ++kept;
  m.mu = eig.values.head(kept);
  m.vectors = eig.vectors.leftCols(kept);
  normalize_sign(m.vectors);
  m.dropped = eig.values.size() - kept;
  m.most_negative = most_negative;
  modes_ = std::move(m);
}

const Eigen::MatrixXd& CovarianceOperator::weighted_matrix() const {
  if (!weighted_) throw InvalidArgument("covariance was assembled without a dense matrix");
  return *weighted_;
}

const CovarianceModes& CovarianceOperator::modes() const {
  if (!modes_) throw InvalidArgument("covariance has no eigendecomposition");
  return *modes_;
}

double CovarianceOperator::entry(std::size_t p, std::size_t q) const {
  if (weighted_) return (*weighted_)(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
  const Grid& g = *grid_;
  const auto N = static_cast<std::size_t>(g.components());
  const std::size_t i = p / N, j = q / N;
  const auto m = static_cast<int>(p % N), v = static_cast<int>(q % N);
  const auto xi = g.coordinates(i);
  const auto xj = g.coordinates(j);
  std::vector<double> sep(xi.size());
  for (std::size_t k = 0; k < sep.size(); ++k) sep[k] = xi[k] - xj[k];
  std::vector<double> block(N * N);
  kernel_->evaluate(sep, block);
  return std::sqrt(g.weight(i) * g.weight(j)) * block[static_cast<std::size_t>(m) * N + static_cast<std::size_t>(v)];
}

Eigen::VectorXd CovarianceOperator::column(std::size_t q) const {
  if (weighted_) return weighted_->col(static_cast<Eigen::Index>(q));
  return apply_sparse({{q, 1.0}});
}

Eigen::VectorXd CovarianceOperator::apply_sparse(const std::vector<std::pair<std::size_t, double>>& x) const {
  const auto n = static_cast<Eigen::Index>(dimension());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (weighted_) {
    for (const auto& [q, c] : x) out += c * weighted_->col(static_cast<Eigen::Index>(q));
    return out;
  }
  const Grid& g = *grid_;
  const int N = g.components();
  std::vector<double> sep(static_cast<std::size_t>(g.dim()));
  std::vector<double> block(static_cast<std::size_t>(N * N));
  for (const auto& [q, c] : x) {
    const std::size_t j = q / static_cast<std::size_t>(N);
    const int v = static_cast<int>(q % static_cast<std::size_t>(N));
    const auto xj = g.coordinates(j);
    const double sj = std::sqrt(g.weight(j));
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      for (std::size_t k = 0; k < sep.size(); ++k) sep[k] = g.coordinate(i, static_cast<int>(k)) - xj[k];
      kernel_->evaluate(sep, block);
      const double s = sj * std::sqrt(g.weight(i)) * c;
      for (int m = 0; m < N; ++m)
        out[static_cast<Eigen::Index>(g.dof(i, m))] += s * block[static_cast<std::size_t>(m * N + v)];
    }
  }
  return out;
}

Eigen::VectorXcd CovarianceOperator::apply(const Eigen::VectorXcd& x) const {
  if (x.size() != static_cast<Eigen::Index>(dimension())) throw InvalidArgument("vector length mismatch");
  if (weighted_) return weighted_->cast<std::complex<double>>() * x;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(x.size());
  for (Eigen::Index q = 0; q < x.size(); ++q) {
    if (x[q] == 0.0) continue;
    out += column(static_cast<std::size_t>(q)).cast<std::complex<double>>() * x[q];
  }
  return out;
}

Eigen::VectorXcd CovarianceOperator::apply_sqrt(const Eigen::VectorXcd& x) const {
  const CovarianceModes& m = modes();
  if (x.size() != m.vectors.rows()) throw InvalidArgument("vector length mismatch");
  Eigen::VectorXcd c = m.vectors.transpose().cast<std::complex<double>>() * x;
  c.array() *= m.mu.array().sqrt().cast<std::complex<double>>();
  return m.vectors.cast<std::complex<double>>() * c;
}

double CovarianceOperator::trace() const {
  if (weighted_) return weighted_->trace();
  double t = 0.0;
  for (std::size_t p = 0; p < dimension(); ++p) t += entry(p, p);
  return t;
}

CovarianceOperator assemble_covariance_scalar(GridPtr grid, const CovarianceKernel& kernel,
                                              const CovarianceAssembly& opts) {
  if (grid->components() != 1) throw InvalidArgument("scalar covariance needs a one-component grid");
  return CovarianceOperator(std::move(grid), kernel, opts);
}

CovarianceOperator assemble_covariance_flow(GridPtr grid, const IsotropicFlowKernel& kernel,
                                            const CovarianceAssembly& opts) {
  if (grid->dim() != 3 || grid->components() != 3 || grid->kind() != FieldKind::real)
    throw InvalidArgument("flow covariance needs a real 3-component grid in 3 dimensions");
  return CovarianceOperator(std::move(grid), kernel.as_kernel(), opts);
}

// --- quadratic forms -------------------------------------------------------

QuadraticForm QuadraticForm::dense(GridPtr grid, Eigen::MatrixXcd weighted) {
  const auto n = static_cast<Eigen::Index>(grid->dof_count());
  if (weighted.rows() != n || weighted.cols() != n)
    throw InvalidArgument("quadratic form matrix does not match the grid dimension");
  QuadraticForm q;
  q.grid_ = std::move(grid);
  q.dense_ = symmetric_part(weighted);
  return q;
}

QuadraticForm QuadraticForm::factored(GridPtr grid, std::vector<LinearFunctional> functionals,
                                      Eigen::MatrixXd coefficients) {
  const auto r = static_cast<Eigen::Index>(functionals.size());
  if (r == 0) throw InvalidArgument("factored form needs at least one functional");
  if (coefficients.rows() != r || coefficients.cols() != r)
    throw InvalidArgument("coefficient matrix must be r x r");
  if (max_asymmetry(coefficients) > 1e-14 * std::max(coefficients.cwiseAbs().maxCoeff(), 1e-300))
    throw InvalidArgument("coefficient matrix must be symmetric");
  for (const auto& f : functionals)
    for (const auto& [dof, c] : f.terms)
      if (dof >= grid->dof_count()) throw InvalidArgument("functional refers to a dof outside the grid");
  QuadraticForm q;
  q.grid_ = std::move(grid);
  q.factored_ = true;
  q.functionals_ = std::move(functionals);
  q.coefficients_ = 0.5 * (coefficients + coefficients.transpose());
  return q;
}

const Eigen::MatrixXcd& QuadraticForm::dense_matrix() const {
  if (factored_) throw InvalidArgument("quadratic form is factored");
  return dense_;
}

Eigen::MatrixXd QuadraticForm::weighted_functionals() const {
  const auto n = static_cast<Eigen::Index>(grid_->dof_count());
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, rank());
  const auto N = static_cast<std::size_t>(grid_->components());
  for (Eigen::Index a = 0; a < rank(); ++a)
    for (const auto& [dof, c] : functionals_[static_cast<std::size_t>(a)].terms)
      f(static_cast<Eigen::Index>(dof), a) += c / std::sqrt(grid_->weight(dof / N));
  return f;
}

Eigen::MatrixXcd QuadraticForm::weighted_matrix() const {
  if (!factored_) return dense_;
  const Eigen::MatrixXd f = weighted_functionals();
  return (f * coefficients_ * f.transpose()).cast<std::complex<double>>();
}

Eigen::VectorXcd QuadraticForm::apply(const Eigen::VectorXcd& x) const {
  if (x.size() != static_cast<Eigen::Index>(grid_->dof_count())) throw InvalidArgument("vector length mismatch");
  if (!factored_) return dense_ * x;
  const Eigen::MatrixXcd f = weighted_functionals().cast<std::complex<double>>();
  return f * (coefficients_.cast<std::complex<double>>() * (f.transpose() * x));
}

double QuadraticForm::value_weighted(const Eigen::VectorXcd& x) const {
  return x.dot(apply(x)).real();
}

Eigen::VectorXcd QuadraticForm::functional_values(const Field& v) const {
  if (!factored_) throw InvalidArgument("quadratic form is not factored");
  Eigen::VectorXcd l = Eigen::VectorXcd::Zero(rank());
  for (Eigen::Index a = 0; a < rank(); ++a)
    for (const auto& [dof, c] : functionals_[static_cast<std::size_t>(a)].terms)
      l[a] += c * v.values()[static_cast<Eigen::Index>(dof)];
  return l;
}

double QuadraticForm::value(const Field& v) const {
  if (!v.grid().same_layout(*grid_)) throw InvalidArgument("field lives on a different grid");
  if (!factored_) return value_weighted(v.weighted());
  const Eigen::VectorXcd l = functional_values(v);
  return l.dot(coefficients_.cast<std::complex<double>>() * l).real();
}

Eigen::MatrixXcd symmetric_part(const Eigen::MatrixXcd& o) {
  if (o.rows() != o.cols()) throw InvalidArgument("quadratic form matrix must be square");
  return 0.5 * (o + o.adjoint());
}

QuadraticForm symmetrize(GridPtr grid, const Eigen::MatrixXcd& weighted) {
  return QuadraticForm::dense(std::move(grid), weighted);
}

QuadraticForm identity_form(GridPtr grid) {
  const auto n = static_cast<Eigen::Index>(grid->dof_count());
  return QuadraticForm::dense(std::move(grid), Eigen::MatrixXcd::Identity(n, n));
}

QuadraticForm point_intensity_form(GridPtr grid) {
  if (grid->components() != 1) throw InvalidArgument("point intensity form needs a one-component grid");
  LinearFunctional f{{{grid->dof(grid->origin_node(), 0), 1.0}}, "v(0)"};
  return QuadraticForm::factored(std::move(grid), {f}, Eigen::MatrixXd::Ones(1, 1));
}

Eigen::MatrixXd helicity_coefficients() {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6, 6);
  s.topRightCorner(3, 3) = 0.5 * Eigen::Matrix3d::Identity();
  s.bottomLeftCorner(3, 3) = 0.5 * Eigen::Matrix3d::Identity();
  return s;
}

QuadraticForm helicity_form(GridPtr grid) {
  if (grid->dim() != 3 || grid->components() != 3 || grid->kind() != FieldKind::real)
    throw InvalidArgument("helicity form needs a real 3-component grid in 3 dimensions");
  const std::size_t origin = grid->origin_node();
  std::vector<LinearFunctional> fs;
  for (int m = 0; m < 3; ++m) fs.push_back({{{grid->dof(origin, m), 1.0}}, "v" + std::to_string(m + 1) + "(0)"});

  auto neighbour = [&](int axis, int step) {
    int offset[3] = {0, 0, 0};
    offset[axis] = step;
    try {
      return grid->node_at_offset(offset);
    } catch (const InvalidArgument&) {
      throw InvalidArgument("curl stencil out of domain");
    }
  };
  // (curl v)_m = eps_{m n k} d_n v_k
  for (int m = 0; m < 3; ++m) {
    LinearFunctional b;
    b.label = "curl" + std::to_string(m + 1) + "(0)";
    for (int n = 0; n < 3; ++n) {
      for (int k = 0; k < 3; ++k) {
        int eps = 0;
        if (n == (m + 1) % 3 && k == (m + 2) % 3) eps = 1;
        if (n == (m + 2) % 3 && k == (m + 1) % 3) eps = -1;
        if (eps == 0) continue;
        const double c = eps / (2.0 * grid->spacing(n));
        b.terms.emplace_back(grid->dof(neighbour(n, +1), k), c);
        b.terms.emplace_back(grid->dof(neighbour(n, -1), k), -c);
      }
    }
    fs.push_back(std::move(b));
  }
  return QuadraticForm::factored(std::move(grid), std::move(fs), helicity_coefficients());
}

}  // namespace qdgf
