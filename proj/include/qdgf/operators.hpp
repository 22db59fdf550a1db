#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdgf/grid.hpp"
#include "qdgf/kernels.hpp"
#include "qdgf/linalg.hpp"

namespace qdgf {

/// Kept eigenpairs of the weighted covariance matrix.
struct CovarianceModes {
  Eigen::VectorXd mu;       // descending, all > cutoff
  Eigen::MatrixXd vectors;  // dof_count x kept, orthonormal columns
  double cutoff = 0.0;
  Eigen::Index dropped = 0;  // modes at or below the cutoff (including clipped negatives)
  double most_negative = 0.0;
};

struct CovarianceAssembly {
  /// Store the dense weighted matrix. Without it entries are evaluated from
  /// the kernel on demand (enough for the low-rank spectral route).
  bool materialize = true;
  /// Eigendecompose the dense matrix; requires materialize.
  bool decompose = true;
  EigenBackend backend = EigenBackend::automatic;
};

/// Discretized covariance in weighted coordinates,
///   C~_{pq} = sqrt(w_i w_j) C_{mu nu}(x_i - x_j)  for p = (i, mu), q = (j, nu).
/// Kernels are real, so C~ is real symmetric for both field kinds.
class CovarianceOperator {
 public:
  CovarianceOperator(GridPtr grid, CovarianceKernel kernel, const CovarianceAssembly& opts = {});
  /// Wraps an explicit weighted matrix (no kernel); always materialized.
  CovarianceOperator(GridPtr grid, Eigen::MatrixXd weighted, bool decompose = true,
                     EigenBackend backend = EigenBackend::automatic);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t dimension() const { return grid_->dof_count(); }

  double entry(std::size_t p, std::size_t q) const;
  /// Column C~ e_q.
  Eigen::VectorXd column(std::size_t q) const;
  /// C~ x for a sparse x given as (dof, value) pairs.
  Eigen::VectorXd apply_sparse(const std::vector<std::pair<std::size_t, double>>& x) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
  /// C~^{1/2} x over the kept modes.
  Eigen::VectorXcd apply_sqrt(const Eigen::VectorXcd& x) const;

  double trace() const;

  bool materialized() const { return weighted_.has_value(); }
  bool decomposed() const { return modes_.has_value(); }
  const Eigen::MatrixXd& weighted_matrix() const;
  const CovarianceModes& modes() const;
  Eigen::Index kept_rank() const { return modes().mu.size(); }

  /// Computes the eigendecomposition if not present yet.
  void decompose(EigenBackend backend = EigenBackend::automatic);

 private:
  void assemble();

  GridPtr grid_;
  std::optional<CovarianceKernel> kernel_;
  std::optional<Eigen::MatrixXd> weighted_;
  std::optional<CovarianceModes> modes_;
};

CovarianceOperator assemble_covariance_scalar(GridPtr grid, const CovarianceKernel& kernel,
                                              const CovarianceAssembly& opts = {});
CovarianceOperator assemble_covariance_flow(GridPtr grid, const IsotropicFlowKernel& kernel,
                                            const CovarianceAssembly& opts = {});

/// Linear functional l(v) = sum_k c_k v[dof_k] in function coordinates.
struct LinearFunctional {
  std::vector<std::pair<std::size_t, double>> terms;
  std::string label;
};

/// Hermitian quadratic form <v|O|v>, either a dense weighted matrix or
///   O~ = sum_ab S_ab f~_a f~_b^T   with f~_a = W^{-1/2} a  (weighted coordinates).
class QuadraticForm {
 public:
  static QuadraticForm dense(GridPtr grid, Eigen::MatrixXcd weighted);
  static QuadraticForm factored(GridPtr grid, std::vector<LinearFunctional> functionals,
                                Eigen::MatrixXd coefficients);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  bool is_factored() const { return factored_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(functionals_.size()); }

  const std::vector<LinearFunctional>& functionals() const { return functionals_; }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  const Eigen::MatrixXcd& dense_matrix() const;

  /// dof_count x r matrix with columns f~_a.
  Eigen::MatrixXd weighted_functionals() const;
  /// Dense O~ (materialized from the factors if needed).
  Eigen::MatrixXcd weighted_matrix() const;

  /// O~ x in weighted coordinates.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
  /// <v|O|v> for a field, real by hermiticity.
  double value(const Field& v) const;
  double value_weighted(const Eigen::VectorXcd& x) const;
  /// Functional values l_a(v) in function coordinates.
  Eigen::VectorXcd functional_values(const Field& v) const;

 private:
  QuadraticForm() = default;

  GridPtr grid_;
  bool factored_ = false;
  Eigen::MatrixXcd dense_;
  std::vector<LinearFunctional> functionals_;
  Eigen::MatrixXd coefficients_;
};

/// (O + O^H) / 2
Eigen::MatrixXcd symmetric_part(const Eigen::MatrixXcd& o);
QuadraticForm symmetrize(GridPtr grid, const Eigen::MatrixXcd& weighted);
QuadraticForm identity_form(GridPtr grid);

/// |v(0)|^2 as a rank-one factored form.
QuadraticForm point_intensity_form(GridPtr grid);

/// v(0) . curl_h v(0) with second-order central differences at the origin.
/// Functionals ordered a_1..a_3 (values), b_1..b_3 (curl components).
QuadraticForm helicity_form(GridPtr grid);
Eigen::MatrixXd helicity_coefficients();

}  // namespace qdgf
