#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qdgf/grid.hpp"
#include "qdgf/linalg.hpp"
#include "qdgf/operators.hpp"

namespace qdgf {

enum class SpectrumPath { automatic, dense, low_rank };

struct SpectrumOptions {
  double tol_deg = 1e-6;
  SpectrumPath path = SpectrumPath::automatic;
  EigenBackend backend = EigenBackend::automatic;
};

/// Eigenpairs of M = C^{1/2} O C^{1/2} expressed in the kept covariance-mode
/// basis (coordinates c with weighted vector U c). Nonzero eigenvalues only;
/// the remaining mode_count - nonzero_count directions form the zero space.
///
/// Column order in `vectors`: positive branch descending, then negative
/// branch ascending (most negative first).
struct SignedSpectrum {
  FieldKind kind = FieldKind::real;
  Eigen::VectorXd positive;
  Eigen::VectorXd negative;
  Eigen::MatrixXcd vectors;
  Eigen::Index mode_count = 0;
  int g_plus = 0;
  int g_minus = 0;
  double trace_abs = 0.0;
  /// Tr(C~ O~) computed independently of the eigensolve.
  double trace_product = 0.0;
  double tol_deg = 1e-6;
  bool low_rank = false;
  std::vector<int> cluster_ids;  // one per nonzero eigenvalue, column order

  Eigen::Index nonzero_count() const { return positive.size() + negative.size(); }
  Eigen::Index zero_dimension() const { return mode_count - nonzero_count(); }
  /// All nonzero eigenvalues in column order.
  Eigen::VectorXd values() const;
  double leading(int sign) const;
  int degeneracy(int sign) const { return sign > 0 ? g_plus : g_minus; }
  /// Column offset of the first eigenvector of a branch.
  Eigen::Index branch_offset(int sign) const { return sign > 0 ? 0 : positive.size(); }
};

SignedSpectrum build_m_spectrum(const CovarianceOperator& c, const QuadraticForm& o,
                                const SpectrumOptions& opts = {});

/// Nonzero eigenpairs of C~ O~ with eigenvectors beta in weighted coordinates.
struct CoEigenpairs {
  Eigen::VectorXd values;   // positive descending, then negative ascending
  Eigen::MatrixXcd betas;   // dof_count x values.size()
  Eigen::VectorXd residuals;  // ||C~O~ beta - lambda beta|| / (|lambda_1| ||beta||)
  int g_plus = 0;
  int g_minus = 0;
  std::vector<int> cluster_ids;
};

/// Maps the M spectrum to C~ O~ (beta = C~^{1/2} |lambda>) and checks the
/// eigen-equation residual against 1e-8 |lambda_1| ||beta||.
CoEigenpairs restricted_co_spectrum(const CovarianceOperator& c, const QuadraticForm& o,
                                    const SignedSpectrum& spectrum);
CoEigenpairs restricted_co_spectrum(const CovarianceOperator& c, const QuadraticForm& o,
                                    const SpectrumOptions& opts = {});

/// Spectrum of C~ O~ from the r x r covariance Gram of the functionals. Works
/// on kernel-only (non-materialized) covariances. Falls back to the dense
/// route when r exceeds the dimension.
CoEigenpairs low_rank_spectrum(const CovarianceOperator& c, const QuadraticForm& o,
                               const SpectrumOptions& opts = {});

/// Nonzero eigenvalues of G S (symmetrized as Sigma^{1/2} P^T S P Sigma^{1/2}
/// with G = P Sigma P^T). `coefficients` maps to eigenvectors: for any X with
/// X^T X = G, the columns of X * coefficients are orthonormal eigenvectors of
/// X S X^T.
struct GramSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd coefficients;
};
GramSpectrum gram_spectrum(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& s);

/// Span of the leading eigenspace of one branch, mapped back to field space.
struct FundamentalBasis {
  int sign = 1;
  double eigenvalue = 0.0;
  Eigen::MatrixXcd betas;  // weighted coordinates, one column per degenerate mode
  Eigen::MatrixXcd gram;   // <beta_i|beta_j> = <lambda_i|C|lambda_j>
  GridPtr grid;

  int degeneracy() const { return static_cast<int>(betas.cols()); }
  Field field(int n) const;
};

FundamentalBasis fundamental_basis(const SignedSpectrum& spectrum, const CovarianceOperator& c, int sign);
FundamentalBasis fundamental_basis(const CoEigenpairs& co, const CovarianceOperator& c, int sign);

/// Cluster ids for a branch-ordered list: a new cluster starts when the
/// relative distance to the current cluster leader exceeds tol.
std::vector<int> cluster_eigenvalues(const Eigen::VectorXd& branch, double tol, int first_id = 0);

}  // namespace qdgf
