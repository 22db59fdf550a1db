#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qdgf/grid.hpp"
#include "qdgf/kernels.hpp"
#include "qdgf/operators.hpp"

namespace qdgf {

/// Point-intensity exemplar: lambda_1 = C(0), profile C(x) / ||C||.
struct PointExemplarPrediction {
  double lambda1 = 0.0;
  int degeneracy = 1;
  Field profile;
};
PointExemplarPrediction point_prediction(const CovarianceKernel& kernel, GridPtr grid);

/// Helicity exemplar: lambda_{+-1} = +-sqrt(5) E / (3 ell), three-fold each.
struct HelicityExemplarPrediction {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  int degeneracy = 3;
  /// Normalization of the eigenfields, sqrt(3) / (2 sqrt(E)).
  double alpha = 0.0;
};
HelicityExemplarPrediction helicity_eigenvalues(double energy, double taylor_scale);

/// u_{+-}(x; e_t) = f e_t + (x/2) f' [e_t - (e_x.e_t) e_x]
///                 +- (ell/sqrt5) [2 f' + (x/2) f''] (e_x x e_t)
Eigen::Vector3d helicity_profile(const IsotropicFlowKernel& kernel, const Eigen::Vector3d& x, int sign,
                                 const Eigen::Vector3d& e_t);
Field helicity_prediction(const IsotropicFlowKernel& kernel, GridPtr grid, int sign, const Eigen::Vector3d& e_t);

/// Covariance Gram of (v(0), curl v(0)) for the isotropic flow kernel:
/// diag((2E/3) I, (10E / 3 ell^2) I).
Eigen::MatrixXd helicity_analytic_gram(double energy, double taylor_scale);

/// Finite-difference check of sum_mu d^2 C_{mu mu}(x - y) / dx_nu dy_nu at
/// y = x against 10E / (3 ell^2).
struct CurlCurlReport {
  double limit = 0.0;
  std::vector<double> h;
  std::vector<double> value;
  std::vector<double> error;
  std::vector<double> order;  // between consecutive h entries
};
CurlCurlReport curl_curl_identity_check(const IsotropicFlowKernel& kernel, int nu, const std::vector<double>& h);

/// <lambda_g|lambda_l> for the candidate eigenfields C (a_l +- (ell/sqrt5) b_l),
/// evaluated through the field and discrete curl at the origin.
struct GramIdentityReport {
  Eigen::Matrix3d raw;
  Eigen::Matrix3d normalized;  // raw * alpha^2 with alpha = sqrt(3) / (2 sqrt(E))
  double expected_diagonal = 0.0;  // 4E/3
  double diagonal_spread = 0.0;    // (max - min) / mean of the diagonal
  double offdiagonal_ratio = 0.0;  // max |offdiag| / mean diagonal
};
GramIdentityReport gram_identity_check(const CovarianceOperator& c, const QuadraticForm& helicity, int sign,
                                       double energy, double taylor_scale);

/// Principal angles (degrees, ascending) between the column spans of a and b
/// in the Euclidean (weighted-coordinate) inner product.
std::vector<double> principal_angles_degrees(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace qdgf
