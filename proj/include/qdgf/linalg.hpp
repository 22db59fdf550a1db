#pragma once

#include <Eigen/Dense>

namespace qdgf {

/// Eigenpairs sorted by descending eigenvalue; column j of `vectors` pairs
/// with `values[j]`.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int sweeps = 0;
};

struct HermitianEigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

enum class EigenBackend { automatic, jacobi, lapack };

/// Dimension above which `automatic` switches from Jacobi to LAPACK.
inline constexpr Eigen::Index kJacobiMaxAutoDim = 256;

/// Cyclic Jacobi rotations. Stops once the off-diagonal Frobenius mass drops
/// below tol times its initial value (or the roundoff floor of the matrix);
/// throws NumericalError after 30 sweeps. Rejects input whose asymmetry
/// exceeds 1e-10 * max|a_ij|.
EigenPairs eigendecompose_symmetric(const Eigen::MatrixXd& a, double tol = 1e-14);

/// Divide-and-conquer symmetric solver (LAPACK dsyevd).
EigenPairs eigendecompose_lapack(const Eigen::MatrixXd& a);

EigenPairs eigensolve(const Eigen::MatrixXd& a, EigenBackend backend = EigenBackend::automatic);

/// Complex Hermitian input through the real embedding [[A, -B], [B, A]]. The
/// embedded spectrum is doubled; each pair is folded back into one complex
/// eigenvector by Gram-Schmidt within the eigenvalue cluster.
HermitianEigenPairs eigendecompose_hermitian(const Eigen::MatrixXcd& a,
                                             EigenBackend backend = EigenBackend::automatic);

/// Largest-magnitude component made real and positive, column by column.
void normalize_phase(Eigen::MatrixXcd& vectors);
void normalize_sign(Eigen::MatrixXd& vectors);

double max_asymmetry(const Eigen::MatrixXd& a);

}  // namespace qdgf
