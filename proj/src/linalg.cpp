#include "qdgf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include "qdgf/errors.hpp"

namespace qdgf {

namespace {

constexpr int kMaxSweeps = 30;

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Finite output, unit columns and small residuals on a spread of columns.
bool lapack_result_ok(const Eigen::MatrixXd& a, const Eigen::VectorXd& w, const Eigen::MatrixXd& v) {
  if (!w.allFinite() || !v.allFinite()) return false;
  const Eigen::Index n = a.rows();
  const double scale = std::max(w.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const Eigen::Index step = std::max<Eigen::Index>(1, n / 32);
  for (Eigen::Index j = 0; j < n; j += step) {
    if (std::abs(v.col(j).norm() - 1.0) > 1e-8) return false;
    if ((a * v.col(j) - w[j] * v.col(j)).norm() > 1e-9 * scale) return false;
  }
  return true;
}

EigenPairs sorted_descending(const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors,
                             int sweeps) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return values[x] > values[y]; });
  EigenPairs out;
  out.values.resize(values.size());
  out.vectors.resize(vectors.rows(), vectors.cols());
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    out.values[j] = values[order[static_cast<std::size_t>(j)]];
    out.vectors.col(j) = vectors.col(order[static_cast<std::size_t>(j)]);
  }
  out.sweeps = sweeps;
  return out;
}

void require_square_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("eigensolver input must be square");
  const double scale = a.cwiseAbs().maxCoeff();
  if (a.size() > 0 && max_asymmetry(a) > 1e-10 * std::max(scale, std::numeric_limits<double>::min()))
    throw InvalidArgument("eigensolver input is not symmetric");
}

}  // namespace

double max_asymmetry(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

EigenPairs eigendecompose_symmetric(const Eigen::MatrixXd& input, double tol) {
  require_square_symmetric(input);
  const Eigen::Index n = input.rows();
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  const double off0 = off_diagonal_norm(a);
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * a.norm();
  const double target = std::max(tol * off0, floor);

  int sweep = 0;
  double off = off0;
  while (off > target) {
    if (sweep == kMaxSweeps) {
      std::ostringstream os;
      os << "Jacobi eigensolver did not converge after " << kMaxSweeps
         << " sweeps (off-diagonal residual " << off << ", target " << target << ")";
      throw NumericalError(os.str());
    }
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Skip rotations that cannot change the diagonal at working precision.
        if (sweep > 4 && std::abs(apq) < 1e-3 * std::numeric_limits<double>::epsilon() *
                                             std::min(std::abs(app), std::abs(aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
    off = off_diagonal_norm(a);
  }
  return sorted_descending(a.diagonal(), v, sweep);
}

EigenPairs eigendecompose_lapack(const Eigen::MatrixXd& input) {
  require_square_symmetric(input);
  const Eigen::Index n = input.rows();
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::VectorXd w(n);
  if (n == 0) return {};
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n),
                                         a.data(), static_cast<lapack_int>(n), w.data());
  if (info != 0) {
    std::ostringstream os;
    os << "LAPACK dsyevd failed with info = " << info;
    throw NumericalError(os.str());
  }
  if (!lapack_result_ok(input, w, a)) {
    // Some OpenBLAS kernel builds return garbage on some CPUs; Eigen's solver does not use BLAS.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (input + input.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed to converge");
    return sorted_descending(es.eigenvalues(), es.eigenvectors(), 0);
  }
  return sorted_descending(w, a, 0);
}

EigenPairs eigensolve(const Eigen::MatrixXd& a, EigenBackend backend) {
  switch (backend) {
    case EigenBackend::jacobi:
      return eigendecompose_symmetric(a);
    case EigenBackend::lapack:
      return eigendecompose_lapack(a);
    case EigenBackend::automatic:
      break;
  }
  return a.rows() > kJacobiMaxAutoDim ? eigendecompose_lapack(a) : eigendecompose_symmetric(a);
}

HermitianEigenPairs eigendecompose_hermitian(const Eigen::MatrixXcd& a, EigenBackend backend) {
  if (a.rows() != a.cols()) throw InvalidArgument("eigensolver input must be square");
  const Eigen::Index n = a.rows();
  const double scale = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
  if (n > 0 && (a - a.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300))
    throw InvalidArgument("eigensolver input is not Hermitian");

  Eigen::MatrixXd embedded(2 * n, 2 * n);
  const Eigen::MatrixXd re = a.real();
  const Eigen::MatrixXd im = a.imag();
  embedded << re, -im, im, re;
  const EigenPairs big = eigensolve(embedded, backend);

  // Consecutive eigenvalues within this gap are treated as one cluster.
  const double gap = 1e-9 * std::max(big.values.cwiseAbs().maxCoeff(), 1e-300);

  HermitianEigenPairs out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  Eigen::Index found = 0;
  Eigen::Index start = 0;
  while (start < 2 * n) {
    Eigen::Index stop = start + 1;
    while (stop < 2 * n && big.values[stop - 1] - big.values[stop] <= gap) ++stop;
    const Eigen::Index cluster_first = found;
    for (Eigen::Index j = start; j < stop && found < n; ++j) {
      Eigen::VectorXcd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z[i] = {big.vectors(i, j), big.vectors(i + n, j)};
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index k = cluster_first; k < found; ++k)
          z -= out.vectors.col(k).dot(z) * out.vectors.col(k);
      const double norm = z.norm();
      // Each complex direction shows up twice (z and i z); the partner
      // collapses to ~0 after projection.
      if (norm < 0.5) continue;
      out.vectors.col(found) = z / norm;
      out.values[found] = big.values[j];
      ++found;
    }
    start = stop;
  }
  if (found != n) throw NumericalError("Hermitian eigensolver could not pair the embedded spectrum");
  return out;
}

void normalize_phase(Eigen::MatrixXcd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index imax = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&imax);
    const std::complex<double> pivot = vectors(imax, j);
    if (std::abs(pivot) == 0.0) continue;
    vectors.col(j) *= std::conj(pivot) / std::abs(pivot);
    vectors(imax, j) = std::abs(pivot);
  }
}

void normalize_sign(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index imax = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (vectors(imax, j) < 0) vectors.col(j) *= -1.0;
  }
}

}  // namespace qdgf
