#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdgf/grid.hpp"
#include "qdgf/spectral.hpp"

namespace qdgf {

/// Law of Q = sum_n lambda_n |t_n|^2 (complex kind) or sum_n lambda_n t_n^2
/// (real kind) for i.i.d. standard t_n. Eigenvalues are stored distinct with
/// multiplicities; zeros are dropped.
struct EigenvalueProfile {
  FieldKind kind = FieldKind::complex;
  std::vector<double> values;
  std::vector<int> multiplicities;

  /// Groups values equal within rel_tol * max|lambda|.
  static EigenvalueProfile from_values(FieldKind kind, const std::vector<double>& values, double rel_tol = 1e-12);

  bool has_positive() const;
  bool has_negative() const;
  /// Largest positive eigenvalue (0 when none) and its multiplicity.
  double lambda_one() const;
  int g_one() const;
  EigenvalueProfile mirrored() const;
  double mean() const;
  double variance() const;
  /// sum m_n / s with s = 1 (complex) or 2 (real): the algebraic decay order
  /// of the characteristic function.
  double total_order() const;
};

/// Profile of the full spectrum, or of the leading cluster of one sign
/// together with the whole opposite branch.
EigenvalueProfile full_profile(const SignedSpectrum& spectrum, double rel_tol = 1e-12);
EigenvalueProfile fundamental_profile(const SignedSpectrum& spectrum, int sign);

/// Density of Q by inverting the characteristic function along a contour
/// pushed into the lower half plane up to a saddle-like depth.
double pdf_inversion(const EigenvalueProfile& profile, double v);

enum class TailMethod { inversion, closed_form, monte_carlo };
std::string to_string(TailMethod m);

struct TailOptions {
  std::size_t mc_draws = 1'000'000;
  std::uint64_t seed = 12345;
  std::uint64_t stream = 0;
};

/// value = P(Q > u). error: quadrature error estimate (inversion), 0
/// (closed form) or 3 sigma (Monte Carlo).
struct TailEstimate {
  double value = 0.0;
  double error = 0.0;
};
TailEstimate tail_probability(const EigenvalueProfile& profile, double u, TailMethod method,
                              const TailOptions& opts = {});

/// Leading large-v term of the density (largest positive eigenvalue's pole).
double pdf_asymptotic(const EigenvalueProfile& profile, double v);

struct LowerBound {
  double bound = 0.0;
  double c1 = 0.0;
};
LowerBound tail_lower_bound(const EigenvalueProfile& profile, double u, double alpha);

/// Scan of rho / rho_asym; v_star is the first scanned v after which the
/// ratio stays inside [1 - band, 1 + band].
struct AsymptoticOnset {
  bool found = false;
  double v_star = 0.0;
  std::vector<double> v;
  std::vector<double> ratio;
};
AsymptoticOnset asymptotic_onset(const EigenvalueProfile& profile, double band = 0.05, int points = 120);

}  // namespace qdgf
