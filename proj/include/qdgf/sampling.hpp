#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "qdgf/grid.hpp"
#include "qdgf/operators.hpp"
#include "qdgf/rng.hpp"
#include "qdgf/spectral.hpp"

namespace qdgf {

/// KL coefficients t_n, one per kept covariance mode. The first
/// nonzero_count entries follow the SignedSpectrum column order; the rest
/// are coordinates in an orthonormal basis of the zero space of M.
struct SpectralCoefficients {
  FieldKind kind = FieldKind::real;
  Eigen::VectorXcd values;
};

/// Per-sample scalars needed by the concentration statistics, computed in
/// covariance-mode coordinates without forming the field.
struct SampleGeometry {
  double q = 0.0;
  double norm = 0.0;              // ||phi||
  double fundamental_norm = 0.0;  // ||phi_bar||
  double residual_norm = 0.0;     // ||delta phi||
  double overlap = 0.0;           // Re <phi_bar|phi>
  double distance = 0.0;          // D
};

/// Draws and maps KL coefficients for a given (C, M-spectrum) pair.
class SpectralSampler {
 public:
  SpectralSampler(const CovarianceOperator& c, const SignedSpectrum& spectrum);

  FieldKind kind() const { return kind_; }
  Eigen::Index mode_count() const { return mu_.size(); }
  Eigen::Index nonzero_count() const { return lambda_.size(); }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const SignedSpectrum& spectrum() const { return spectrum_; }
  const CovarianceOperator& covariance() const { return *cov_; }

  /// One standard draw for every kept mode.
  SpectralCoefficients draw(RngStream& rng) const;
  /// Fills `out` (length nonzero_count) with standard draws scaled per mode.
  void draw_nonzero(RngStream& rng, const Eigen::VectorXd& scale, Eigen::VectorXcd& out) const;
  /// Completes a coefficient vector with standard zero-space draws.
  SpectralCoefficients complete(const Eigen::VectorXcd& nonzero, RngStream& rng) const;

  double quadratic_value(const SpectralCoefficients& t) const;
  double quadratic_value_nonzero(const Eigen::VectorXcd& t_nonzero) const;

  /// Coordinates a with weighted field U diag(sqrt mu) a.
  Eigen::VectorXcd mode_coordinates(const SpectralCoefficients& t) const;
  /// Same for the fundamental part of one sign.
  Eigen::VectorXcd fundamental_coordinates(const SpectralCoefficients& t, int sign) const;
  Field field_from_coordinates(const Eigen::VectorXcd& a) const;

  Field reconstruct(const SpectralCoefficients& t) const;
  Field fundamental_projection(const SpectralCoefficients& t, int sign) const;
  SampleGeometry geometry(const SpectralCoefficients& t, int sign) const;

 private:
  void check(const SpectralCoefficients& t) const;

  const CovarianceOperator* cov_;
  SignedSpectrum spectrum_;
  FieldKind kind_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXcd vectors_;  // k x r
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr_;
  Eigen::MatrixXcd r_top_;    // r x r triangular factor of the vectors
};

std::vector<SpectralCoefficients> sample_coefficients(RngStream& rng, const SpectralSampler& sampler,
                                                      std::size_t count);
Field reconstruct_field(const SpectralCoefficients& t, const SpectralSampler& sampler);
double quadratic_value(const SpectralCoefficients& t, const SpectralSampler& sampler);

/// phi_bar = sum over the fundamental cluster of t_n beta_n.
Field fundamental_projection(const SpectralCoefficients& t, const SignedSpectrum& spectrum,
                             const FundamentalBasis& basis);
Field residual(const Field& phi, const Field& phi_bar);
/// || phi/||phi|| - phi_bar/||phi_bar|| ||; throws on a zero-norm input.
double distance_statistic(const Field& phi, const Field& phi_bar);

enum class SamplingMethod { automatic, rejection, tilted };
std::string to_string(SamplingMethod m);
SamplingMethod sampling_method_from_string(const std::string& s);

/// Mean-matching exponential tilt for sign*Q:
///   sum l'/(1 - theta l') = u (complex), sum l'/(1 - 2 theta l') = u (real),
/// with l' = sign*lambda. Returns 0 when u is at or below the unconditional mean.
double tilt_parameter(const Eigen::VectorXd& lambda, int sign, double u, FieldKind kind);
/// log E[exp(theta sign Q)].
double tilt_log_normalizer(const Eigen::VectorXd& lambda, int sign, double theta, FieldKind kind);

struct EnsembleSample {
  SpectralCoefficients t;
  double q = 0.0;
  double weight = 1.0;
};

struct ConditionalEnsemble {
  int sign = 1;
  double threshold = 0.0;
  SamplingMethod method = SamplingMethod::rejection;
  double theta = 0.0;
  std::vector<EnsembleSample> samples;
  std::size_t proposals = 0;
  double acceptance_rate = 0.0;
  double ess = 0.0;
  /// Estimate of P(sign Q > u) and its standard error.
  double tail_probability = 0.0;
  double tail_error = 0.0;
};

struct EnsembleOptions {
  std::size_t max_proposals = 200'000'000;
};

/// Conditional draws from {sign Q > u}. Rejection keeps unit weights; tilted
/// weights are exp(-theta (sign Q - u)) (any constant factor cancels in
/// self-normalized means).
ConditionalEnsemble conditional_ensemble(const SpectralSampler& sampler, int sign, double u,
                                         SamplingMethod method, std::size_t count, RngStream& rng,
                                         const EnsembleOptions& opts = {});

double effective_sample_size(const std::vector<double>& weights);

/// Self-normalized mean with delta-method standard error.
struct WeightedMean {
  double mean = 0.0;
  double error = 0.0;
};
WeightedMean weighted_mean(const std::vector<double>& values, const std::vector<double>& weights);
double weighted_median(std::vector<double> values, std::vector<double> weights);

}  // namespace qdgf
